"""
Record types shared by every proxforge stage.
"""

from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    field_validator,
    model_validator,
)

from .constants import (
    IMAGE_TOKEN,
    AuditKind,
    CaptionType,
    EvalStage,
    ProximityRelation,
    Stage,
)

BBox = Tuple[float, float, float, float]
Point = Tuple[float, float]

_SNAP = Decimal("0.000001")
_CENTS = Decimal("0.01")


def quantize_depth(raw: float) -> float:
    """Round a raw depth value half-up to two decimals.

    The value is first snapped to 6 decimals so that epsilon-sized noise
    (0.3749998 from a 1e-6 inversion offset) does not flip the rounding.
    """
    snapped = Decimal(repr(float(raw))).quantize(_SNAP, rounding=ROUND_HALF_EVEN)
    return float(snapped.quantize(_CENTS, rounding=ROUND_HALF_UP))


class DepthLabel(BaseModel):
    """Relative depth of one object: 0.00 closest, 1.00 farthest."""

    model_config = ConfigDict(frozen=True)

    value: float

    @field_validator("value")
    @classmethod
    def _two_decimals_in_unit_range(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"depth label {v} outside [0, 1]")
        if abs(v * 100 - round(v * 100)) > 1e-6:
            raise ValueError(f"depth label {v} is not quantized to 2 decimals")
        return round(v, 2)

    @classmethod
    def from_raw(cls, raw: float) -> "DepthLabel":
        return cls(value=quantize_depth(raw))

    @property
    def cents(self) -> int:
        return int(round(self.value * 100))

    @property
    def text(self) -> str:
        return f"{self.value:.2f}"


class SceneObject(BaseModel):
    """One captioned, bounding-boxed object of a scene."""

    object_id: str
    caption: str
    bbox: BBox
    center: Point
    depth_label: Optional[DepthLabel] = None
    clamped: bool = False

    @field_validator("caption")
    @classmethod
    def _caption_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("caption is empty")
        return v

    @field_validator("bbox")
    @classmethod
    def _positive_extent(cls, v: BBox) -> BBox:
        if v[2] <= 0 or v[3] <= 0:
            raise ValueError(f"bbox {v} has non-positive width or height")
        return v


class SceneRecord(BaseModel):
    """An image with its objects."""

    image_id: str
    image_path: str
    width: PositiveInt
    height: PositiveInt
    objects: List[SceneObject] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _objects_consistent(self) -> "SceneRecord":
        seen = set()
        for obj in self.objects:
            if obj.object_id in seen:
                raise ValueError(f"duplicate object_id {obj.object_id!r}")
            seen.add(obj.object_id)
            x, y, w, h = obj.bbox
            if x < 0 or y < 0 or x + w > self.width + 1e-9 or y + h > self.height + 1e-9:
                raise ValueError(f"bbox of {obj.object_id!r} exceeds the image")
        return self

    def labeled_objects(self) -> List[SceneObject]:
        return [obj for obj in self.objects if obj.depth_label is not None]


class RejectEntry(BaseModel):
    """An input entry that could not become a SceneRecord."""

    index: int
    image_id: Optional[str] = None
    reason: str


class PerceptionTruth(BaseModel):
    kind: Literal["depth"] = "depth"
    caption: str
    depth: float


class RelationTruth(BaseModel):
    kind: Literal["relation"] = "relation"
    relation: ProximityRelation
    captions: Tuple[str, str]
    depths: Optional[Tuple[float, float]] = None
    answer: str


GroundTruth = Annotated[Union[PerceptionTruth, RelationTruth], Field(discriminator="kind")]


class Turn(BaseModel):
    """One side of an instruction-tuning exchange."""

    model_config = ConfigDict(populate_by_name=True)

    role: Literal["human", "gpt"] = Field(alias="from")
    value: str


class ConversationMeta(BaseModel):
    template_id: str
    ground_truth: GroundTruth
    seed_trace: int = Field(ge=0, lt=2**64)


class Conversation(BaseModel):
    """A generated question/answer sample in instruction-tuning layout."""

    model_config = ConfigDict(populate_by_name=True)

    id: str
    image: str
    stage: Stage
    turns: List[Turn] = Field(alias="conversations")
    meta: ConversationMeta

    @model_validator(mode="after")
    def _one_question_one_answer(self) -> "Conversation":
        if len(self.turns) != 2:
            raise ValueError("a conversation has exactly two turns")
        if self.turns[0].role != "human" or self.turns[1].role != "gpt":
            raise ValueError("turns must be human then gpt")
        if not self.turns[0].value.startswith(IMAGE_TOKEN):
            raise ValueError("human turn must begin with the image token")
        return self

    @property
    def question(self) -> str:
        return self.turns[0].value[len(IMAGE_TOKEN):].lstrip("\n")

    @property
    def answer(self) -> str:
        return self.turns[1].value

    def to_record(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


class SkippedPair(BaseModel):
    """A pair excluded from reasoning questions."""

    image_id: str
    object_ids: Tuple[str, str]
    reason: str


class AuditFlag(BaseModel):
    """A dataset-quality warning for one scene."""

    kind: AuditKind
    image_id: str
    object_ids: List[str]
    caption: Optional[str] = None
    center_depth: Optional[float] = None
    bbox_median_depth: Optional[float] = None


class EvalItem(BaseModel):
    """One evaluation question with its hidden ground truth."""

    item_id: str
    image: str
    stage: EvalStage
    question: str
    gt_depth: Optional[float] = None
    gt_relation: Optional[RelationTruth] = None

    @model_validator(mode="after")
    def _truth_matches_stage(self) -> "EvalItem":
        has_depth = self.gt_depth is not None
        has_relation = self.gt_relation is not None
        if has_depth == has_relation:
            raise ValueError("exactly one of gt_depth / gt_relation is required")
        if has_depth and self.stage != EvalStage.PERCEPTION:
            raise ValueError("gt_depth requires the perception stage")
        if has_relation and self.stage != EvalStage.PROXIMITY:
            raise ValueError("gt_relation requires the proximity stage")
        return self

    def public_record(self) -> dict:
        """The item as shipped to model runners, without labels."""
        return {
            "item_id": self.item_id,
            "image": self.image,
            "stage": self.stage.value,
            "question": self.question,
        }

    def key_record(self) -> dict:
        gt = self.gt_depth if self.gt_depth is not None else self.gt_relation.model_dump(mode="json")
        return {"item_id": self.item_id, "gt": gt}


class ModelResponse(BaseModel):
    """A raw answer produced by a model for one item."""

    item_id: str
    text: str


__all__ = [
    "AuditFlag",
    "BBox",
    "CaptionType",
    "Conversation",
    "ConversationMeta",
    "DepthLabel",
    "EvalItem",
    "GroundTruth",
    "ModelResponse",
    "PerceptionTruth",
    "Point",
    "RejectEntry",
    "RelationTruth",
    "SceneObject",
    "SceneRecord",
    "SkippedPair",
    "Turn",
    "quantize_depth",
]
