"""
Evaluation-set conversion and the oracle responder.

Benchmark scenes go through the same labeling and question rendering as
training data; the resulting conversations become evaluation items whose
ground truth is written to a separate answer key.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple, Union

from .config import GenConfig
from .constants import (
    EQUALLY_CLOSE_ANSWER,
    PERCEPTION_GUIDANCE,
    PROXIMITY_GUIDANCE,
    EvalStage,
    MapKind,
    ProximityRelation,
    Stage,
)
from .errors import FixtureError
from .logging_config import get_logger
from .models import Conversation, EvalItem, ModelResponse, RelationTruth, SceneRecord
from .pipeline import generate_all

logger = get_logger(__name__)

# Already carries an answer-format instruction
_INSTRUCTION_PREFIX = "Answer the question"


@dataclass
class EvalSet:
    """Converted items split by stage, plus the scenes that were skipped."""

    perception: List[EvalItem] = field(default_factory=list)
    proximity: List[EvalItem] = field(default_factory=list)
    skipped: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def items(self) -> List[EvalItem]:
        return self.perception + self.proximity


def styled_question(question: str, stage: EvalStage, style: str) -> str:
    if style != "detailed":
        return question
    if stage == EvalStage.PERCEPTION:
        return f"{question} {PERCEPTION_GUIDANCE}"
    if _INSTRUCTION_PREFIX not in question:
        return f"{question} {PROXIMITY_GUIDANCE}"
    return question


def to_eval_item(conversation: Conversation, style: str = "plain") -> EvalItem:
    truth = conversation.meta.ground_truth
    if conversation.stage == Stage.PERCEPTION:
        stage = EvalStage.PERCEPTION
        return EvalItem(
            item_id=conversation.id,
            image=conversation.image,
            stage=stage,
            question=styled_question(conversation.question, stage, style),
            gt_depth=truth.depth,
        )
    stage = EvalStage.PROXIMITY
    return EvalItem(
        item_id=conversation.id,
        image=conversation.image,
        stage=stage,
        question=styled_question(conversation.question, stage, style),
        gt_relation=truth,
    )


def _convert(
    records: Iterable[SceneRecord],
    depth_dir: Union[str, Path],
    config: GenConfig,
    kind: Union[MapKind, None],
    with_perception: bool,
) -> EvalSet:
    result = EvalSet()
    for outcome in generate_all(records, depth_dir, config, kind):
        for problem in outcome.problems:
            logger.warning(f"⚠️  {outcome.image_id}: {problem}")
        if outcome.generation is None or outcome.skip_reason:
            result.skipped.append((outcome.image_id, outcome.skip_reason or "no_output"))
            continue
        for conversation in outcome.generation.conversations:
            item = to_eval_item(conversation, config.eval_prompt_style)
            if item.stage == EvalStage.PERCEPTION:
                if with_perception:
                    result.perception.append(item)
            else:
                result.proximity.append(item)
    if result.skipped:
        logger.warning(f"⚠️  {len(result.skipped)} scene(s) skipped during conversion")
    return result


def convert_gqa(records: Iterable[SceneRecord], depth_dir: Union[str, Path], config: GenConfig) -> EvalSet:
    """Perception and proximity items for bbox-annotated scenes with disparity maps."""
    return _convert(records, depth_dir, config, None, with_perception=True)


def convert_make3d(records: Iterable[SceneRecord], depth_dir: Union[str, Path], config: GenConfig) -> EvalSet:
    """Proximity items for manually annotated centers on absolute depth maps.

    Maps are read as depth (no inversion) and normalized per image.
    """
    return _convert(records, depth_dir, config, MapKind.DEPTH, with_perception=False)


def canonical_answer(gt: Any) -> str:
    """The reference answer text for an answer-key entry."""
    if isinstance(gt, RelationTruth):
        truth = gt
    elif isinstance(gt, Mapping):
        truth = RelationTruth.model_validate(gt)
    else:
        return f"{float(gt):.2f}"
    if truth.relation == ProximityRelation.FIRST_CLOSER:
        return truth.captions[0]
    if truth.relation == ProximityRelation.SECOND_CLOSER:
        return truth.captions[1]
    return EQUALLY_CLOSE_ANSWER


def oracle_responder(items: Iterable[Mapping[str, Any]], key: Mapping[str, Any]) -> Iterator[ModelResponse]:
    """Echo the ground truth of every item in canonical answer format."""
    seen = set()
    for item in items:
        item_id = str(item["item_id"])
        if item_id not in key:
            raise FixtureError(f"item {item_id!r} has no answer-key entry")
        seen.add(item_id)
        yield ModelResponse(item_id=item_id, text=canonical_answer(key[item_id]))
    extra = set(key) - seen
    if extra:
        raise FixtureError(f"answer key holds {len(extra)} id(s) absent from the evaluation set")


def oracle_for_items(items: Sequence[EvalItem]) -> List[ModelResponse]:
    public = [item.public_record() for item in items]
    key: Dict[str, Any] = {item.item_id: item.gt_relation or item.gt_depth for item in items}
    return list(oracle_responder(public, key))
