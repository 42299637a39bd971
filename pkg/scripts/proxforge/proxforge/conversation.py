"""
Conversation builder: perception and reasoning question/answer pairs for
one labeled scene, plus the scene quality audit.
"""

import hashlib
import itertools
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .captions import classify_caption, is_reserved_phrase, normalize_caption
from .config import GenConfig
from .constants import (
    EQUALLY_CLOSE_ANSWER,
    IMAGE_TOKEN,
    AnswerMode,
    AuditKind,
    CaptionType,
    ProximityRelation,
    Stage,
)
from .depth import DepthMap, bbox_median_depth, map_scale, pixel_value
from .errors import GenerationError, OutOfBoundsError
from .logging_config import get_logger
from .models import (
    AuditFlag,
    Conversation,
    ConversationMeta,
    DepthLabel,
    PerceptionTruth,
    RelationTruth,
    SceneObject,
    SceneRecord,
    SkippedPair,
    Turn,
)
from .templates import QuestionTemplate, TemplateSet, load_templates

logger = get_logger(__name__)

PERCEPTION_TEMPLATES_PER_FAMILY = 3


@dataclass
class GenerationResult:
    """Everything produced for one scene."""

    image_id: str
    conversations: List[Conversation] = field(default_factory=list)
    skipped_pairs: List[SkippedPair] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)
    skip_reason: Optional[str] = None


def derive_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit seed for a (run seed, scene, ...) combination."""
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(seed).encode("utf-8"))
    for part in parts:
        digest.update(b"\x1f")
        digest.update(part.encode("utf-8"))
    return int.from_bytes(digest.digest(), "big")


def compare_proximity(d_s: DepthLabel, d_t: DepthLabel) -> ProximityRelation:
    """Smaller label is closer; equal 2-dp labels are equally close."""
    if d_s.cents < d_t.cents:
        return ProximityRelation.FIRST_CLOSER
    if d_s.cents > d_t.cents:
        return ProximityRelation.SECOND_CLOSER
    return ProximityRelation.EQUALLY_CLOSE


def reasoned_answer(c1: str, d1: DepthLabel, c2: str, d2: DepthLabel) -> str:
    relation = compare_proximity(d1, d2)
    opening = (
        f"'{c1}' corresponds to a relative depth value of {d1.text}, "
        f"and '{c2}' corresponds to a relative depth value of {d2.text}. "
    )
    if relation == ProximityRelation.EQUALLY_CLOSE:
        return (
            opening + f"Since {d1.text} = {d2.text}, it can be inferred that they are equally close, "
            f"the answer is: '{EQUALLY_CLOSE_ANSWER}'."
        )
    small, big = sorted((d1, d2), key=lambda d: d.cents)
    winner = c1 if relation == ProximityRelation.FIRST_CLOSER else c2
    return (
        opening + f"Since {small.text} < {big.text}, it can be inferred that the object: '{winner}' is closer, "
        f"the answer is: '{winner}'."
    )


def short_answer(c1: str, d1: DepthLabel, c2: str, d2: DepthLabel) -> str:
    relation = compare_proximity(d1, d2)
    if relation == ProximityRelation.FIRST_CLOSER:
        return c1
    if relation == ProximityRelation.SECOND_CLOSER:
        return c2
    return EQUALLY_CLOSE_ANSWER


def _conversation(
    conversation_id: str,
    image: str,
    stage: Stage,
    question: str,
    answer: str,
    meta: ConversationMeta,
) -> Conversation:
    turns = [
        Turn(role="human", value=f"{IMAGE_TOKEN}\n{question}"),
        Turn(role="gpt", value=answer),
    ]
    return Conversation(id=conversation_id, image=image, stage=stage, turns=turns, meta=meta)


def render_perception_qa(
    template: QuestionTemplate,
    obj: SceneObject,
    *,
    conversation_id: str,
    image: str,
    seed_trace: int = 0,
) -> Conversation:
    """Question about one object's depth; the answer is the bare 2-dp label."""
    if obj.depth_label is None:
        raise GenerationError(f"object {obj.object_id!r} has no depth label")
    if template.stage != Stage.PERCEPTION:
        raise GenerationError(f"template {template.template_id} is not a perception template")
    truth = PerceptionTruth(caption=obj.caption, depth=obj.depth_label.value)
    meta = ConversationMeta(template_id=template.template_id, ground_truth=truth, seed_trace=seed_trace)
    return _conversation(
        conversation_id, image, Stage.PERCEPTION, template.render(obj.caption), obj.depth_label.text, meta
    )


def render_reasoning_qa(
    template: QuestionTemplate,
    o1: SceneObject,
    o2: SceneObject,
    *,
    conversation_id: str,
    image: str,
    seed_trace: int = 0,
) -> Conversation:
    """Which-is-closer question about an ordered pair.

    Direct templates are answered with the closer caption (or "equally
    close"); reasoned templates state both labels and the comparison first.
    """
    if o1.depth_label is None or o2.depth_label is None:
        raise GenerationError(f"pair ({o1.object_id!r}, {o2.object_id!r}) is missing a depth label")
    if template.stage != Stage.REASONING:
        raise GenerationError(f"template {template.template_id} is not a reasoning template")
    if normalize_caption(o1.caption) == normalize_caption(o2.caption):
        raise GenerationError(f"pair ({o1.object_id!r}, {o2.object_id!r}) shares a caption")
    d1, d2 = o1.depth_label, o2.depth_label
    if template.answer_mode == AnswerMode.REASONED:
        answer = reasoned_answer(o1.caption, d1, o2.caption, d2)
    else:
        answer = short_answer(o1.caption, d1, o2.caption, d2)
    truth = RelationTruth(
        relation=compare_proximity(d1, d2),
        captions=(o1.caption, o2.caption),
        depths=(d1.value, d2.value),
        answer=short_answer(o1.caption, d1, o2.caption, d2),
    )
    meta = ConversationMeta(template_id=template.template_id, ground_truth=truth, seed_trace=seed_trace)
    return _conversation(
        conversation_id, image, Stage.REASONING, template.render(o1.caption, o2.caption), answer, meta
    )


def _pair_skip_reason(o1: SceneObject, o2: SceneObject) -> Optional[str]:
    n1, n2 = normalize_caption(o1.caption), normalize_caption(o2.caption)
    if not n1 or not n2:
        return "empty_caption"
    if is_reserved_phrase(o1.caption) or is_reserved_phrase(o2.caption):
        return "reserved_phrase"
    if n1 == n2:
        return "duplicate_caption"
    return None


def _caption_family(*captions: str) -> CaptionType:
    if any(classify_caption(c).kind == CaptionType.REGION for c in captions):
        return CaptionType.REGION
    return CaptionType.OBJECT


def build_conversations(
    record: SceneRecord,
    config: GenConfig,
    seed: Optional[int] = None,
    templates: Optional[TemplateSet] = None,
) -> GenerationResult:
    """All conversations for one labeled scene, deterministic in (record, config, seed)."""
    templates = templates or load_templates()
    run_seed = config.seed if seed is None else seed
    scene_seed = derive_seed(run_seed, record.image_id)
    rng = random.Random(scene_seed)
    result = GenerationResult(image_id=record.image_id)

    labeled = record.labeled_objects()
    if not labeled:
        result.skip_reason = "no_labeled_objects"
        return result

    cap = len(record.objects) if config.perception_cap is None else config.perception_cap
    offset = rng.randrange(PERCEPTION_TEMPLATES_PER_FAMILY)
    produced = 0
    for obj in record.objects:
        if produced >= cap:
            break
        family = _caption_family(obj.caption)
        group = templates.group(Stage.PERCEPTION, AnswerMode.DIRECT, family)
        template = group[(offset + produced) % len(group)]
        try:
            conversation = render_perception_qa(
                template,
                obj,
                conversation_id=f"{record.image_id}-p{produced}",
                image=record.image_path,
                seed_trace=scene_seed,
            )
        except GenerationError as e:
            result.problems.append(str(e))
            continue
        result.conversations.append(conversation)
        produced += 1

    eligible: List[Tuple[SceneObject, SceneObject]] = []
    for o1, o2 in itertools.combinations(labeled, 2):
        reason = _pair_skip_reason(o1, o2)
        if reason:
            result.skipped_pairs.append(
                SkippedPair(image_id=record.image_id, object_ids=(o1.object_id, o2.object_id), reason=reason)
            )
            continue
        eligible.append((o1, o2))
    rng.shuffle(eligible)

    for i, (o1, o2) in enumerate(eligible[: config.max_pairs_per_image]):
        if rng.random() < 0.5:
            o1, o2 = o2, o1
        mode = AnswerMode.DIRECT if rng.random() < config.direct_fraction else AnswerMode.REASONED
        template = rng.choice(templates.group(Stage.REASONING, mode, _caption_family(o1.caption, o2.caption)))
        result.conversations.append(
            render_reasoning_qa(
                template,
                o1,
                o2,
                conversation_id=f"{record.image_id}-r{i}",
                image=record.image_path,
                seed_trace=scene_seed,
            )
        )

    if result.skipped_pairs:
        logger.debug(f"{record.image_id}: {len(result.skipped_pairs)} pair(s) skipped")
    return result


def audit_scene(record: SceneRecord, depth: DepthMap, threshold: float) -> List[AuditFlag]:
    """Center-offset and duplicate-caption flags for one scene."""
    flags: List[AuditFlag] = []
    sx, sy = map_scale(record, depth)
    for obj in record.objects:
        x, y, w, h = obj.bbox
        try:
            center_depth = pixel_value(depth, (obj.center[0] * sx, obj.center[1] * sy))
        except OutOfBoundsError:
            continue
        median = bbox_median_depth(depth, (x * sx, y * sy, w * sx, h * sy))
        if abs(center_depth - median) > threshold:
            flags.append(
                AuditFlag(
                    kind=AuditKind.CENTER_OFFSET,
                    image_id=record.image_id,
                    object_ids=[obj.object_id],
                    caption=obj.caption,
                    center_depth=round(center_depth, 6),
                    bbox_median_depth=round(median, 6),
                )
            )

    by_caption: Dict[str, List[SceneObject]] = OrderedDict()
    for obj in record.objects:
        key = normalize_caption(obj.caption)
        if key:
            by_caption.setdefault(key, []).append(obj)
    for members in by_caption.values():
        if len(members) >= 2:
            flags.append(
                AuditFlag(
                    kind=AuditKind.DUPLICATE_CAPTION,
                    image_id=record.image_id,
                    object_ids=[obj.object_id for obj in members],
                    caption=members[0].caption,
                )
            )
    return flags
