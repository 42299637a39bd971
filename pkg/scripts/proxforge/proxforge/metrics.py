"""
Evaluation metrics for perception (depth value) and proximity (which is
closer) answers.

Accumulators keep per-item terms and integer counts, and sums are taken
with math.fsum at finalization, so merging shards in any order gives the
same report as a single pass.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, Field

from .constants import DELTA_BASE, VALUE_FLOOR, EvalStage, InvalidReason, ProximityRelation
from .errors import InvalidEvalSetError
from .logging_config import get_logger
from .models import EvalItem, ModelResponse
from .parsing import (
    PerceptionAnswer,
    ProximityAnswer,
    parse_perception_response,
    parse_proximity_response,
)

logger = get_logger(__name__)

SqRelDenominator = Literal["pred", "gt"]


class PerceptionMetrics(BaseModel):
    n_total: int = Field(ge=0)
    n_valid: int = Field(ge=0)
    valid_answer_ratio: float
    mse: Optional[float] = None
    rmse: Optional[float] = None
    sq_rel: Optional[float] = None
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    delta3: Optional[float] = None
    sqrel_denominator: SqRelDenominator = "pred"
    invalid_reasons: Dict[str, int] = Field(default_factory=dict)


class ProximityMetrics(BaseModel):
    n_total: int = Field(ge=0)
    n_valid: int = Field(ge=0)
    n_correct: int = Field(ge=0)
    valid_answer_ratio: float
    accuracy: float
    invalid_reasons: Dict[str, int] = Field(default_factory=dict)


class MetricsReport(BaseModel):
    """Scoring output; field names follow the published result tables."""

    meta: Dict[str, Any] = Field(default_factory=dict)
    perception: Optional[PerceptionMetrics] = None
    proximity: Optional[ProximityMetrics] = None


def _reason_counts(counter: Counter) -> Dict[str, int]:
    return {reason.value: counter.get(reason.value, 0) for reason in InvalidReason if counter.get(reason.value)}


@dataclass
class PerceptionAccumulator:
    """Mergeable running state for perception scoring."""

    n_total: int = 0
    pairs: List[Tuple[float, float]] = field(default_factory=list)
    invalid: Counter = field(default_factory=Counter)

    def add(self, answer: Optional[PerceptionAnswer], gt: float) -> None:
        self.n_total += 1
        if answer is None:
            self.invalid[InvalidReason.MISSING.value] += 1
        elif not answer.valid:
            self.invalid[answer.reason.value] += 1
        else:
            self.pairs.append((answer.value, gt))

    def merge(self, other: "PerceptionAccumulator") -> "PerceptionAccumulator":
        return PerceptionAccumulator(
            n_total=self.n_total + other.n_total,
            pairs=self.pairs + other.pairs,
            invalid=self.invalid + other.invalid,
        )

    def finalize(self, sqrel_denominator: SqRelDenominator = "pred") -> PerceptionMetrics:
        if self.n_total == 0:
            raise InvalidEvalSetError("no perception items to score")
        n_valid = len(self.pairs)
        report = PerceptionMetrics(
            n_total=self.n_total,
            n_valid=n_valid,
            valid_answer_ratio=n_valid / self.n_total,
            sqrel_denominator=sqrel_denominator,
            invalid_reasons=_reason_counts(self.invalid),
        )
        if n_valid == 0:
            return report

        squared = [(pred - gt) ** 2 for pred, gt in self.pairs]
        if sqrel_denominator == "pred":
            sq_rel_terms = [sq / max(pred, VALUE_FLOOR) for sq, (pred, _) in zip(squared, self.pairs)]
        else:
            sq_rel_terms = [sq / max(gt, VALUE_FLOOR) for sq, (_, gt) in zip(squared, self.pairs)]

        hits = [0, 0, 0]
        for pred, gt in self.pairs:
            p, g = max(pred, VALUE_FLOOR), max(gt, VALUE_FLOOR)
            ratio = max(p / g, g / p)
            for k in range(3):
                if ratio < DELTA_BASE ** (k + 1):
                    hits[k] += 1

        mse = math.fsum(squared) / n_valid
        return report.model_copy(
            update={
                "mse": mse,
                "rmse": math.sqrt(mse),
                "sq_rel": math.fsum(sq_rel_terms) / n_valid,
                "delta1": hits[0] / n_valid,
                "delta2": hits[1] / n_valid,
                "delta3": hits[2] / n_valid,
            }
        )


@dataclass
class ProximityAccumulator:
    """Mergeable running state for proximity scoring."""

    n_total: int = 0
    n_valid: int = 0
    n_correct: int = 0
    invalid: Counter = field(default_factory=Counter)

    def add(self, answer: Optional[ProximityAnswer], gt: ProximityRelation) -> None:
        self.n_total += 1
        if answer is None:
            self.invalid[InvalidReason.MISSING.value] += 1
            return
        if not answer.valid:
            self.invalid[answer.reason.value] += 1
            return
        self.n_valid += 1
        if answer.relation == gt:
            self.n_correct += 1

    def merge(self, other: "ProximityAccumulator") -> "ProximityAccumulator":
        return ProximityAccumulator(
            n_total=self.n_total + other.n_total,
            n_valid=self.n_valid + other.n_valid,
            n_correct=self.n_correct + other.n_correct,
            invalid=self.invalid + other.invalid,
        )

    def finalize(self) -> ProximityMetrics:
        if self.n_total == 0:
            raise InvalidEvalSetError("no proximity items to score")
        return ProximityMetrics(
            n_total=self.n_total,
            n_valid=self.n_valid,
            n_correct=self.n_correct,
            valid_answer_ratio=self.n_valid / self.n_total,
            accuracy=self.n_correct / self.n_total,
            invalid_reasons=_reason_counts(self.invalid),
        )


def compute_perception_metrics(
    pairs: Iterable[Tuple[Optional[PerceptionAnswer], float]],
    sqrel_denominator: SqRelDenominator = "pred",
) -> PerceptionMetrics:
    """Metrics over (parsed prediction, ground truth) pairs; None means no response."""
    acc = PerceptionAccumulator()
    for answer, gt in pairs:
        acc.add(answer, gt)
    return acc.finalize(sqrel_denominator)


def join_responses(items: Sequence[EvalItem], responses: Iterable[ModelResponse]) -> List[Optional[str]]:
    """Response text per item, in item order; None where no response exists.

    Duplicate responses for an item keep the last one.
    """
    item_frame = pd.DataFrame({"item_id": [item.item_id for item in items]})
    if item_frame["item_id"].duplicated().any():
        raise InvalidEvalSetError("evaluation set repeats item ids")
    response_frame = pd.DataFrame([r.model_dump() for r in responses], columns=["item_id", "text"])
    duplicated = response_frame["item_id"].duplicated(keep="last")
    if duplicated.any():
        logger.warning(f"⚠️  {int(duplicated.sum())} duplicate response(s); keeping the last per item")
    response_frame = response_frame.drop_duplicates("item_id", keep="last")
    unknown = ~response_frame["item_id"].isin(item_frame["item_id"])
    if unknown.any():
        logger.warning(f"⚠️  {int(unknown.sum())} response(s) name items outside the evaluation set")
    joined = item_frame.merge(response_frame, on="item_id", how="left", validate="one_to_one")
    return [None if pd.isna(text) else str(text) for text in joined["text"]]


def compute_proximity_metrics(items: Sequence[EvalItem], responses: Iterable[ModelResponse]) -> ProximityMetrics:
    """Accuracy over all proximity items; missing and invalid answers count as wrong."""
    proximity = [item for item in items if item.stage == EvalStage.PROXIMITY]
    if not proximity:
        raise InvalidEvalSetError("no proximity items to score")
    acc = ProximityAccumulator()
    for item, text in zip(proximity, join_responses(proximity, responses)):
        truth = item.gt_relation
        answer = None if text is None else parse_proximity_response(text, *truth.captions)
        acc.add(answer, truth.relation)
    return acc.finalize()


def score(
    items: Sequence[EvalItem],
    responses: Iterable[ModelResponse],
    sqrel_denominator: SqRelDenominator = "pred",
) -> MetricsReport:
    """Score every item of an evaluation set; stages without items are left null."""
    if not items:
        raise InvalidEvalSetError("evaluation set has no items")
    texts = join_responses(items, responses)
    perception, proximity = PerceptionAccumulator(), ProximityAccumulator()
    for item, text in zip(items, texts):
        if item.stage == EvalStage.PERCEPTION:
            perception.add(None if text is None else parse_perception_response(text), item.gt_depth)
        else:
            truth = item.gt_relation
            proximity.add(
                None if text is None else parse_proximity_response(text, *truth.captions), truth.relation
            )
    return MetricsReport(
        meta={
            "sqrel_denominator": sqrel_denominator,
            "value_floor": VALUE_FLOOR,
            "accuracy_denominator": "all_items",
            "delta_rule": "values floored at value_floor before the ratio",
        },
        perception=perception.finalize(sqrel_denominator) if perception.n_total else None,
        proximity=proximity.finalize() if proximity.n_total else None,
    )
