"""
Dataset statistics: stage counts, question/answer word counts, depth label
histogram and relation distribution.

Everything is kept as integer sums so partial results from shards merge
exactly.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, Field

from .constants import HISTOGRAM_BUCKETS, IMAGE_TOKEN, EvalStage, ProximityRelation, Stage
from .models import Conversation, DepthLabel, EvalItem, PerceptionTruth, RelationTruth

WORD_RULE = "whitespace-separated tokens, punctuation attached, image placeholder excluded"
BUCKET_RULE = "ten buckets [k/10, (k+1)/10), the last closed at 1.00"

CONVERSATION_STAGES = tuple(stage.value for stage in Stage)
EVAL_STAGES = tuple(stage.value for stage in EvalStage)


def count_words(text: str) -> int:
    return sum(1 for token in text.split() if token != IMAGE_TOKEN)


def bucket_of(value: float) -> int:
    return min(DepthLabel.from_raw(value).cents // 10, HISTOGRAM_BUCKETS - 1)


def bucket_labels() -> List[str]:
    labels = [f"[{k / 10:.1f}, {(k + 1) / 10:.1f})" for k in range(HISTOGRAM_BUCKETS)]
    labels[-1] = labels[-1][:-1] + "]"
    return labels


class StatsReport(BaseModel):
    pair_counts: Dict[str, int]
    total: int = Field(ge=0)
    mean_question_words: Optional[float] = None
    mean_answer_words: Optional[float] = None
    mean_question_words_by_stage: Dict[str, Optional[float]] = Field(default_factory=dict)
    mean_answer_words_by_stage: Dict[str, Optional[float]] = Field(default_factory=dict)
    depth_label_count: int = 0
    depth_histogram: Optional[List[float]] = None
    relation_count: int = 0
    relation_distribution: Optional[Dict[str, float]] = None
    meta: Dict[str, str] = Field(default_factory=lambda: {"word_rule": WORD_RULE, "bucket_rule": BUCKET_RULE})


def _mean(total: int, count: int) -> Optional[float]:
    return total / count if count else None


@dataclass
class StatsAccumulator:
    """Single-pass, mergeable statistics state."""

    stages: Sequence[str] = CONVERSATION_STAGES
    stage_counts: Counter = field(default_factory=Counter)
    question_words: Counter = field(default_factory=Counter)
    answer_words: Counter = field(default_factory=Counter)
    answer_counts: Counter = field(default_factory=Counter)
    histogram: List[int] = field(default_factory=lambda: [0] * HISTOGRAM_BUCKETS)
    relations: Counter = field(default_factory=Counter)

    def _add_truth(self, truth: Union[PerceptionTruth, RelationTruth, float]) -> None:
        if isinstance(truth, RelationTruth):
            self.relations[truth.relation.value] += 1
        elif isinstance(truth, PerceptionTruth):
            self.histogram[bucket_of(truth.depth)] += 1
        else:
            self.histogram[bucket_of(truth)] += 1

    def add_conversation(self, conversation: Conversation) -> None:
        stage = conversation.stage.value
        self.stage_counts[stage] += 1
        self.question_words[stage] += count_words(conversation.question)
        self.answer_words[stage] += count_words(conversation.answer)
        self.answer_counts[stage] += 1
        self._add_truth(conversation.meta.ground_truth)

    def add_eval_item(self, item: EvalItem) -> None:
        stage = item.stage.value
        self.stage_counts[stage] += 1
        self.question_words[stage] += count_words(item.question)
        self._add_truth(item.gt_depth if item.gt_relation is None else item.gt_relation)

    def add(self, record: Union[Conversation, EvalItem]) -> None:
        if isinstance(record, Conversation):
            self.add_conversation(record)
        else:
            self.add_eval_item(record)

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        return StatsAccumulator(
            stages=self.stages,
            stage_counts=self.stage_counts + other.stage_counts,
            question_words=self.question_words + other.question_words,
            answer_words=self.answer_words + other.answer_words,
            answer_counts=self.answer_counts + other.answer_counts,
            histogram=[a + b for a, b in zip(self.histogram, other.histogram)],
            relations=self.relations + other.relations,
        )

    def finalize(self) -> StatsReport:
        stages = list(self.stages) + sorted(set(self.stage_counts) - set(self.stages))
        total = sum(self.stage_counts.values())
        labels = sum(self.histogram)
        relation_total = sum(self.relations.values())
        return StatsReport(
            pair_counts={stage: self.stage_counts.get(stage, 0) for stage in stages},
            total=total,
            mean_question_words=_mean(sum(self.question_words.values()), total),
            mean_answer_words=_mean(sum(self.answer_words.values()), sum(self.answer_counts.values())),
            mean_question_words_by_stage={
                stage: _mean(self.question_words.get(stage, 0), self.stage_counts.get(stage, 0))
                for stage in stages
            },
            mean_answer_words_by_stage={
                stage: _mean(self.answer_words.get(stage, 0), self.answer_counts.get(stage, 0))
                for stage in stages
            },
            depth_label_count=labels,
            depth_histogram=[count / labels for count in self.histogram] if labels else None,
            relation_count=relation_total,
            relation_distribution=(
                {r.value: self.relations.get(r.value, 0) / relation_total for r in ProximityRelation}
                if relation_total
                else None
            ),
        )


def compute_stats(
    dataset: Iterable[Union[Conversation, EvalItem]], stages: Sequence[str] = CONVERSATION_STAGES
) -> StatsReport:
    """Statistics over a stream of conversations or evaluation items."""
    acc = StatsAccumulator(stages=stages)
    for record in dataset:
        acc.add(record)
    return acc.finalize()


def histogram_table(report: StatsReport, width: int = 40) -> str:
    """Flat text rendering of the depth histogram for terminals."""
    if report.depth_histogram is None:
        return "no depth labels"
    frame = pd.DataFrame({"bucket": bucket_labels(), "fraction": report.depth_histogram})
    frame["bar"] = frame["fraction"].map(lambda f: "#" * int(round(f * width)))
    return frame.to_string(index=False, formatters={"fraction": "{:.4f}".format})
