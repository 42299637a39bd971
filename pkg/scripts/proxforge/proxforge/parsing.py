"""
Model response parsing.

Both parsers are total: any string yields either a usable answer or an
invalid result with a reason, never an exception.
"""

import re
from dataclasses import dataclass
from typing import Optional

from .captions import normalize_caption
from .constants import ANSWER_MARKER, EQUALLY_CLOSE_ANSWER, InvalidReason, ProximityRelation

NUMBER_PATTERN = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")


@dataclass(frozen=True)
class PerceptionAnswer:
    value: Optional[float] = None
    reason: Optional[InvalidReason] = None

    @property
    def valid(self) -> bool:
        return self.reason is None


@dataclass(frozen=True)
class ProximityAnswer:
    relation: Optional[ProximityRelation] = None
    reason: Optional[InvalidReason] = None
    phrase: str = ""

    @property
    def valid(self) -> bool:
        return self.reason is None


def parse_perception_response(text: str) -> PerceptionAnswer:
    """A response is valid iff it holds exactly one number and that number is in [0, 1]."""
    matches = []
    for match in NUMBER_PATTERN.finditer(text or ""):
        matches.append(match.group(0))
        if len(matches) > 1:
            return PerceptionAnswer(reason=InvalidReason.MULTIPLE_NUMBERS)
    if not matches:
        return PerceptionAnswer(reason=InvalidReason.NO_NUMBER)
    value = float(matches[0])
    if not 0.0 <= value <= 1.0:
        return PerceptionAnswer(reason=InvalidReason.OUT_OF_RANGE)
    return PerceptionAnswer(value=value)


def answer_phrase(text: str) -> str:
    """Text after the last "the answer is:" marker, or the whole response."""
    text = text or ""
    idx = text.lower().rfind(ANSWER_MARKER)
    if idx >= 0:
        return text[idx + len(ANSWER_MARKER):].strip()
    return text.strip()


def _contains(phrase: str, caption: str) -> bool:
    return bool(caption) and f" {caption} " in f" {phrase} "


def parse_proximity_response(text: str, caption_1: str, caption_2: str) -> ProximityAnswer:
    """Exact match of the answer phrase against the two captions or "equally close"."""
    phrase = normalize_caption(answer_phrase(text))
    first, second = normalize_caption(caption_1), normalize_caption(caption_2)
    if phrase and phrase == first:
        return ProximityAnswer(relation=ProximityRelation.FIRST_CLOSER, phrase=phrase)
    if phrase and phrase == second:
        return ProximityAnswer(relation=ProximityRelation.SECOND_CLOSER, phrase=phrase)
    if phrase == EQUALLY_CLOSE_ANSWER:
        return ProximityAnswer(relation=ProximityRelation.EQUALLY_CLOSE, phrase=phrase)
    if _contains(phrase, first) and _contains(phrase, second):
        return ProximityAnswer(reason=InvalidReason.AMBIGUOUS, phrase=phrase)
    return ProximityAnswer(reason=InvalidReason.NO_MATCH, phrase=phrase)
