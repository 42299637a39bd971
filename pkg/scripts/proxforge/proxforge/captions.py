"""
Caption analysis: decide whether a caption takes the "object" or the
"region" template family.
"""

import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import FrozenSet, List

from .config import sha256_hex
from .constants import ARTICLES, EQUALLY_CLOSE_ANSWER, CaptionType

LEXICON_RESOURCE = "function_words.txt"
MAX_OBJECT_TOKENS = 3
# Quotes and sentence periods around an answer phrase
_EDGE_CHARS = "'\"`‘’“”."


@dataclass(frozen=True)
class CaptionClass:
    kind: CaptionType
    token_count: int
    trigger: str


def lexicon_bytes() -> bytes:
    return resources.files("proxforge.data").joinpath(LEXICON_RESOURCE).read_bytes()


def lexicon_hash() -> str:
    return sha256_hex(lexicon_bytes())


@lru_cache(maxsize=1)
def function_words() -> FrozenSet[str]:
    words = set()
    for line in lexicon_bytes().decode("utf-8").splitlines():
        token = line.split("#", 1)[0].strip().lower()
        if token:
            words.add(token)
    return frozenset(words)


def _tokens(caption: str) -> List[str]:
    tokens = [t.strip(string.punctuation) for t in caption.lower().split()]
    return [t for t in tokens if t]


def _strip_leading_articles(tokens: List[str]) -> List[str]:
    start = 0
    while start < len(tokens) and tokens[start] in ARTICLES:
        start += 1
    return tokens[start:]


def classify_caption(caption: str) -> CaptionClass:
    """ObjectType for short subject+attribute captions, RegionType otherwise."""
    tokens = _strip_leading_articles(_tokens(caption))
    lexicon = function_words()
    for token in tokens:
        if token in lexicon:
            return CaptionClass(CaptionType.REGION, len(tokens), f"function_word:{token}")
    if len(tokens) > MAX_OBJECT_TOKENS:
        return CaptionClass(CaptionType.REGION, len(tokens), "token_count")
    return CaptionClass(CaptionType.OBJECT, len(tokens), "subject_attribute")


def normalize_caption(text: str) -> str:
    """Comparison form of a caption or answer phrase.

    Lowercased, surrounding quotes and trailing periods removed, articles
    dropped, whitespace collapsed. Used for distinctness checks and for
    matching model answers, never for generated text.
    """
    words = []
    for token in text.lower().split():
        token = token.strip(_EDGE_CHARS)
        if token and token not in ARTICLES:
            words.append(token)
    return " ".join(words)


def is_reserved_phrase(caption: str) -> bool:
    return normalize_caption(caption) == EQUALLY_CLOSE_ANSWER
