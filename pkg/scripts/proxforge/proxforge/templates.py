"""
Question templates: loading, validation and rendering.

The template file ships with the package. Each entry is one question
wording for a (stage, answer mode, caption family) combination.
"""

import json
import re
from collections import defaultdict
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .config import sha256_hex
from .constants import AnswerMode, CaptionType, Stage
from .errors import ConfigError

TEMPLATE_RESOURCE = "templates.json"

# (stage, mode) -> number of templates per caption family
EXPECTED_LAYOUT: Dict[Tuple[Stage, AnswerMode], int] = {
    (Stage.PERCEPTION, AnswerMode.DIRECT): 3,
    (Stage.REASONING, AnswerMode.DIRECT): 9,
    (Stage.REASONING, AnswerMode.REASONED): 9,
}
EXPECTED_TOTAL = sum(EXPECTED_LAYOUT.values()) * len(CaptionType)

_PLACEHOLDER = re.compile(r"\{(R\d+)\}")


class QuestionTemplate(BaseModel):
    """One question wording with {R1}/{R2} caption placeholders."""

    model_config = ConfigDict(frozen=True)

    template_id: str
    stage: Stage
    answer_mode: AnswerMode
    caption_type: CaptionType
    text: str

    @model_validator(mode="after")
    def _placeholders_match_stage(self) -> "QuestionTemplate":
        found = sorted(_PLACEHOLDER.findall(self.text))
        expected = ["R1"] if self.stage == Stage.PERCEPTION else ["R1", "R2"]
        if found != expected:
            raise ValueError(f"{self.template_id}: placeholders {found}, expected {expected}")
        if self.stage == Stage.PERCEPTION and self.answer_mode != AnswerMode.DIRECT:
            raise ValueError(f"{self.template_id}: perception templates are direct")
        return self

    def render(self, first: str, second: str = "") -> str:
        text = self.text.replace("{R1}", first)
        if self.stage == Stage.REASONING:
            text = text.replace("{R2}", second)
        return text


class TemplateSet:
    """The validated template inventory, indexed by (stage, mode, caption family)."""

    def __init__(self, templates: List[QuestionTemplate], version: str, digest: str):
        self.templates = templates
        self.version = version
        self.digest = digest
        self._groups: Dict[Tuple[Stage, AnswerMode, CaptionType], List[QuestionTemplate]] = defaultdict(list)
        for template in templates:
            self._groups[(template.stage, template.answer_mode, template.caption_type)].append(template)
        self._check_layout()

    def _check_layout(self) -> None:
        ids = [t.template_id for t in self.templates]
        if len(set(ids)) != len(ids):
            raise ConfigError("template ids are not unique")
        if len(self.templates) != EXPECTED_TOTAL:
            raise ConfigError(f"expected {EXPECTED_TOTAL} templates, found {len(self.templates)}")
        for (stage, mode), count in EXPECTED_LAYOUT.items():
            for caption_type in CaptionType:
                found = len(self._groups[(stage, mode, caption_type)])
                if found != count:
                    raise ConfigError(
                        f"expected {count} {stage.value}/{mode.value}/{caption_type.value} templates, found {found}"
                    )

    def __len__(self) -> int:
        return len(self.templates)

    def group(self, stage: Stage, mode: AnswerMode, caption_type: CaptionType) -> List[QuestionTemplate]:
        return self._groups[(stage, mode, caption_type)]

    def by_id(self, template_id: str) -> QuestionTemplate:
        for template in self.templates:
            if template.template_id == template_id:
                return template
        raise KeyError(template_id)


def template_bytes() -> bytes:
    return resources.files("proxforge.data").joinpath(TEMPLATE_RESOURCE).read_bytes()


def parse_templates(data: bytes) -> TemplateSet:
    try:
        payload = json.loads(data.decode("utf-8"))
        templates = [QuestionTemplate(**entry) for entry in payload["templates"]]
    except (ValueError, KeyError, TypeError, ValidationError) as e:
        raise ConfigError(f"template file is invalid: {e}")
    return TemplateSet(templates, str(payload.get("version", "")), sha256_hex(data))


@lru_cache(maxsize=1)
def load_templates() -> TemplateSet:
    """The shipped template set (cached)."""
    return parse_templates(template_bytes())


def template_hash() -> str:
    return load_templates().digest
