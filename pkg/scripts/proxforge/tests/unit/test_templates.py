#!/usr/bin/env python3
"""
Unit tests for proxforge.templates.
"""

import json
import re

import pytest

from proxforge.constants import AnswerMode, CaptionType, Stage
from proxforge.errors import ConfigError
from proxforge.templates import QuestionTemplate, load_templates, parse_templates, template_bytes, template_hash


class TestTemplateInventory:
    """Test cases for the shipped template file."""

    def test_exactly_42_templates(self):
        assert len(load_templates()) == 42

    @pytest.mark.parametrize(
        "stage, mode, count",
        [
            (Stage.PERCEPTION, AnswerMode.DIRECT, 3),
            (Stage.REASONING, AnswerMode.DIRECT, 9),
            (Stage.REASONING, AnswerMode.REASONED, 9),
        ],
    )
    def test_partition(self, stage, mode, count):
        templates = load_templates()
        for caption_type in CaptionType:
            assert len(templates.group(stage, mode, caption_type)) == count

    @pytest.mark.parametrize("captions", [("rug", "chair"), ("man riding a bicycle", "cup on the table")])
    def test_render_leaves_no_placeholder(self, captions):
        for template in load_templates().templates:
            text = template.render(*captions)
            assert not re.search(r"\{R\d\}", text), template.template_id
            assert captions[0] in text
            if template.stage == Stage.REASONING:
                assert captions[1] in text

    def test_region_and_object_variants_differ_only_in_prefix(self):
        templates = load_templates()
        for template in templates.templates:
            if template.caption_type != CaptionType.REGION:
                continue
            twin = templates.by_id(template.template_id.replace("-region", "-object"))
            expected = (
                template.text.replace("region: {R1}", "{R1}")
                .replace("Region1: {R1}", "'{R1}'")
                .replace("Region2: {R2}", "'{R2}'")
            )
            assert twin.text == expected

    def test_reasoned_templates_ask_for_reasoning(self):
        templates = load_templates()
        for caption_type in CaptionType:
            for template in templates.group(Stage.REASONING, AnswerMode.REASONED, caption_type):
                assert template.text.endswith("Answer the question using depth perception and reasoning.")
            for template in templates.group(Stage.REASONING, AnswerMode.DIRECT, caption_type):
                assert template.text.endswith("Answer the question using a single word or phrase.")

    def test_perception_example_wording(self):
        template = load_templates().by_id("Q1-1-region")
        assert template.render("rug") == "What's the relative depth value of region: rug in the image?"

    def test_hash_matches_file(self):
        assert template_hash() == load_templates().digest
        assert len(template_hash()) == 64


class TestTemplateValidation:
    """Test cases for rejecting broken template files."""

    def test_wrong_placeholder_count(self):
        with pytest.raises(ValueError):
            QuestionTemplate(
                template_id="bad",
                stage=Stage.REASONING,
                answer_mode=AnswerMode.DIRECT,
                caption_type=CaptionType.OBJECT,
                text="Is {R1} closer?",
            )

    def test_missing_template_detected(self):
        payload = json.loads(template_bytes())
        payload["templates"] = payload["templates"][:-1]
        with pytest.raises(ConfigError):
            parse_templates(json.dumps(payload).encode("utf-8"))

    def test_unreadable_file(self):
        with pytest.raises(ConfigError):
            parse_templates(b"{not json")
