#!/usr/bin/env python3
"""
Unit tests for proxforge.parsing.
"""

import pytest

from proxforge.constants import InvalidReason, ProximityRelation
from proxforge.parsing import answer_phrase, parse_perception_response, parse_proximity_response


class TestPerceptionParsing:
    """Test cases for parse_perception_response."""

    def test_single_number(self):
        answer = parse_perception_response("0.29")
        assert answer.valid
        assert answer.value == 0.29

    @pytest.mark.parametrize(
        "text, reason",
        [
            ("[0.68, 0.23, 0.99, 0.47]", InvalidReason.MULTIPLE_NUMBERS),
            ("10 feet", InvalidReason.OUT_OF_RANGE),
            ("(671,108),(941,378)", InvalidReason.MULTIPLE_NUMBERS),
            ("", InvalidReason.NO_NUMBER),
            ("it is quite far away", InvalidReason.NO_NUMBER),
            ("-0.2", InvalidReason.OUT_OF_RANGE),
        ],
    )
    def test_invalid_shapes(self, text, reason):
        answer = parse_perception_response(text)
        assert not answer.valid
        assert answer.value is None
        assert answer.reason == reason

    @pytest.mark.parametrize(
        "text, value",
        [
            ("The relative depth is 0.35.", 0.35),
            ("1", 1.0),
            ("0", 0.0),
            (".5", 0.5),
            ("1.00", 1.0),
        ],
    )
    def test_number_in_sentence(self, text, value):
        assert parse_perception_response(text).value == value

    def test_none_is_invalid(self):
        assert parse_perception_response(None).reason == InvalidReason.NO_NUMBER

    def test_huge_input_stops_at_second_number(self):
        text = "0.5 " + "1 " * 500_000
        assert parse_perception_response(text).reason == InvalidReason.MULTIPLE_NUMBERS

    def test_huge_input_without_numbers(self):
        assert parse_perception_response("x" * 1_000_000).reason == InvalidReason.NO_NUMBER


class TestProximityParsing:
    """Test cases for parse_proximity_response."""

    def test_reasoned_answer(self):
        text = (
            "'shelf' corresponds to a relative depth value of 0.04, and 'bicycle' corresponds to a relative "
            "depth value of 0.45. Since 0.04 < 0.45, it can be inferred that the object: 'shelf' is closer, "
            "the answer is: 'shelf'."
        )
        answer = parse_proximity_response(text, "shelf", "bicycle")
        assert answer.valid
        assert answer.relation == ProximityRelation.FIRST_CLOSER

    def test_direct_answer(self):
        assert parse_proximity_response("chair", "curtains", "chair").relation == ProximityRelation.SECOND_CLOSER

    def test_sentence_is_not_an_answer(self):
        answer = parse_proximity_response("the door is closer to the cabinet", "door", "cabinet")
        assert not answer.valid
        assert answer.reason == InvalidReason.AMBIGUOUS

    def test_unrelated_answer(self):
        answer = parse_proximity_response("the lamp", "door", "cabinet")
        assert answer.reason == InvalidReason.NO_MATCH
        assert answer.phrase == "lamp"

    @pytest.mark.parametrize("text", ["equally close", "Equally close.", "the answer is: 'equally close'."])
    def test_equally_close(self, text):
        assert parse_proximity_response(text, "rug", "lamp").relation == ProximityRelation.EQUALLY_CLOSE

    @pytest.mark.parametrize("text", ["The Chair", "a chair.", "'chair'", "“chair”"])
    def test_case_articles_and_quotes_ignored(self, text):
        assert parse_proximity_response(text, "curtains", "chair").relation == ProximityRelation.SECOND_CLOSER

    def test_nested_caption_resolved_by_exact_match(self):
        answer = parse_proximity_response("bicycle", "man riding a bicycle", "bicycle")
        assert answer.relation == ProximityRelation.SECOND_CLOSER

    def test_last_marker_wins(self):
        text = "the answer is: 'rug' ... on second thought the answer is: 'lamp'."
        assert parse_proximity_response(text, "rug", "lamp").relation == ProximityRelation.SECOND_CLOSER

    def test_empty_and_huge_inputs(self):
        assert parse_proximity_response("", "rug", "lamp").reason == InvalidReason.NO_MATCH
        assert parse_proximity_response("rug " * 250_000, "rug", "lamp").reason == InvalidReason.NO_MATCH

    def test_answer_phrase(self):
        assert answer_phrase("So The Answer Is: chair") == "chair"
        assert answer_phrase("  chair ") == "chair"
