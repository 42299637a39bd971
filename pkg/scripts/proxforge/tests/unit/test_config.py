#!/usr/bin/env python3
"""
Unit tests for proxforge.config.
"""

import json
import unittest

import pytest

from proxforge.config import GenConfig, load_config, read_config_file
from proxforge.errors import ConfigError


class TestGenConfig(unittest.TestCase):
    """Test cases for GenConfig defaults and validation."""

    def test_defaults(self):
        config = GenConfig()
        self.assertEqual(config.mode_ratio, "1:1")
        self.assertEqual(config.direct_fraction, 0.5)
        self.assertEqual(config.epsilon, 1e-6)
        self.assertEqual(config.median_window, 1)
        self.assertEqual(config.sqrel_denominator, "pred")

    def test_ratio_normalized(self):
        self.assertEqual(GenConfig(mode_ratio=" 3 : 1 ").mode_ratio, "3:1")
        self.assertEqual(GenConfig(mode_ratio="3:1").direct_fraction, 0.75)

    def test_hash_ignores_jobs(self):
        self.assertEqual(GenConfig(seed=3, jobs=1).config_hash(), GenConfig(seed=3, jobs=8).config_hash())
        self.assertNotEqual(GenConfig(seed=3).config_hash(), GenConfig(seed=4).config_hash())


class TestLoadConfig:
    """Test cases for layered configuration loading."""

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 5, "max_pairs_per_image": 3}))
        config = load_config(path, {"seed": 9, "epsilon": None})

        assert config.seed == 9
        assert config.max_pairs_per_image == 3
        assert config.epsilon == 1e-6

    def test_environment_fills_defaults(self, monkeypatch):
        monkeypatch.setenv("PROXFORGE_SEED", "42")
        assert load_config().seed == 42
        assert load_config(overrides={"seed": 1}).seed == 1

    @pytest.mark.parametrize(
        "overrides",
        [{"mode_ratio": "0:0"}, {"mode_ratio": "half"}, {"median_window": 4}, {"epsilon": 0}, {"seed": -1}],
    )
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigError):
            load_config(overrides=overrides)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "nope.json")

    def test_file_must_hold_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            read_config_file(path)

    def test_unknown_setting_rejected(self, tmp_path):
        path = tmp_path / "typo.json"
        path.write_text(json.dumps({"seed": 1, "max_pair": 2}))
        with pytest.raises(ConfigError, match="max_pair"):
            load_config(path)

    def test_no_file(self):
        assert read_config_file(None) == {}
