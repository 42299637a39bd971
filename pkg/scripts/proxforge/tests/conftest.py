#!/usr/bin/env python3
"""
Shared fixtures for proxforge tests.
"""

import numpy as np
import pytest

from proxforge.config import GenConfig
from proxforge.depth import DepthMap
from proxforge.models import DepthLabel, SceneObject, SceneRecord
from tests.synthetic import write_synthetic_dataset


@pytest.fixture
def config():
    """Default configuration with a fixed seed."""
    return GenConfig(seed=7)


@pytest.fixture
def fixture_map():
    """The 2x2 normalized map from disparity [[1, 2], [4, 5]]."""
    return DepthMap(values=np.array([[1.0, 0.375], [0.0625, 0.0]]), normalized=True)


def labeled_object(object_id, caption, depth, bbox=(0.0, 0.0, 10.0, 10.0)):
    x, y, w, h = bbox
    return SceneObject(
        object_id=object_id,
        caption=caption,
        bbox=bbox,
        center=(x + w / 2, y + h / 2),
        depth_label=DepthLabel(value=depth),
    )


@pytest.fixture
def make_record():
    """Build a labeled 100x100 scene from (caption, depth) pairs."""

    def _make(*captioned_depths, image_id="scene-1"):
        objects = [
            labeled_object(f"o{k}", caption, depth, bbox=(k * 10.0, k * 10.0, 10.0, 10.0))
            for k, (caption, depth) in enumerate(captioned_depths)
        ]
        return SceneRecord(
            image_id=image_id, image_path=f"images/{image_id}.jpg", width=100, height=100, objects=objects
        )

    return _make


@pytest.fixture(scope="session")
def synthetic_100(tmp_path_factory):
    """100 synthetic scenes with PFM/rawf32 disparity maps: (scenes.json, depth dir, raw scenes)."""
    return write_synthetic_dataset(tmp_path_factory.mktemp("synthetic"), 100, seed=2024)
