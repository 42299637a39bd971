#!/usr/bin/env python3
"""
Constants and enumerations shared across proxforge.
"""

from enum import Enum
from typing import FrozenSet


class AnnotationFormat(str, Enum):
    """Annotation sources accepted by the ingest step."""

    COCO_VG = "coco_vg"
    MAKE3D_MANIFEST = "make3d_manifest"


class DepthFormat(str, Enum):
    """On-disk depth/disparity map encodings."""

    PFM = "pfm"
    PNG16 = "png16"
    RAWF32 = "rawf32"


class MapKind(str, Enum):
    """What the values of a map mean."""

    DISPARITY = "disparity"
    DEPTH = "depth"


class CaptionType(str, Enum):
    """Template family selected from the caption text."""

    OBJECT = "object"
    REGION = "region"


class Stage(str, Enum):
    """Conversation stage."""

    PERCEPTION = "perception"
    REASONING = "reasoning"


class EvalStage(str, Enum):
    """Evaluation item stage."""

    PERCEPTION = "perception"
    PROXIMITY = "proximity"


class AnswerMode(str, Enum):
    """Answer scheme of a template."""

    DIRECT = "direct"
    REASONED = "reasoned"


class ProximityRelation(str, Enum):
    """Relation between the first and second object of a pair."""

    FIRST_CLOSER = "first_closer"
    SECOND_CLOSER = "second_closer"
    EQUALLY_CLOSE = "equally_close"


class AuditKind(str, Enum):
    """Dataset-quality flags raised by the scene audit."""

    CENTER_OFFSET = "center_offset"
    DUPLICATE_CAPTION = "duplicate_caption"


class InvalidReason(str, Enum):
    """Why a model response did not parse into a usable answer."""

    NO_NUMBER = "no_number"
    MULTIPLE_NUMBERS = "multiple_numbers"
    OUT_OF_RANGE = "out_of_range"
    NO_MATCH = "no_match"
    AMBIGUOUS = "ambiguous"
    MISSING = "missing"


# Depth files are looked up as <image_id><suffix> in this order
DEPTH_FILE_SUFFIXES = (
    (".pfm", DepthFormat.PFM),
    (".png", DepthFormat.PNG16),
    (".rawf32", DepthFormat.RAWF32),
)

RAWF32_MAGIC = b"PXDM"
RAWF32_FLAG_DEPTH = 0x1

IMAGE_TOKEN = "<image>"
EQUALLY_CLOSE_ANSWER = "equally close"
ANSWER_MARKER = "the answer is:"
ARTICLES: FrozenSet[str] = frozenset(["a", "an", "the"])

DEFAULT_EPSILON = 1e-6
DEFAULT_AUDIT_THRESHOLD = 0.15
VALUE_FLOOR = 1e-6
DELTA_BASE = 1.25
HISTOGRAM_BUCKETS = 10

PERCEPTION_GUIDANCE = (
    "Output this estimate as a value ranging from 0 to 1, where 0 represents "
    "the closest point to the viewer and 1 represents the farthest point."
)
PROXIMITY_GUIDANCE = "Answer the question using a single word or phrase."

FORMAT_VERSION = 1
