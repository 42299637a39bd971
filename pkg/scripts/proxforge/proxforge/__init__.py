"""
proxforge: proximity VQA dataset generation and evaluation.
"""
from .config import GenConfig, load_config
from .conversation import build_conversations, compare_proximity
from .ingest import parse_annotations, parse_annotations_file
from .metrics import compute_perception_metrics, compute_proximity_metrics, score
from .stats import compute_stats

__version__ = "0.1.0"

__all__ = [
    "GenConfig",
    "build_conversations",
    "compare_proximity",
    "compute_perception_metrics",
    "compute_proximity_metrics",
    "compute_stats",
    "load_config",
    "parse_annotations",
    "parse_annotations_file",
    "score",
]
