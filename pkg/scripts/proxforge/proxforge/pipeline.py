"""
Per-scene processing shared by generation, conversion and audit, and the
ordered worker pool that runs it.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Optional, Tuple, TypeVar, Union

from .config import GenConfig
from .constants import MapKind
from .conversation import GenerationResult, audit_scene, build_conversations
from .depth import DepthMap, find_depth_file, label_scene, load_normalized_depth
from .errors import DegenerateMapError, DepthFormatError
from .logging_config import get_logger
from .models import AuditFlag, SceneRecord

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Records handed to each worker process at a time
CHUNK_SIZE = 16


class SceneSkipped(Exception):
    """A scene that cannot be used; ``reason`` is recorded in the skip report."""

    def __init__(self, image_id: str, reason: str):
        self.image_id = image_id
        self.reason = reason
        super().__init__(f"{image_id}: {reason}")


@dataclass
class SceneOutcome:
    """Result of processing one scene, in a picklable form."""

    image_id: str
    generation: Optional[GenerationResult] = None
    audit_flags: List[AuditFlag] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)
    skip_reason: Optional[str] = None


def adopt_map_size(record: SceneRecord, depth: DepthMap) -> SceneRecord:
    """Records whose size was inferred from the annotations take the map size."""
    if "size_inferred" not in record.warnings:
        return record
    return record.model_copy(update={"width": depth.width, "height": depth.height})


def load_scene_depth(
    record: SceneRecord, depth_dir: Union[str, Path], config: GenConfig, kind: Optional[MapKind] = None
) -> Tuple[SceneRecord, DepthMap]:
    """Find, read and normalize the map of a scene."""
    path = find_depth_file(depth_dir, record.image_id)
    if path is None:
        raise SceneSkipped(record.image_id, "missing_depth_map")
    try:
        depth = load_normalized_depth(path, config.epsilon, kind)
    except DegenerateMapError:
        raise SceneSkipped(record.image_id, "degenerate_map")
    except DepthFormatError as e:
        raise SceneSkipped(record.image_id, f"depth_format: {e}")
    return adopt_map_size(record, depth), depth


def generate_scene(
    record: SceneRecord,
    depth_dir: Union[str, Path],
    config: GenConfig,
    kind: Optional[MapKind] = None,
) -> SceneOutcome:
    """Label a scene from its map and build its conversations."""
    try:
        record, depth = load_scene_depth(record, depth_dir, config, kind)
    except SceneSkipped as e:
        return SceneOutcome(image_id=record.image_id, skip_reason=e.reason)
    labeled, problems = label_scene(record, depth, config.median_window)
    generation = build_conversations(labeled, config, config.seed)
    return SceneOutcome(
        image_id=record.image_id,
        generation=generation,
        problems=problems + generation.problems,
        skip_reason=generation.skip_reason,
    )


def audit_scene_from_dir(record: SceneRecord, depth_dir: Union[str, Path], config: GenConfig) -> SceneOutcome:
    try:
        record, depth = load_scene_depth(record, depth_dir, config)
    except SceneSkipped as e:
        return SceneOutcome(image_id=record.image_id, skip_reason=e.reason)
    return SceneOutcome(image_id=record.image_id, audit_flags=audit_scene(record, depth, config.audit_threshold))


def run_ordered(func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> Iterator[R]:
    """Apply ``func`` to every item, yielding results in input order.

    ``func`` must be picklable when ``jobs`` > 1.
    """
    if jobs <= 1:
        for item in items:
            yield func(item)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(func, items, chunksize=CHUNK_SIZE)


def generate_all(
    records: Iterable[SceneRecord],
    depth_dir: Union[str, Path],
    config: GenConfig,
    kind: Optional[MapKind] = None,
) -> Iterator[SceneOutcome]:
    worker = partial(generate_scene, depth_dir=depth_dir, config=config, kind=kind)
    return run_ordered(worker, records, config.jobs)


def audit_all(records: Iterable[SceneRecord], depth_dir: Union[str, Path], config: GenConfig) -> Iterator[SceneOutcome]:
    worker = partial(audit_scene_from_dir, depth_dir=depth_dir, config=config)
    return run_ordered(worker, records, config.jobs)
