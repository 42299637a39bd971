"""
Depth labeling: read depth/disparity maps, invert, normalize per image and
sample object labels at bounding-box centers.
"""

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .constants import (
    DEFAULT_EPSILON,
    DEPTH_FILE_SUFFIXES,
    RAWF32_FLAG_DEPTH,
    RAWF32_MAGIC,
    DepthFormat,
    MapKind,
)
from .errors import DegenerateMapError, DepthFormatError, OutOfBoundsError
from .logging_config import get_logger
from .models import BBox, DepthLabel, Point, SceneRecord

logger = get_logger(__name__)

_RAW_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel disparity, row-major with top-left origin. Larger = closer."""

    values: np.ndarray

    def __post_init__(self):
        _check_grid(self.values)
        negative = np.argwhere(self.values < 0)
        if negative.size:
            y, x = negative[0]
            raise DepthFormatError("negative disparity", pixel=(int(x), int(y)))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth. When normalized, 0 is the closest point and 1 the farthest."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        _check_grid(self.values)

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


DepthGrid = Union[DisparityMap, DepthMap]


def _check_grid(values: np.ndarray) -> None:
    if values.ndim != 2 or values.size == 0:
        raise DepthFormatError(f"expected a non-empty 2-D grid, got shape {values.shape}")
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        y, x = bad[0]
        raise DepthFormatError("non-finite value", pixel=(int(x), int(y)))


def read_depth_file(
    data: bytes, format: Union[DepthFormat, str], kind: Optional[MapKind] = None
) -> DepthGrid:
    """Decode a depth/disparity file.

    PFM and png16 hold disparity unless ``kind`` says otherwise; rawf32
    declares its kind in the header flags.
    """
    fmt = DepthFormat(format)
    if fmt == DepthFormat.PFM:
        grid, default_kind = _decode_pfm(data), MapKind.DISPARITY
    elif fmt == DepthFormat.PNG16:
        grid, default_kind = _decode_png16(data), MapKind.DISPARITY
    else:
        grid, default_kind = _decode_rawf32(data)
    if (kind or default_kind) == MapKind.DEPTH:
        return DepthMap(values=grid)
    return DisparityMap(values=grid)


def read_depth_path(path: Union[str, Path], kind: Optional[MapKind] = None) -> DepthGrid:
    path = Path(path)
    return read_depth_file(path.read_bytes(), depth_format_for(path), kind)


def depth_format_for(path: Union[str, Path]) -> DepthFormat:
    suffix = Path(path).suffix.lower()
    for known, fmt in DEPTH_FILE_SUFFIXES:
        if suffix == known:
            return fmt
    raise DepthFormatError(f"unknown depth file extension {suffix!r} for {path}")


def find_depth_file(depth_dir: Union[str, Path], image_id: str) -> Optional[Path]:
    """Locate <image_id>.pfm / .png / .rawf32 in that order."""
    for suffix, _ in DEPTH_FILE_SUFFIXES:
        candidate = Path(depth_dir) / f"{image_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def _decode_pfm(data: bytes) -> np.ndarray:
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DepthFormatError("truncated PFM header", offset=pos)
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the scale from the payload
    pos += 1

    if tokens[0] == b"PF":
        raise DepthFormatError("colour PFM is not supported, expected single-channel 'Pf'", offset=0)
    if tokens[0] != b"Pf":
        raise DepthFormatError(f"bad PFM magic {tokens[0]!r}", offset=0)
    try:
        width, height = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError:
        raise DepthFormatError("unreadable PFM size or scale", offset=2)
    if width <= 0 or height <= 0 or scale == 0 or not math.isfinite(scale):
        raise DepthFormatError(f"invalid PFM header {width}x{height} scale {scale}", offset=2)

    expected = width * height * 4
    payload = data[pos:]
    if len(payload) != expected:
        raise DepthFormatError(
            f"PFM payload holds {len(payload)} bytes, expected {expected}",
            offset=pos + min(len(payload), expected),
        )
    dtype = "<f4" if scale < 0 else ">f4"
    grid = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return np.flipud(grid).astype(np.float64)


def _decode_png16(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            if img.format != "PNG":
                raise DepthFormatError(f"expected PNG data, found {img.format}", offset=0)
            if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
                raise DepthFormatError(f"expected 16-bit grayscale PNG, found mode {img.mode}", offset=0)
            raw = np.array(img)
    except (UnidentifiedImageError, OSError) as e:
        raise DepthFormatError(f"unreadable PNG: {e}", offset=0)
    out_of_range = np.argwhere((raw < 0) | (raw > 65535))
    if out_of_range.size:
        y, x = out_of_range[0]
        raise DepthFormatError("value outside the 16-bit range", pixel=(int(x), int(y)))
    return raw.astype(np.float64) / 65535.0


def _decode_rawf32(data: bytes) -> Tuple[np.ndarray, MapKind]:
    if len(data) < _RAW_HEADER.size:
        raise DepthFormatError("truncated rawf32 header", offset=len(data))
    magic, width, height, flags = _RAW_HEADER.unpack_from(data, 0)
    if magic != RAWF32_MAGIC:
        raise DepthFormatError(f"bad rawf32 magic {magic!r}", offset=0)
    if width == 0 or height == 0:
        raise DepthFormatError(f"invalid rawf32 size {width}x{height}", offset=4)
    expected = width * height * 4
    payload = len(data) - _RAW_HEADER.size
    if payload != expected:
        raise DepthFormatError(
            f"rawf32 payload holds {payload} bytes, expected {expected}",
            offset=_RAW_HEADER.size + min(payload, expected),
        )
    grid = np.frombuffer(data, dtype="<f4", count=width * height, offset=_RAW_HEADER.size)
    kind = MapKind.DEPTH if flags & RAWF32_FLAG_DEPTH else MapKind.DISPARITY
    return grid.reshape(height, width).astype(np.float64), kind


def write_depth_file(grid: DepthGrid, format: Union[DepthFormat, str]) -> bytes:
    """Encode a map in one of the supported formats."""
    fmt = DepthFormat(format)
    values = grid.values
    height, width = values.shape
    if fmt == DepthFormat.PFM:
        header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
        return header + np.flipud(values).astype("<f4").tobytes()
    if fmt == DepthFormat.PNG16:
        if values.min() < 0 or values.max() > 1:
            raise DepthFormatError("png16 stores values in [0, 1] only")
        raw = np.round(values * 65535.0).astype(np.uint16)
        buffer = io.BytesIO()
        Image.fromarray(raw).save(buffer, format="PNG")
        return buffer.getvalue()
    flags = RAWF32_FLAG_DEPTH if isinstance(grid, DepthMap) else 0
    return _RAW_HEADER.pack(RAWF32_MAGIC, width, height, flags) + values.astype("<f4").tobytes()


def disparity_to_depth(disparity: DisparityMap, epsilon: float = DEFAULT_EPSILON) -> DepthMap:
    """depth = 1 / (disparity + epsilon), elementwise; not yet normalized."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return DepthMap(values=1.0 / (disparity.values + epsilon), normalized=False)


def normalize_depth(depth: DepthMap) -> DepthMap:
    """Per-image min-max normalization to [0, 1]."""
    vmin, vmax = float(depth.values.min()), float(depth.values.max())
    if vmax == vmin:
        raise DegenerateMapError(f"flat depth map (all values {vmin}) cannot rank proximity")
    return DepthMap(values=(depth.values - vmin) / (vmax - vmin), normalized=True)


def load_normalized_depth(
    path: Union[str, Path], epsilon: float = DEFAULT_EPSILON, kind: Optional[MapKind] = None
) -> DepthMap:
    """Read a map file and bring it to normalized depth."""
    grid = read_depth_path(path, kind)
    if isinstance(grid, DisparityMap):
        grid = disparity_to_depth(grid, epsilon)
    return normalize_depth(grid)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _pixel_index(depth: DepthMap, center: Point) -> Tuple[int, int]:
    cx, cy = center
    if not (-1.0 <= cx <= depth.width + 1.0 and -1.0 <= cy <= depth.height + 1.0):
        raise OutOfBoundsError(f"center ({cx}, {cy}) lies outside the {depth.width}x{depth.height} map")
    px = min(max(round_half_up(cx), 0), depth.width - 1)
    py = min(max(round_half_up(cy), 0), depth.height - 1)
    return px, py


def pixel_value(depth: DepthMap, center: Point) -> float:
    """Raw map value at the pixel nearest to ``center``."""
    px, py = _pixel_index(depth, center)
    return float(depth.values[py, px])


def sample_object_depth(depth: DepthMap, center: Point, window: int = 1) -> DepthLabel:
    """Depth label at ``center``: single pixel, or median of a k x k window."""
    if not depth.normalized:
        raise ValueError("sample_object_depth needs a normalized depth map")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 1, got {window}")
    px, py = _pixel_index(depth, center)
    if window == 1:
        return DepthLabel.from_raw(float(depth.values[py, px]))
    half = window // 2
    patch = depth.values[max(0, py - half):py + half + 1, max(0, px - half):px + half + 1]
    return DepthLabel.from_raw(float(np.median(patch)))


def bbox_median_depth(depth: DepthMap, bbox: BBox) -> float:
    """Median map value over the pixels covered by ``bbox`` (map coordinates)."""
    x, y, w, h = bbox
    x0 = min(max(int(math.floor(x)), 0), depth.width - 1)
    y0 = min(max(int(math.floor(y)), 0), depth.height - 1)
    x1 = max(min(int(math.ceil(x + w)), depth.width), x0 + 1)
    y1 = max(min(int(math.ceil(y + h)), depth.height), y0 + 1)
    return float(np.median(depth.values[y0:y1, x0:x1]))


def map_scale(record: SceneRecord, depth: DepthMap) -> Tuple[float, float]:
    """Factors taking image coordinates to map coordinates."""
    return depth.width / record.width, depth.height / record.height


def label_scene(record: SceneRecord, depth: DepthMap, window: int = 1) -> Tuple[SceneRecord, List[str]]:
    """Assign a depth label to every object whose center falls on the map.

    Returns the labeled copy of the record and one message per object
    that could not be labeled.
    """
    sx, sy = map_scale(record, depth)
    if (sx, sy) != (1.0, 1.0):
        logger.debug(f"Rescaling centers of {record.image_id} by ({sx:.4f}, {sy:.4f}) to the depth map")
    objects, problems = [], []
    for obj in record.objects:
        center = (obj.center[0] * sx, obj.center[1] * sy)
        try:
            label = sample_object_depth(depth, center, window)
        except OutOfBoundsError as e:
            problems.append(f"{obj.object_id}: {e}")
            objects.append(obj.model_copy(update={"depth_label": None}))
            continue
        objects.append(obj.model_copy(update={"depth_label": label}))
    return record.model_copy(update={"objects": objects}), problems
