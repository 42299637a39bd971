"""
Annotation ingest: COCO / Visual Genome / canonical scene JSON and Make3D
manifests into SceneRecord lists.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Iterable, List, Tuple, Union

from pydantic import ValidationError

from .constants import AnnotationFormat
from .errors import AnnotationParseError, InvalidBBoxError
from .logging_config import get_logger
from .models import BBox, Point, RejectEntry, SceneObject, SceneRecord

logger = get_logger(__name__)

Source = Union[bytes, bytearray, BinaryIO]

# Entry-level failures: the entry is rejected, parsing continues
RECORD_ERRORS = (KeyError, TypeError, ValueError, AttributeError, OverflowError, InvalidBBoxError)


@dataclass
class ParseResult:
    """Records parsed from one source plus the entries that were rejected."""

    records: List[SceneRecord] = field(default_factory=list)
    rejects: List[RejectEntry] = field(default_factory=list)

    @property
    def count_in(self) -> int:
        return len(self.records) + len(self.rejects)


def bbox_center(bbox: BBox) -> Point:
    """Center of an (x, y, w, h) box, unrounded."""
    x, y, w, h = bbox
    if w <= 0 or h <= 0:
        raise InvalidBBoxError(f"bbox {tuple(bbox)} has non-positive width or height")
    return (x + w / 2.0, y + h / 2.0)


def parse_annotations(source: Source, format: Union[AnnotationFormat, str]) -> ParseResult:
    """Parse an annotation byte stream into scene records.

    Raises AnnotationParseError for structurally malformed input. Entries
    with missing captions or unusable boxes are collected as rejects.
    """
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    fmt = AnnotationFormat(format)
    if fmt == AnnotationFormat.MAKE3D_MANIFEST:
        result = _parse_make3d_manifest(bytes(data))
    else:
        result = _parse_scene_json(bytes(data))
    if result.rejects:
        logger.warning(f"⚠️  {len(result.rejects)} of {result.count_in} entries rejected")
    return result


def parse_annotations_file(path: Union[str, Path], format: Union[AnnotationFormat, str]) -> ParseResult:
    with open(path, "rb") as f:
        return parse_annotations(f, format)


def scene_to_canonical(record: SceneRecord) -> Dict[str, Any]:
    """Canonical scene JSON for one record."""
    objects = []
    for obj in record.objects:
        entry: Dict[str, Any] = {
            "object_id": obj.object_id,
            "caption": obj.caption,
            "bbox": list(obj.bbox),
        }
        if tuple(obj.center) != bbox_center(obj.bbox):
            entry["center"] = list(obj.center)
        objects.append(entry)
    return {
        "image_id": record.image_id,
        "image_path": record.image_path,
        "width": record.width,
        "height": record.height,
        "objects": objects,
    }


def serialize_scenes(records: Iterable[SceneRecord]) -> bytes:
    payload = [scene_to_canonical(r) for r in records]
    return json.dumps(payload, ensure_ascii=False, indent=2).encode("utf-8")


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise AnnotationParseError(f"annotation source is not UTF-8: {e.reason}", offset=e.start)


def _json_error(text: str, e: json.JSONDecodeError, line_offset: int = 0, byte_base: int = 0) -> AnnotationParseError:
    offset = byte_base + len(text[: e.pos].encode("utf-8"))
    return AnnotationParseError(f"malformed JSON: {e.msg}", line=e.lineno + line_offset, column=e.colno, offset=offset)


def _parse_scene_json(data: bytes) -> ParseResult:
    text = _decode(data)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise _json_error(text, e)

    entries = _canonical_entries(payload)
    result = ParseResult()
    for index, entry in enumerate(entries):
        _collect(result, index, entry)
    return result


def _canonical_entries(payload: Any) -> List[Any]:
    """Detect the layout and adapt it to canonical scene dicts."""
    if isinstance(payload, dict) and "images" in payload and "annotations" in payload:
        return _adapt_coco(payload)
    if isinstance(payload, dict) and isinstance(payload.get("scenes"), list):
        return payload["scenes"]
    if isinstance(payload, dict) and "image_id" in payload:
        payload = [payload]
    if isinstance(payload, list):
        return [_adapt_vg(entry) if _looks_like_vg(entry) else entry for entry in payload]
    raise AnnotationParseError("unrecognized annotation layout: expected a scene list or COCO instances")


def _dict_list(payload: Dict[str, Any], key: str) -> List[Dict[str, Any]]:
    """A COCO section as a list of objects; anything else is malformed."""
    value = payload.get(key)
    if value is None:
        return []
    if not isinstance(value, list):
        raise AnnotationParseError(f"COCO '{key}' must be a list, got {type(value).__name__}")
    for index, item in enumerate(value):
        if not isinstance(item, dict):
            raise AnnotationParseError(f"COCO '{key}' entry {index} is not an object")
    return value


def _adapt_coco(payload: Dict[str, Any]) -> List[Dict[str, Any]]:
    categories = {str(c.get("id")): c.get("name") for c in _dict_list(payload, "categories")}
    by_image: Dict[str, List[Dict[str, Any]]] = {}
    for ann in _dict_list(payload, "annotations"):
        by_image.setdefault(str(ann.get("image_id")), []).append(ann)

    entries = []
    for image in _dict_list(payload, "images"):
        objects = []
        for ann in by_image.get(str(image.get("id")), []):
            objects.append({
                "object_id": str(ann.get("id")),
                "caption": ann.get("caption") or categories.get(str(ann.get("category_id"))),
                "bbox": ann.get("bbox"),
            })
        entries.append({
            "image_id": str(image.get("id")),
            "image_path": image.get("file_name"),
            "width": image.get("width"),
            "height": image.get("height"),
            "objects": objects,
        })
    return entries


def _looks_like_vg(entry: Any) -> bool:
    if not isinstance(entry, dict):
        return False
    objects = entry.get("objects")
    if not isinstance(objects, list):
        return False
    return any(isinstance(o, dict) and ("names" in o or "x" in o) for o in objects)


def _adapt_vg(entry: Dict[str, Any]) -> Dict[str, Any]:
    objects: List[Any] = []
    for obj in entry["objects"]:
        if not isinstance(obj, dict):
            # left for _build_record to reject
            objects.append(obj)
            continue
        names = obj.get("names")
        if not isinstance(names, list):
            names = [obj["name"]] if obj.get("name") else []
        bbox = obj.get("bbox")
        if bbox is None and all(k in obj for k in ("x", "y", "w", "h")):
            bbox = [obj["x"], obj["y"], obj["w"], obj["h"]]
        objects.append({
            "object_id": str(obj.get("object_id", obj.get("id"))),
            "caption": names[0] if names else None,
            "bbox": bbox,
        })
    return {
        "image_id": str(entry.get("image_id")),
        "image_path": entry.get("image_path") or entry.get("url"),
        "width": entry.get("width"),
        "height": entry.get("height"),
        "objects": objects,
    }


def _collect(result: ParseResult, index: int, entry: Any) -> None:
    image_id = str(entry.get("image_id")) if isinstance(entry, dict) and "image_id" in entry else None
    try:
        record = _build_record(entry)
    except RECORD_ERRORS as e:
        reason = _reason(e)
        logger.warning(f"Rejecting entry {index} ({image_id}): {reason}")
        result.rejects.append(RejectEntry(index=index, image_id=image_id, reason=reason))
        return
    result.records.append(record)


def _reason(e: Exception) -> str:
    if isinstance(e, KeyError):
        return f"missing field {e.args[0]!r}"
    if isinstance(e, ValidationError):
        return "; ".join(err["msg"] for err in e.errors())
    return str(e)


def _build_record(entry: Dict[str, Any]) -> SceneRecord:
    if not isinstance(entry, dict):
        raise TypeError("scene entry is not an object")
    image_id = str(entry["image_id"])
    width, height = _positive_int(entry["width"], "width"), _positive_int(entry["height"], "height")
    image_path = entry["image_path"]
    if not isinstance(image_path, str):
        raise TypeError("image_path is not a string")

    raw_objects = entry.get("objects")
    if raw_objects is None:
        raw_objects = []
    if not isinstance(raw_objects, list):
        raise TypeError(f"objects must be a list, got {type(raw_objects).__name__}")

    objects = []
    for k, raw in enumerate(raw_objects):
        if not isinstance(raw, dict):
            raise TypeError(f"object {k} is not an object")
        caption = raw.get("caption")
        if not isinstance(caption, str) or not caption.strip():
            raise ValueError(f"object {k} has no caption")
        if raw.get("bbox") is None:
            raise ValueError(f"object {k} has no bbox")
        bbox = _bbox(raw["bbox"])
        bbox_center(bbox)
        clamped_bbox = _clamp(bbox, width, height)
        object_id = str(raw.get("object_id", f"{image_id}_{k}"))
        if clamped_bbox != bbox:
            logger.warning(f"Clamped bbox of {image_id}/{object_id} to the image bounds")
        center = tuple(raw["center"]) if raw.get("center") is not None else bbox_center(clamped_bbox)
        objects.append(SceneObject(
            object_id=object_id,
            caption=caption,
            bbox=clamped_bbox,
            center=center,
            clamped=clamped_bbox != bbox,
        ))

    warnings = []
    if not objects:
        warnings.append("empty_objects")
        logger.warning(f"⚠️  Scene {image_id} has no objects")
    return SceneRecord(
        image_id=image_id,
        image_path=image_path,
        width=width,
        height=height,
        objects=objects,
        warnings=warnings,
    )


def _positive_int(value: Any, name: str) -> int:
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or value != int(value)
        or value <= 0
    ):
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _bbox(value: Any) -> BBox:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ValueError(f"bbox must be [x, y, w, h], got {value!r}")
    numbers = tuple(float(v) for v in value)
    if not all(math.isfinite(v) for v in numbers):
        raise ValueError(f"bbox {value!r} has non-finite coordinates")
    return numbers  # type: ignore[return-value]


def _clamp(bbox: BBox, width: int, height: int) -> BBox:
    x, y, w, h = bbox
    x0, y0 = max(0.0, x), max(0.0, y)
    x1, y1 = min(float(width), x + w), min(float(height), y + h)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise InvalidBBoxError(f"bbox {tuple(bbox)} lies outside the {width}x{height} image")
    if (x0, y0, x1 - x0, y1 - y0) == (x, y, w, h):
        return bbox
    return (x0, y0, x1 - x0, y1 - y0)


def _parse_make3d_manifest(data: bytes) -> ParseResult:
    text = _decode(data)
    rows_by_image: Dict[str, List[Tuple[int, Dict[str, Any]]]] = {}
    byte_base = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        stripped = line.strip()
        if stripped:
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise _json_error(line, e, line_offset=lineno - 1, byte_base=byte_base)
            if not isinstance(row, dict) or "image_id" not in row:
                raise AnnotationParseError("manifest row is not an object with image_id", line=lineno, offset=byte_base)
            rows_by_image.setdefault(str(row["image_id"]), []).append((lineno, row))
        byte_base += len(line.encode("utf-8"))

    result = ParseResult()
    for index, (image_id, rows) in enumerate(rows_by_image.items()):
        try:
            record = _build_manifest_record(image_id, [row for _, row in rows])
        except RECORD_ERRORS as e:
            reason = _reason(e)
            logger.warning(f"Rejecting manifest image {image_id} (line {rows[0][0]}): {reason}")
            result.rejects.append(RejectEntry(index=index, image_id=image_id, reason=reason))
            continue
        result.records.append(record)
    return result


def _build_manifest_record(image_id: str, rows: List[Dict[str, Any]]) -> SceneRecord:
    centers = []
    for k, row in enumerate(rows):
        caption = row.get("caption")
        if not isinstance(caption, str) or not caption.strip():
            raise ValueError(f"row {k} has no caption")
        center = row.get("center")
        if not isinstance(center, (list, tuple)) or len(center) != 2:
            raise ValueError(f"row {k} has no [cx, cy] center")
        cx, cy = float(center[0]), float(center[1])
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"row {k} center {center!r} has non-finite coordinates")
        centers.append((cx, cy))

    warnings = []
    first = rows[0]
    if first.get("width") is not None and first.get("height") is not None:
        width, height = _positive_int(first["width"], "width"), _positive_int(first["height"], "height")
    else:
        width = int(math.floor(max(cx for cx, _ in centers))) + 2
        height = int(math.floor(max(cy for _, cy in centers))) + 2
        warnings.append("size_inferred")

    objects = []
    for k, (row, (cx, cy)) in enumerate(zip(rows, centers)):
        if not (0 <= cx <= width and 0 <= cy <= height):
            raise ValueError(f"center ({cx}, {cy}) lies outside the {width}x{height} image")
        x, y = min(cx, width - 1.0), min(cy, height - 1.0)
        objects.append(SceneObject(
            object_id=str(row.get("object_id", f"{image_id}_{k}")),
            caption=row["caption"],
            bbox=(x, y, 1.0, 1.0),
            center=(cx, cy),
            clamped=(x, y) != (cx, cy),
        ))
    return SceneRecord(
        image_id=image_id,
        image_path=str(first.get("image_path", "")),
        width=width,
        height=height,
        objects=objects,
        warnings=warnings,
    )
