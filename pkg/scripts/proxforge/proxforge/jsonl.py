"""
JSONL and JSON file helpers.

Every JSONL file written here starts with a provenance header line
``{"header": {...}}``; readers skip such lines.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from pydantic import ValidationError

from .captions import lexicon_hash
from .config import GenConfig
from .constants import FORMAT_VERSION, EvalStage
from .errors import DatasetFormatError, InvalidEvalSetError
from .models import Conversation, EvalItem, ModelResponse, RelationTruth
from .templates import template_hash

PathLike = Union[str, Path]

HEADER_KEY = "header"


def provenance(kind: str, config: GenConfig, **extra: Any) -> Dict[str, Any]:
    """Header payload identifying how an output file was produced."""
    header = {
        "kind": kind,
        "format_version": FORMAT_VERSION,
        "config": config.hashed_fields(),
        "config_hash": config.config_hash(),
        "template_hash": template_hash(),
        "lexicon_hash": lexicon_hash(),
    }
    header.update(extra)
    return header


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]], header: Optional[Dict[str, Any]] = None) -> int:
    """Write records one per line; returns the number of records written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header is not None:
            f.write(_dumps({HEADER_KEY: header}) + "\n")
        for record in records:
            f.write(_dumps(record) + "\n")
            count += 1
    return count


def write_json(path: PathLike, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def _is_header(record: Any) -> bool:
    return isinstance(record, dict) and len(record) == 1 and HEADER_KEY in record


def _iter_lines(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise DatasetFormatError(f"cannot open: {e.strerror}", str(path))
    with f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"invalid JSON ({e.msg})", str(path), number)
            if not isinstance(record, dict):
                raise DatasetFormatError("each line must hold a JSON object", str(path), number)
            yield number, record


def iter_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    """Records of a JSONL file, header lines skipped."""
    for _, record in _iter_lines(path):
        if not _is_header(record):
            yield record


def read_header(path: PathLike) -> Optional[Dict[str, Any]]:
    for _, record in _iter_lines(path):
        return record[HEADER_KEY] if _is_header(record) else None
    return None


def _validated(path: PathLike, model, records: Iterator[Tuple[int, Dict[str, Any]]]):
    for number, record in records:
        if _is_header(record):
            continue
        try:
            yield model.model_validate(record)
        except ValidationError as e:
            raise DatasetFormatError(f"invalid {model.__name__}: {e.errors()[0]['msg']}", str(path), number)


def read_conversations(path: PathLike) -> Iterator[Conversation]:
    return _validated(path, Conversation, _iter_lines(path))


def read_responses(path: PathLike) -> Iterator[ModelResponse]:
    return _validated(path, ModelResponse, _iter_lines(path))


def read_answer_key(path: PathLike) -> Dict[str, Any]:
    key: Dict[str, Any] = {}
    for number, record in _iter_lines(path):
        if _is_header(record):
            continue
        if "item_id" not in record or "gt" not in record:
            raise DatasetFormatError("answer key lines need item_id and gt", str(path), number)
        key[str(record["item_id"])] = record["gt"]
    return key


def eval_item_from(public: Dict[str, Any], gt: Any) -> EvalItem:
    """Rebuild a full EvalItem from its public record and answer-key entry."""
    fields = {k: public[k] for k in ("item_id", "image", "stage", "question")}
    if EvalStage(public["stage"]) == EvalStage.PERCEPTION:
        return EvalItem(**fields, gt_depth=gt)
    return EvalItem(**fields, gt_relation=RelationTruth.model_validate(gt))


def read_eval_set(eval_path: PathLike, key_path: PathLike) -> List[EvalItem]:
    """Evaluation items with their ground truth; every item must appear in the key."""
    key = read_answer_key(key_path)
    items = []
    for number, public in _iter_lines(eval_path):
        if _is_header(public):
            continue
        item_id = str(public.get("item_id"))
        if item_id not in key:
            raise InvalidEvalSetError(f"item {item_id!r} is missing from the answer key")
        try:
            items.append(eval_item_from(public, key[item_id]))
        except (KeyError, ValueError) as e:
            raise DatasetFormatError(f"invalid evaluation item: {e}", str(eval_path), number)
    return items
