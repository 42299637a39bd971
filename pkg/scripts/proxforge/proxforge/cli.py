#!/usr/bin/env python3
"""
Command-line entry point: generate datasets, convert benchmarks, compute
statistics, audit scenes and score model responses.
"""

import argparse
import json
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence

from dotenv import load_dotenv

from .config import GenConfig, load_config
from .constants import AnnotationFormat
from .conversion import EvalSet, convert_gqa, convert_make3d, oracle_responder
from .depth import DisparityMap, depth_format_for, read_depth_path
from .errors import ConfigError, ProxForgeError, UsageError
from .ingest import ParseResult, parse_annotations_file
from .jsonl import (
    iter_jsonl,
    provenance,
    read_answer_key,
    read_conversations,
    read_eval_set,
    read_header,
    read_responses,
    write_json,
    write_jsonl,
)
from .logging_config import get_logger, setup_logging
from .metrics import score
from .models import EvalItem
from .pipeline import SceneOutcome, audit_all, generate_all
from .stats import CONVERSATION_STAGES, EVAL_STAGES, compute_stats, histogram_table

logger = get_logger("proxforge.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

PROGRESS_EVERY = 1000

# argparse dest -> GenConfig field
CONFIG_FLAGS = {
    "seed": "seed",
    "max_pairs": "max_pairs_per_image",
    "perception_cap": "perception_cap",
    "mode_ratio": "mode_ratio",
    "epsilon": "epsilon",
    "median_window": "median_window",
    "sqrel_den": "sqrel_denominator",
    "threshold": "audit_threshold",
    "prompt_style": "eval_prompt_style",
    "jobs": "jobs",
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage problems as UsageError instead of exiting 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default: PROXFORGE_LOG_LEVEL or INFO)")
    return common


def _add_generation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Run seed (fallback: PROXFORGE_SEED)")
    parser.add_argument("--max-pairs", type=int, help="Reasoning pairs kept per image")
    parser.add_argument("--perception-cap", type=int, help="Perception questions per image (default: all objects)")
    parser.add_argument("--mode-ratio", help="Direct:reasoned answer ratio, e.g. 1:1")
    parser.add_argument("--epsilon", type=float, help="Disparity inversion offset")
    parser.add_argument("--median-window", type=int, help="Odd k for a k x k median sample")
    parser.add_argument("--jobs", type=int, help="Worker processes")


def _add_scene_inputs(parser: argparse.ArgumentParser, source_flag: str, default_format: str) -> None:
    parser.add_argument(source_flag, dest="scenes", type=Path, required=True, help="Annotation file")
    parser.add_argument(
        "--format",
        choices=[f.value for f in AnnotationFormat],
        default=default_format,
        help=f"Annotation format (default: {default_format})",
    )
    parser.add_argument("--depth-dir", type=Path, required=True, help="Directory of <image_id>.pfm/.png/.rawf32 maps")
    parser.add_argument("--rejects", type=Path, help="Write the rejects report here")


def build_parser() -> ArgumentParser:
    common = _common_parser()
    parser = ArgumentParser(prog="proxforge", description="Proximity VQA dataset generation and evaluation")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    gen = sub.add_parser("generate", parents=[common], help="Generate training conversations")
    _add_scene_inputs(gen, "--scenes", AnnotationFormat.COCO_VG.value)
    gen.add_argument("--out", type=Path, required=True, help="Output conversations JSONL")
    gen.add_argument("--skipped", type=Path, help="Write skipped pairs JSONL here")
    _add_generation_flags(gen)

    gqa = sub.add_parser("convert-gqa", parents=[common], help="Build a perception + proximity eval set")
    _add_scene_inputs(gqa, "--scenes", AnnotationFormat.COCO_VG.value)
    gqa.add_argument("--out", type=Path, required=True, help="Output eval set JSONL (questions only)")
    gqa.add_argument("--key", type=Path, required=True, help="Output answer key JSONL")
    gqa.add_argument("--prompt-style", choices=["plain", "detailed"], help="Question phrasing for baseline models")
    _add_generation_flags(gqa)

    m3d = sub.add_parser("convert-make3d", parents=[common], help="Build a proximity eval set from a manifest")
    _add_scene_inputs(m3d, "--manifest", AnnotationFormat.MAKE3D_MANIFEST.value)
    m3d.add_argument("--out", type=Path, required=True, help="Output eval set JSONL (questions only)")
    m3d.add_argument("--key", type=Path, required=True, help="Output answer key JSONL")
    m3d.add_argument("--prompt-style", choices=["plain", "detailed"], help="Question phrasing for baseline models")
    _add_generation_flags(m3d)

    stats = sub.add_parser("stats", parents=[common], help="Dataset statistics")
    stats.add_argument("--in", dest="input", type=Path, required=True, help="Conversations or eval set JSONL")
    stats.add_argument("--key", type=Path, help="Answer key, required for eval sets")
    stats.add_argument("--out", type=Path, help="Write the JSON report here instead of standard output")
    stats.add_argument("--text", action="store_true", help="Also print the text histogram")

    sc = sub.add_parser("score", parents=[common], help="Score model responses")
    sc.add_argument("--eval", type=Path, required=True, help="Eval set JSONL")
    sc.add_argument("--key", type=Path, required=True, help="Answer key JSONL")
    sc.add_argument("--responses", type=Path, required=True, help="Responses JSONL")
    sc.add_argument("--out", type=Path, required=True, help="Metrics report JSON")
    sc.add_argument("--sqrel-den", choices=["pred", "gt"], help="Sq Rel denominator (default: pred)")

    audit = sub.add_parser("audit", parents=[common], help="Flag center offsets and duplicate captions")
    _add_scene_inputs(audit, "--scenes", AnnotationFormat.COCO_VG.value)
    audit.add_argument("--out", type=Path, required=True, help="Output flags JSONL")
    audit.add_argument("--threshold", type=float, help="Center/median depth gap that raises a flag")
    audit.add_argument("--jobs", type=int, help="Worker processes")

    oracle = sub.add_parser("oracle", parents=[common], help="Write ground-truth responses for an eval set")
    oracle.add_argument("--eval", type=Path, required=True, help="Eval set JSONL")
    oracle.add_argument("--key", type=Path, required=True, help="Answer key JSONL")
    oracle.add_argument("--out", type=Path, required=True, help="Output responses JSONL")

    inspect = sub.add_parser("inspect", parents=[common], help="Describe a depth file or a dataset")
    target = inspect.add_mutually_exclusive_group(required=True)
    target.add_argument("--depth", type=Path, help="Depth/disparity map file")
    target.add_argument("--dataset", type=Path, help="Any JSONL written by proxforge")
    return parser


def _require_file(path: Optional[Path], flag: str) -> None:
    if path is not None and not path.is_file():
        raise UsageError(f"{flag}: no such file: {path}")


def _require_dir(path: Path, flag: str) -> None:
    if not path.is_dir():
        raise UsageError(f"{flag}: no such directory: {path}")


def _config_from(args: argparse.Namespace) -> GenConfig:
    overrides = {field: getattr(args, dest, None) for dest, field in CONFIG_FLAGS.items()}
    return load_config(args.config, overrides)


def _with_progress(records: Iterable[Any], label: str) -> Iterator[Any]:
    count = 0
    for record in records:
        count += 1
        if count % PROGRESS_EVERY == 0:
            logger.info(f"   ... {count} {label}")
        yield record


def _ingest(args: argparse.Namespace) -> ParseResult:
    _require_file(args.scenes, "annotations")
    _require_dir(args.depth_dir, "--depth-dir")
    logger.info(f"📂 Parsing {args.scenes} ({args.format})...")
    parsed = parse_annotations_file(args.scenes, args.format)
    logger.info(f"📋 {len(parsed.records)} scene(s) parsed, {len(parsed.rejects)} rejected")
    return parsed


def _finish(
    args: argparse.Namespace,
    config: GenConfig,
    parsed: ParseResult,
    skipped_scenes: Sequence[Dict[str, str]],
) -> int:
    """Write the rejects report when asked; exit 2 when any entry was rejected."""
    if args.rejects is not None:
        write_json(
            args.rejects,
            {
                "meta": provenance("rejects", config),
                "count_in": parsed.count_in,
                "count_out": len(parsed.records),
                "rejects": [r.model_dump(mode="json") for r in parsed.rejects],
                "skipped_scenes": list(skipped_scenes),
            },
        )
        logger.info(f"📝 Rejects report written to {args.rejects}")
    if parsed.rejects:
        logger.error(f"❌ {len(parsed.rejects)} annotation entries rejected")
        return EXIT_DATA
    return EXIT_OK


def _log_skips(outcome: SceneOutcome, skipped: List[Dict[str, str]]) -> None:
    for problem in outcome.problems:
        logger.warning(f"⚠️  {outcome.image_id}: {problem}")
    if outcome.skip_reason:
        logger.warning(f"⚠️  Skipping {outcome.image_id}: {outcome.skip_reason}")
        skipped.append({"image_id": outcome.image_id, "reason": outcome.skip_reason})


def cmd_generate(args: argparse.Namespace) -> int:
    config = _config_from(args)
    parsed = _ingest(args)
    skipped_pairs: List[Dict[str, Any]] = []
    skipped_scenes: List[Dict[str, str]] = []
    logger.info(f"🚀 Generating conversations with seed {config.seed} on {config.jobs} worker(s)...")

    def conversations() -> Iterator[Dict[str, Any]]:
        for outcome in _with_progress(generate_all(parsed.records, args.depth_dir, config), "scenes"):
            _log_skips(outcome, skipped_scenes)
            if outcome.generation is not None:
                skipped_pairs.extend(p.model_dump(mode="json") for p in outcome.generation.skipped_pairs)
                for conversation in outcome.generation.conversations:
                    yield conversation.to_record()

    header = provenance("conversations", config, system_message=config.system_message)
    written = write_jsonl(args.out, conversations(), header)
    logger.info(f"✅ {written} conversation(s) written to {args.out}")
    if args.skipped is not None:
        write_jsonl(args.skipped, skipped_pairs, provenance("skipped_pairs", config))
        logger.info(f"📝 {len(skipped_pairs)} skipped pair(s) written to {args.skipped}")
    return _finish(args, config, parsed, skipped_scenes)


def _write_eval_set(args: argparse.Namespace, config: GenConfig, kind: str, eval_set: EvalSet) -> None:
    items = eval_set.items
    write_jsonl(args.out, (item.public_record() for item in items), provenance(kind, config))
    write_jsonl(args.key, (item.key_record() for item in items), provenance(f"{kind}_key", config))
    logger.info(
        f"✅ {len(eval_set.perception)} perception + {len(eval_set.proximity)} proximity item(s) "
        f"written to {args.out} (answer key: {args.key})"
    )


def cmd_convert(args: argparse.Namespace) -> int:
    config = _config_from(args)
    parsed = _ingest(args)
    if args.command == "convert-make3d":
        eval_set, kind = convert_make3d(parsed.records, args.depth_dir, config), "make3d_eval"
    else:
        eval_set, kind = convert_gqa(parsed.records, args.depth_dir, config), "gqa_eval"
    _write_eval_set(args, config, kind, eval_set)
    skipped = [{"image_id": image_id, "reason": reason} for image_id, reason in eval_set.skipped]
    return _finish(args, config, parsed, skipped)


def cmd_audit(args: argparse.Namespace) -> int:
    config = _config_from(args)
    parsed = _ingest(args)
    flags, skipped = [], []
    logger.info(f"🔍 Auditing {len(parsed.records)} scene(s) at threshold {config.audit_threshold}...")
    for outcome in _with_progress(audit_all(parsed.records, args.depth_dir, config), "scenes"):
        _log_skips(outcome, skipped)
        flags.extend(flag.model_dump(mode="json") for flag in outcome.audit_flags)
    write_jsonl(args.out, flags, provenance("audit_flags", config))
    logger.info(f"✅ {len(flags)} flag(s) written to {args.out}")
    return _finish(args, config, parsed, skipped)


def _is_eval_record(record: Dict[str, Any]) -> bool:
    return "conversations" not in record and "question" in record


def cmd_stats(args: argparse.Namespace) -> int:
    _require_file(args.input, "--in")
    _require_file(args.key, "--key")
    first = next(iter_jsonl(args.input), None)
    if first is not None and _is_eval_record(first):
        if args.key is None:
            raise UsageError("stats on an evaluation set needs --key")
        records: Iterable[Any] = read_eval_set(args.input, args.key)
        stages = EVAL_STAGES
    else:
        records, stages = read_conversations(args.input), CONVERSATION_STAGES
    report = compute_stats(_with_progress(records, "records"), stages)
    payload = report.model_dump(mode="json")
    header = read_header(args.input)
    if header is not None:
        payload["meta"]["source"] = {k: header.get(k) for k in ("kind", "config_hash", "template_hash", "lexicon_hash")}
    if args.out is not None:
        write_json(args.out, payload)
        logger.info(f"✅ Statistics over {report.total} record(s) written to {args.out}")
    else:
        print(json.dumps(payload, indent=2))
    if args.text:
        print(histogram_table(report))
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    for path, flag in ((args.eval, "--eval"), (args.key, "--key"), (args.responses, "--responses")):
        _require_file(path, flag)
    sqrel = args.sqrel_den or load_config(args.config).sqrel_denominator
    items: List[EvalItem] = read_eval_set(args.eval, args.key)
    logger.info(f"📊 Scoring {len(items)} item(s) against {args.responses}...")
    report = score(items, read_responses(args.responses), sqrel)
    header = read_header(args.eval)
    if header is not None:
        report.meta["eval_set"] = {k: header.get(k) for k in ("kind", "config_hash", "template_hash", "lexicon_hash")}
    write_json(args.out, report.model_dump(mode="json"))
    if report.perception is not None:
        p = report.perception
        logger.info(f"   perception: valid {p.valid_answer_ratio:.4f}, mse {p.mse}, rmse {p.rmse}, delta1 {p.delta1}")
    if report.proximity is not None:
        q = report.proximity
        logger.info(f"   proximity: valid {q.valid_answer_ratio:.4f}, accuracy {q.accuracy:.4f}")
    logger.info(f"✅ Metrics report written to {args.out}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    _require_file(args.eval, "--eval")
    _require_file(args.key, "--key")
    config = load_config(args.config)
    key = read_answer_key(args.key)
    responses = (r.model_dump() for r in oracle_responder(iter_jsonl(args.eval), key))
    written = write_jsonl(args.out, responses, provenance("oracle_responses", config))
    logger.info(f"✅ {written} oracle response(s) written to {args.out}")
    return EXIT_OK


def _describe_depth(path: Path) -> Dict[str, Any]:
    grid = read_depth_path(path)
    values = grid.values
    return {
        "path": str(path),
        "format": depth_format_for(path).value,
        "kind": "disparity" if isinstance(grid, DisparityMap) else "depth",
        "width": grid.width,
        "height": grid.height,
        "min": float(values.min()),
        "max": float(values.max()),
    }


def _describe_dataset(path: Path) -> Dict[str, Any]:
    stages: Counter = Counter()
    total = 0
    for record in iter_jsonl(path):
        total += 1
        stages[str(record.get("stage", "unstaged"))] += 1
    return {"path": str(path), "header": read_header(path), "records": total, "by_stage": dict(sorted(stages.items()))}


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.depth is not None:
        _require_file(args.depth, "--depth")
        payload = _describe_depth(args.depth)
    else:
        _require_file(args.dataset, "--dataset")
        payload = _describe_dataset(args.dataset)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "convert-gqa": cmd_convert,
    "convert-make3d": cmd_convert,
    "stats": cmd_stats,
    "score": cmd_score,
    "audit": cmd_audit,
    "oracle": cmd_oracle,
    "inspect": cmd_inspect,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"proxforge: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE
    except ProxForgeError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_DATA


def main() -> None:
    load_dotenv()
    sys.exit(run())


if __name__ == "__main__":
    main()
