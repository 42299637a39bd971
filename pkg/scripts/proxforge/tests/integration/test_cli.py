#!/usr/bin/env python3
"""
End-to-end tests for the proxforge command line.

These run the real subcommands in-process against synthetic scenes.
Run only these with: pytest -m integration
"""

import json
import time

import numpy as np
import pytest

import proxforge.cli as cli
from proxforge.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run
from proxforge.constants import DepthFormat
from proxforge.depth import DisparityMap, write_depth_file
from tests.synthetic import disparity_grid, make_scene

pytestmark = pytest.mark.integration


def _generate(synthetic, out, *extra):
    scenes_path, depth_dir, _ = synthetic
    return run(["generate", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir), "--out", str(out), *extra])


class TestGenerate:
    """Test cases for the generate subcommand."""

    def test_same_seed_is_byte_identical(self, synthetic_100, tmp_path):
        assert _generate(synthetic_100, tmp_path / "a.jsonl", "--seed", "7") == EXIT_OK
        assert _generate(synthetic_100, tmp_path / "b.jsonl", "--seed", "7") == EXIT_OK
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_jobs_do_not_change_output(self, synthetic_100, tmp_path):
        assert _generate(synthetic_100, tmp_path / "one.jsonl", "--seed", "7", "--jobs", "1") == EXIT_OK
        assert _generate(synthetic_100, tmp_path / "four.jsonl", "--seed", "7", "--jobs", "4") == EXIT_OK
        assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "four.jsonl").read_bytes()

    def test_output_layout(self, synthetic_100, tmp_path):
        out = tmp_path / "train.jsonl"
        assert _generate(synthetic_100, out, "--seed", "7", "--skipped", str(tmp_path / "skipped.jsonl")) == EXIT_OK

        lines = [json.loads(line) for line in out.read_text().splitlines()]
        header = lines[0]["header"]
        assert header["kind"] == "conversations"
        assert header["config"]["seed"] == 7
        assert "system_message" in header
        record = lines[1]
        assert set(record) == {"id", "image", "stage", "conversations", "meta"}
        assert record["conversations"][0]["value"].startswith("<image>\n")
        assert (tmp_path / "skipped.jsonl").is_file()

    def test_conversations_are_streamed_to_the_writer(self, synthetic_100, tmp_path, monkeypatch):
        """The writer receives a lazy iterator, not a prebuilt list."""
        seen = []
        real_write = cli.write_jsonl

        def spy(path, records, header=None):
            seen.append(records)
            return real_write(path, records, header)

        monkeypatch.setattr(cli, "write_jsonl", spy)
        out = tmp_path / "train.jsonl"
        assert _generate(synthetic_100, out, "--seed", "7") == EXIT_OK

        assert not isinstance(seen[0], (list, tuple))
        assert len(out.read_text().splitlines()) > 1

    def test_config_file_and_flag_precedence(self, synthetic_100, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 3, "max_pairs_per_image": 1}))
        out = tmp_path / "train.jsonl"
        assert _generate(synthetic_100, out, "--config", str(config), "--seed", "5") == EXIT_OK

        header = json.loads(out.read_text().splitlines()[0])["header"]
        assert header["config"]["seed"] == 5
        assert header["config"]["max_pairs_per_image"] == 1

    def test_rejected_entries_exit_2_with_report(self, synthetic_100, tmp_path):
        _, depth_dir, scenes = synthetic_100
        broken = scenes[:3] + [{"image_id": "bad", "image_path": "bad.jpg", "width": 10, "height": 10,
                                "objects": [{"object_id": "a", "bbox": [0, 0, 1, 1]}]}]
        scenes_path = tmp_path / "scenes.json"
        scenes_path.write_text(json.dumps(broken))
        rejects = tmp_path / "rejects.json"

        code = run([
            "generate", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(tmp_path / "out.jsonl"), "--rejects", str(rejects),
        ])

        assert code == EXIT_DATA
        report = json.loads(rejects.read_text())
        assert report["count_in"] == 4
        assert report["count_out"] == 3
        assert report["rejects"][0]["image_id"] == "bad"
        assert (tmp_path / "out.jsonl").is_file()
        assert report["meta"]["kind"] == "rejects"
        assert len(report["meta"]["config_hash"]) == 64
        assert len(report["meta"]["template_hash"]) == 64
        assert len(report["meta"]["lexicon_hash"]) == 64

    def test_malformed_coco_structure_exits_2(self, synthetic_100, tmp_path):
        _, depth_dir, _ = synthetic_100
        scenes_path = tmp_path / "coco.json"
        scenes_path.write_text(json.dumps({"images": ["a"], "annotations": []}))

        code = run([
            "generate", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(tmp_path / "out.jsonl"),
        ])
        assert code == EXIT_DATA

    def test_skipped_scenes_do_not_fail_the_run(self, tmp_path):
        scenes_path = tmp_path / "scenes.json"
        scenes_path.write_text(json.dumps([make_scene(np.random.default_rng(0), 0, 64, 48)]))
        (tmp_path / "depth").mkdir()
        rejects = tmp_path / "rejects.json"

        code = run([
            "generate", "--scenes", str(scenes_path), "--depth-dir", str(tmp_path / "depth"),
            "--out", str(tmp_path / "out.jsonl"), "--rejects", str(rejects),
        ])

        assert code == EXIT_OK
        assert json.loads(rejects.read_text())["skipped_scenes"] == [
            {"image_id": "img00000", "reason": "missing_depth_map"}
        ]


class TestUsageErrors:
    """Test cases for exit code 1."""

    def test_unknown_flag(self):
        assert run(["generate", "--bogus"]) == EXIT_USAGE

    def test_unknown_command(self):
        assert run(["frobnicate"]) == EXIT_USAGE

    def test_missing_input_file(self, tmp_path):
        code = run([
            "generate", "--scenes", str(tmp_path / "none.json"), "--depth-dir", str(tmp_path),
            "--out", str(tmp_path / "o.jsonl"),
        ])
        assert code == EXIT_USAGE

    def test_bad_config_value(self, synthetic_100, tmp_path):
        assert _generate(synthetic_100, tmp_path / "o.jsonl", "--mode-ratio", "0:0") == EXIT_USAGE

    def test_help_exits_cleanly(self):
        assert run(["--help"]) == EXIT_OK


class TestEvaluationFlow:
    """Test cases for convert -> oracle -> score."""

    def test_oracle_closure(self, synthetic_100, tmp_path):
        scenes_path, depth_dir, _ = synthetic_100
        eval_path, key_path = tmp_path / "eval.jsonl", tmp_path / "key.jsonl"
        responses, report_path = tmp_path / "responses.jsonl", tmp_path / "report.json"

        assert run([
            "convert-gqa", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(eval_path), "--key", str(key_path), "--seed", "7",
        ]) == EXIT_OK
        assert run(["oracle", "--eval", str(eval_path), "--key", str(key_path), "--out", str(responses)]) == EXIT_OK
        assert run([
            "score", "--eval", str(eval_path), "--key", str(key_path),
            "--responses", str(responses), "--out", str(report_path),
        ]) == EXIT_OK

        report = json.loads(report_path.read_text())
        assert report["perception"]["valid_answer_ratio"] == 1.0
        assert report["perception"]["mse"] == 0.0
        assert report["perception"]["delta1"] == 1.0
        assert report["proximity"]["accuracy"] == 1.0
        assert report["meta"]["eval_set"]["kind"] == "gqa_eval"
        oracle_header = json.loads(responses.read_text().splitlines()[0])["header"]
        assert oracle_header["kind"] == "oracle_responses"
        assert {"config_hash", "template_hash", "lexicon_hash"} <= set(oracle_header)

    def test_eval_set_hides_answers(self, synthetic_100, tmp_path):
        scenes_path, depth_dir, _ = synthetic_100
        eval_path, key_path = tmp_path / "eval.jsonl", tmp_path / "key.jsonl"
        assert run([
            "convert-gqa", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(eval_path), "--key", str(key_path), "--prompt-style", "detailed",
        ]) == EXIT_OK

        records = [json.loads(line) for line in eval_path.read_text().splitlines()[1:]]
        assert all(set(r) == {"item_id", "image", "stage", "question"} for r in records)
        perception = [r for r in records if r["stage"] == "perception"]
        assert all("ranging from 0 to 1" in r["question"] for r in perception)

    def test_convert_make3d(self, tmp_path):
        depth_dir = tmp_path / "depth"
        depth_dir.mkdir()
        grid = np.linspace(1.0, 80.0, 48 * 64).reshape(48, 64)
        (depth_dir / "m1.rawf32").write_bytes(write_depth_file(DisparityMap(values=grid), DepthFormat.RAWF32))
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text("\n".join(json.dumps(row) for row in [
            {"image_id": "m1", "image_path": "m1.jpg", "caption": "tree", "center": [2, 2]},
            {"image_id": "m1", "image_path": "m1.jpg", "caption": "house", "center": [60, 40]},
        ]))
        eval_path, key_path = tmp_path / "eval.jsonl", tmp_path / "key.jsonl"

        assert run([
            "convert-make3d", "--manifest", str(manifest), "--depth-dir", str(depth_dir),
            "--out", str(eval_path), "--key", str(key_path),
        ]) == EXIT_OK

        records = [json.loads(line) for line in eval_path.read_text().splitlines()[1:]]
        assert [r["stage"] for r in records] == ["proximity"]

    def test_score_reports_invalid_answers(self, synthetic_100, tmp_path):
        scenes_path, depth_dir, _ = synthetic_100
        eval_path, key_path = tmp_path / "eval.jsonl", tmp_path / "key.jsonl"
        run([
            "convert-gqa", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(eval_path), "--key", str(key_path),
        ])
        items = [json.loads(line) for line in eval_path.read_text().splitlines()[1:]]
        responses = tmp_path / "responses.jsonl"
        responses.write_text("\n".join(json.dumps({"item_id": i["item_id"], "text": "10 feet"}) for i in items))
        report_path = tmp_path / "report.json"

        assert run([
            "score", "--eval", str(eval_path), "--key", str(key_path),
            "--responses", str(responses), "--out", str(report_path), "--sqrel-den", "gt",
        ]) == EXIT_OK

        report = json.loads(report_path.read_text())
        assert report["perception"]["valid_answer_ratio"] == 0.0
        assert report["proximity"]["accuracy"] == 0.0
        assert report["meta"]["sqrel_denominator"] == "gt"


class TestStatsAuditInspect:
    """Test cases for the reporting subcommands."""

    def test_stats_on_empty_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert run(["stats", "--in", str(empty)]) == EXIT_OK

        report = json.loads(capsys.readouterr().out)
        assert report["total"] == 0
        assert report["depth_histogram"] is None

    def test_stats_on_generated_data(self, synthetic_100, tmp_path):
        train = tmp_path / "train.jsonl"
        _generate(synthetic_100, train, "--seed", "7")
        out = tmp_path / "stats.json"
        assert run(["stats", "--in", str(train), "--out", str(out)]) == EXIT_OK

        report = json.loads(out.read_text())
        assert report["pair_counts"]["perception"] > 0
        assert sum(report["depth_histogram"]) == pytest.approx(1.0, abs=1e-9)
        assert report["meta"]["source"]["kind"] == "conversations"

    def test_stats_on_eval_set_needs_key(self, synthetic_100, tmp_path):
        scenes_path, depth_dir, _ = synthetic_100
        eval_path, key_path = tmp_path / "eval.jsonl", tmp_path / "key.jsonl"
        run([
            "convert-gqa", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(eval_path), "--key", str(key_path),
        ])
        assert run(["stats", "--in", str(eval_path)]) == EXIT_USAGE
        assert run(["stats", "--in", str(eval_path), "--key", str(key_path), "--out", str(tmp_path / "s.json")]) == EXIT_OK

    def test_audit(self, synthetic_100, tmp_path):
        scenes_path, depth_dir, _ = synthetic_100
        out = tmp_path / "flags.jsonl"
        assert run([
            "audit", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(out), "--threshold", "0.05",
        ]) == EXIT_OK
        header = json.loads(out.read_text().splitlines()[0])["header"]
        assert header["kind"] == "audit_flags"

    def test_inspect_depth(self, synthetic_100, capsys):
        _, depth_dir, _ = synthetic_100
        assert run(["inspect", "--depth", str(depth_dir / "img00000.pfm")]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert (payload["width"], payload["height"]) == (64, 48)
        assert payload["kind"] == "disparity"

    def test_inspect_needs_exactly_one_target(self):
        assert run(["inspect"]) == EXIT_USAGE


@pytest.mark.slow
class TestThroughput:
    """Generation speed at full image size."""

    def test_thousand_scenes_under_a_minute(self, tmp_path):
        rng = np.random.default_rng(99)
        depth_dir = tmp_path / "depth"
        depth_dir.mkdir()
        # A few distinct maps shared through symlinks keep the fixture small on disk
        maps = []
        for k in range(8):
            path = tmp_path / f"map{k}.rawf32"
            path.write_bytes(write_depth_file(DisparityMap(values=disparity_grid(rng, 640, 480)), DepthFormat.RAWF32))
            maps.append(path)
        scenes = [make_scene(rng, i, 640, 480) for i in range(1000)]
        for i, scene in enumerate(scenes):
            (depth_dir / f"{scene['image_id']}.rawf32").symlink_to(maps[i % len(maps)])
        scenes_path = tmp_path / "scenes.json"
        scenes_path.write_text(json.dumps(scenes))

        start = time.perf_counter()
        code = run([
            "generate", "--scenes", str(scenes_path), "--depth-dir", str(depth_dir),
            "--out", str(tmp_path / "train.jsonl"), "--seed", "7", "--jobs", "1",
        ])
        elapsed = time.perf_counter() - start

        assert code == EXIT_OK
        assert elapsed < 60.0
