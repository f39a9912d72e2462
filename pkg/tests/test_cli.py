"""Command line behavior: exit codes, frozen outputs, report artifacts."""

import csv
import json
import os
import socket

import pytest
from click.testing import CliRunner

from conftest import FIXTURES, REPO_ROOT, load_json
from eventlens.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture()
def cli(monkeypatch, tmp_path):
    """Runner pinned to the repo root so fixture-relative config paths resolve."""
    monkeypatch.chdir(REPO_ROOT)
    monkeypatch.setenv("EVENTLENS_CACHE_DIR", str(tmp_path / "cache"))
    return CliRunner()


def _fx(*parts: str) -> str:
    return os.path.join("fixtures", *parts)


# ------------------------------------------------------------------ segment


def test_segment_blocks_to_stdout(cli):
    expected = load_json("blocks", "expected.json")["blk_k3_l5"]
    result = cli.invoke(main, ["segment", "--manifest", _fx("blocks", "blk_k3_l5.json"), "--n-events", "3"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["video_id"] == "blk_k3_l5"
    assert [[r["begin"], r["end"]] for r in payload["regions"]] == expected["regions"]
    # frames sampled at 1 fps, so seconds mirror indices
    assert [r["begin_s"] for r in payload["regions"]] == [float(b) for b, _ in expected["regions"]]
    for state in payload["states"]:
        assert state["stable"] is True
        assert state["epochs"] == 2
    assert payload["config"]["n_events"] == 3
    assert "providers.cache_dir" not in payload["config"]


def test_segment_writes_out_file(cli, tmp_path):
    expected = load_json("blocks", "expected.json")["blk_k2_l10"]
    out = tmp_path / "seg.json"
    result = cli.invoke(
        main,
        ["segment", "--manifest", _fx("blocks", "blk_k2_l10.json"), "--n-events", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert [[r["begin"], r["end"]] for r in payload["regions"]] == expected["regions"]
    assert not list(tmp_path.glob(".tmp-*"))


def test_segment_missing_manifest_is_data_error(cli):
    result = cli.invoke(main, ["segment", "--manifest", _fx("blocks", "no_such.json")])
    assert result.exit_code == 4
    assert "data error" in result.stderr


def test_unknown_config_key_is_config_error(cli, tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"s1.delta_one": 0.9}), encoding="utf-8")
    result = cli.invoke(
        main,
        ["segment", "--manifest", _fx("blocks", "blk_k2_l3.json"), "--config", str(bad)],
    )
    assert result.exit_code == 2
    assert "config error" in result.stderr


def test_unreachable_provider_is_provider_error(cli, tmp_path):
    # grab a port that nothing listens on, then point the image embedder at it
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "providers.embed_image.endpoint": f"http://127.0.0.1:{port}/v1/embed_image",
                "providers.embed_image.max_retries": 0,
            }
        ),
        encoding="utf-8",
    )
    # stuball frames carry no embeddings, so the endpoint must answer
    result = cli.invoke(
        main,
        ["segment", "--manifest", _fx("stuball", "manifests", "s01.json"), "--config", str(cfg)],
    )
    assert result.exit_code == 3
    assert "provider error" in result.stderr


# ------------------------------------------------------------------- refine


def _refine_args(regions_name: str, out: str, mode: str | None) -> list[str]:
    args = [
        "refine",
        "--manifest", _fx("hillclimb", "manifest.json"),
        "--regions", _fx("hillclimb", regions_name),
        "--instructions", _fx("hillclimb", "instructions.json"),
        "--config", _fx("hillclimb", "config.json"),
        "--out", out,
    ]
    if mode is not None:
        args += ["--s2-mode", mode]
    return args


def test_refine_trajectories_frozen_outcome(cli, tmp_path):
    expected = load_json("hillclimb", "expected.json")["trajectories"]
    out = tmp_path / "refined.json"
    result = cli.invoke(main, _refine_args("regions_trajectories.json", str(out), None))
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    region = payload["regions"][0]
    assert [region["begin"], region["end"]] == expected["final"]
    trace = payload["traces"][0]
    assert trace["initial_region"] == expected["init"]
    assert trace["final_region"] == expected["final"]
    assert trace["mode"] == "trajectories"
    assert trace["fallback_used"] is False
    assert trace["no_signal"] is False
    assert trace["assertions"] == [f"seg {i}" for i in range(5)]
    assert trace["evaluations"] == len(trace["moves"]) + 1
    assert trace["final_xi"] > trace["initial_xi"]
    accepted = [m for m in trace["moves"] if m["accepted"]]
    for move in accepted:
        assert move["xi_after"] > move["xi_before"]


def test_refine_symmetric_frozen_outcome(cli, tmp_path):
    expected = load_json("hillclimb", "expected.json")["symmetric"]
    out = tmp_path / "refined.json"
    result = cli.invoke(main, _refine_args("regions_symmetric.json", str(out), "symmetric"))
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    region = payload["regions"][0]
    assert [region["begin"], region["end"]] == expected["final"]
    trace = payload["traces"][0]
    assert trace["mode"] == "symmetric"
    assert trace["final_xi"] > trace["initial_xi"]


def test_refine_count_mismatch_is_data_error(cli, tmp_path):
    regions = tmp_path / "regions.json"
    regions.write_text(
        json.dumps({"regions": [{"begin": 10, "end": 20}, {"begin": 30, "end": 40}]}),
        encoding="utf-8",
    )
    out = tmp_path / "refined.json"
    args = [
        "refine",
        "--manifest", _fx("hillclimb", "manifest.json"),
        "--regions", str(regions),
        "--instructions", _fx("hillclimb", "instructions.json"),
        "--config", _fx("hillclimb", "config.json"),
        "--out", str(out),
    ]
    result = cli.invoke(main, args)
    assert result.exit_code == 4
    assert "2 regions but 1 instructions" in result.stderr


def test_refine_rejects_out_of_bounds_region(cli, tmp_path):
    regions = tmp_path / "regions.json"
    regions.write_text(json.dumps([{"begin": 10, "end": 999}]), encoding="utf-8")
    args = [
        "refine",
        "--manifest", _fx("hillclimb", "manifest.json"),
        "--regions", str(regions),
        "--instructions", _fx("hillclimb", "instructions.json"),
        "--config", _fx("hillclimb", "config.json"),
    ]
    result = cli.invoke(main, args)
    assert result.exit_code == 4
    assert "bad region record" in result.stderr


# ---------------------------------------------------------------------- run


def _run_stuball(cli, out_dir: str):
    return cli.invoke(
        main,
        [
            "run",
            "--task", "qa",
            "--dataset", _fx("stuball", "dataset.jsonl"),
            "--manifest-dir", _fx("stuball", "manifests"),
            "--out", out_dir,
            "--stub-all",
        ],
    )


def test_run_stub_all_is_byte_deterministic(cli, tmp_path, monkeypatch):
    first = tmp_path / "a"
    second = tmp_path / "b"
    res_a = _run_stuball(cli, str(first))
    # fresh cache for the second pass so reuse cannot mask a difference
    monkeypatch.setenv("EVENTLENS_CACHE_DIR", str(tmp_path / "cache2"))
    res_b = _run_stuball(cli, str(second))
    assert res_a.exit_code == 0, res_a.output
    assert res_b.exit_code == 0, res_b.output
    bytes_a = (first / "responses.json").read_bytes()
    assert bytes_a == (second / "responses.json").read_bytes()
    assert (first / "traces" / "s01.json").read_bytes() == (second / "traces" / "s01.json").read_bytes()
    payload = json.loads(bytes_a)
    assert payload["task"] == "qa"
    assert f"run {payload['run_id']} complete" in res_a.output
    assert len(payload["items"]) == 2
    for rec in payload["items"]:
        assert rec["predicted_index"] in (None, 0, 1, 2, 3)


def test_run_missing_dataset_is_data_error(cli, tmp_path):
    result = cli.invoke(
        main,
        [
            "run",
            "--task", "qa",
            "--dataset", _fx("stuball", "absent.jsonl"),
            "--manifest-dir", _fx("stuball", "manifests"),
            "--out", str(tmp_path / "out"),
            "--stub-all",
        ],
    )
    assert result.exit_code == 4


# --------------------------------------------------------------------- eval


def _write_qa_eval_inputs(tmp_path):
    """Four items across two types; three answered right, one wrong."""
    items = [
        {"video_id": "v1", "question_type": "Interaction", "question": "q0",
         "options": ["a", "b"], "answer_index": 0},
        {"video_id": "v1", "question_type": "Interaction", "question": "q1",
         "options": ["a", "b"], "answer_index": 1},
        {"video_id": "v2", "question_type": "Sequence", "question": "q2",
         "options": ["a", "b"], "answer_index": 0},
        {"video_id": "v2", "question_type": "Sequence", "question": "q3",
         "options": ["a", "b"], "answer_index": 1},
    ]
    dataset = tmp_path / "dataset.jsonl"
    dataset.write_text(
        "".join(json.dumps(it, sort_keys=True) + "\n" for it in items), encoding="utf-8"
    )
    preds = {"v1#0": 0, "v1#1": 1, "v2#2": 1, "v2#3": 1}
    responses = {
        "task": "qa",
        "run_id": "cafe01234567",
        "items": [{"item_id": k, "predicted_index": v} for k, v in preds.items()],
    }
    responses_path = tmp_path / "responses.json"
    responses_path.write_text(json.dumps(responses), encoding="utf-8")
    return str(dataset), str(responses_path)


def test_eval_qa_writes_report_csv_and_figure(cli, tmp_path):
    dataset, responses = _write_qa_eval_inputs(tmp_path)
    out = tmp_path / "out"
    result = cli.invoke(
        main,
        ["eval", "--task", "qa", "--dataset", dataset, "--responses", responses, "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    metrics = report["metrics"]
    assert metrics["per_type"]["Interaction"] == {"correct": 2, "total": 2, "accuracy": 1.0}
    assert metrics["per_type"]["Sequence"] == {"correct": 1, "total": 2, "accuracy": 0.5}
    assert metrics["mean_accuracy"] == 0.75
    assert metrics["n_items"] == 4
    assert metrics["n_ambiguous"] == 0
    assert f"eval {report['run_id']} complete" in result.output

    with open(out / "report.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    by_id = {r["item_id"]: r for r in rows}
    assert by_id["v2#2"]["correct"] == "0"
    assert by_id["v1#0"]["correct"] == "1"
    assert by_id["v1#1"]["question_type"] == "Interaction"

    figure = out / "figures" / "accuracy_by_type.png"
    assert figure.read_bytes()[:8] == PNG_MAGIC


def test_eval_no_figures_skips_rendering(cli, tmp_path):
    dataset, responses = _write_qa_eval_inputs(tmp_path)
    out = tmp_path / "flat"
    result = cli.invoke(
        main,
        ["eval", "--task", "qa", "--dataset", dataset, "--responses", responses,
         "--out", str(out), "--no-figures"],
    )
    assert result.exit_code == 0, result.output
    assert (out / "report.json").exists()
    assert (out / "report.csv").exists()
    assert not (out / "figures").exists()


def test_eval_ambiguous_predictions_counted(cli, tmp_path):
    dataset, responses_path = _write_qa_eval_inputs(tmp_path)
    doc = json.loads(open(responses_path, encoding="utf-8").read())
    doc["items"][0]["predicted_index"] = None
    with open(responses_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc))
    out = tmp_path / "amb"
    result = cli.invoke(
        main,
        ["eval", "--task", "qa", "--dataset", dataset, "--responses", responses_path,
         "--out", str(out), "--no-figures"],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["metrics"]["n_ambiguous"] == 1
    assert report["metrics"]["per_type"]["Interaction"]["correct"] == 1
    with open(out / "report.csv", newline="", encoding="utf-8") as fh:
        rows = {r["item_id"]: r for r in csv.DictReader(fh)}
    assert rows["v1#0"]["predicted_index"] == ""


def test_eval_dvc_perfect_predictions(cli, tmp_path):
    dataset_path = os.path.join(FIXTURES, "microdvc", "dataset.json")
    dataset = json.loads(open(dataset_path, encoding="utf-8").read())
    videos = {}
    for video_id, rec in dataset.items():
        videos[video_id] = [
            {"start_s": span[0], "end_s": span[1], "caption": sentence}
            for span, sentence in zip(rec["timestamps"], rec["sentences"])
        ]
    responses = tmp_path / "responses.json"
    responses.write_text(
        json.dumps({"task": "dvc", "run_id": "feed01234567", "videos": videos}),
        encoding="utf-8",
    )
    out = tmp_path / "out"
    result = cli.invoke(
        main,
        ["eval", "--task", "dvc", "--dataset", dataset_path,
         "--responses", str(responses), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    metrics = report["metrics"]
    assert metrics["n_videos"] == 3
    assert metrics["mean_precision"] == pytest.approx(1.0)
    assert metrics["mean_recall"] == pytest.approx(1.0)
    assert metrics["mean_f1"] == pytest.approx(1.0)
    with open(out / "report.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["video_id"] for r in rows] == ["d01", "d02", "d03"]
    assert all(float(r["f1"]) == pytest.approx(1.0) for r in rows)
    figure = out / "figures" / "matching_by_video.png"
    assert figure.read_bytes()[:8] == PNG_MAGIC


def test_eval_task_mismatch_is_data_error(cli, tmp_path):
    dataset, responses = _write_qa_eval_inputs(tmp_path)
    result = cli.invoke(
        main,
        ["eval", "--task", "dvc", "--dataset", dataset, "--responses", responses,
         "--out", str(tmp_path / "out")],
    )
    assert result.exit_code == 4
    assert "expected 'dvc'" in result.stderr


def test_eval_id_mismatch_is_data_error(cli, tmp_path):
    dataset, responses_path = _write_qa_eval_inputs(tmp_path)
    doc = json.loads(open(responses_path, encoding="utf-8").read())
    doc["items"] = doc["items"][:3]
    with open(responses_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc))
    result = cli.invoke(
        main,
        ["eval", "--task", "qa", "--dataset", dataset, "--responses", responses_path,
         "--out", str(tmp_path / "out"), "--no-figures"],
    )
    assert result.exit_code == 4
