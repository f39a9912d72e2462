"""Command line entry points: segment, refine, run, eval.

Exit codes: 0 success, 2 configuration problem, 3 provider failure,
4 data problem.
"""

from __future__ import annotations

import functools
import json
import os
import sys

import click

from .config import RunConfig
from .domain import EventRegion, TimeRange
from .errors import (
    BadResponse,
    ConfigError,
    DataError,
    EmptyText,
    EventLensError,
    IdMismatch,
    InvalidFps,
    ManifestNotFound,
    ManifestParseError,
    ManifestValidationError,
    ProviderUnavailable,
    TooFewFrames,
)
from .evaluation import eval_qa, load_dvc_dataset, load_qa_dataset, soda_style_score
from .manifest import load_manifest
from .pipeline import (
    answer_items,
    build_hub,
    compute_run_id,
    dvc_records,
    file_digest,
    load_demo_set,
    manifest_path_for,
    refinement_record,
    region_record,
    resolve_embeddings,
    run_video,
    state_record,
    write_json_atomic,
)
from .refinement import AlignmentScorer, refine_event
from .reporting import (
    ensure_dir,
    render_dvc_figure,
    render_qa_figure,
    write_dvc_csv,
    write_qa_csv,
)
from .segmentation import run_s1_detailed

EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_DATA = 4

_CONFIG_ERRORS = (ConfigError,)
_PROVIDER_ERRORS = (ProviderUnavailable, BadResponse)
_DATA_ERRORS = (
    DataError,
    IdMismatch,
    ManifestNotFound,
    ManifestParseError,
    ManifestValidationError,
    InvalidFps,
    TooFewFrames,
    EmptyText,
)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _CONFIG_ERRORS as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except _PROVIDER_ERRORS as exc:
            click.echo(f"provider error: {exc}", err=True)
            sys.exit(EXIT_PROVIDER)
        except _DATA_ERRORS as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except EventLensError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _common_overrides(n_events, t_steps, frames, shots, s2_mode, seed):
    overrides: dict[str, object] = {}
    if n_events is not None:
        overrides["n_events"] = n_events
    if t_steps is not None:
        overrides["agent.T"] = t_steps
    if frames is not None:
        overrides["agent.n_keyframes"] = frames
    if shots is not None:
        overrides["agent.n_demos"] = shots
    if s2_mode is not None:
        overrides["s2.mode"] = s2_mode
    if seed is not None:
        overrides["seed"] = seed
    return overrides


def _emit(payload: dict, out: str | None) -> None:
    if out:
        write_json_atomic(out, payload)
    else:
        click.echo(json.dumps(payload, sort_keys=True, indent=2))


@click.group()
def main() -> None:
    """Event-level video comprehension engine."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--n-events", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--stub-all", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default=None)
@_exit_codes
def segment(manifest_path, config_path, n_events, seed, stub_all, out) -> None:
    """Initialize candidate event regions for one video."""
    cfg = RunConfig.load(config_path, _common_overrides(n_events, None, None, None, None, seed))
    if stub_all:
        cfg.force_stubs()
    manifest = load_manifest(manifest_path)
    hub = build_hub(cfg)
    embeddings = resolve_embeddings(manifest, hub)
    states = run_s1_detailed(embeddings, cfg.n_events("qa"), cfg.s1())
    payload = {
        "video_id": manifest.video.video_id,
        "config": cfg.snapshot(),
        "regions": [region_record(s.region, manifest) for s in states],
        "states": [state_record(s, manifest) for s in states],
    }
    _emit(payload, out)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--regions", "regions_path", required=True, type=click.Path())
@click.option("--instructions", "instructions_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--s2-mode", type=click.Choice(["trajectories", "symmetric"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--stub-all", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default=None)
@_exit_codes
def refine(manifest_path, regions_path, instructions_path, config_path, s2_mode, seed, stub_all, out) -> None:
    """Refine given regions against given instruction sentences."""
    cfg = RunConfig.load(config_path, _common_overrides(None, None, None, None, s2_mode, seed))
    if stub_all:
        cfg.force_stubs()
    manifest = load_manifest(manifest_path)
    regions = _read_regions(regions_path, manifest.n_frames)
    instructions = _read_instructions(instructions_path)
    if len(instructions) != len(regions):
        raise DataError(
            f"{len(regions)} regions but {len(instructions)} instructions"
        )
    hub = build_hub(cfg)
    s2cfg = cfg.s2()
    scorer = AlignmentScorer(manifest.frames, hub.embed_image, hub.embed_text, s2cfg.m_v)
    refined = []
    traces = []
    for region, instruction in zip(regions, instructions):
        final, trace = refine_event(region, instruction, scorer, hub.extract_tuples, s2cfg)
        refined.append(region_record(final, manifest))
        traces.append(refinement_record(trace))
    payload = {
        "video_id": manifest.video.video_id,
        "config": cfg.snapshot(),
        "regions": refined,
        "traces": traces,
    }
    _emit(payload, out)


def _read_regions(path: str, n_frames: int) -> list[EventRegion]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"regions file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"regions file not valid JSON: {exc}") from exc
    rows = doc["regions"] if isinstance(doc, dict) and "regions" in doc else doc
    if not isinstance(rows, list) or not rows:
        raise DataError("regions file must hold a non-empty list")
    out = []
    for rec in rows:
        try:
            region = EventRegion(begin=int(rec["begin"]), end=int(rec["end"]))
            region.clamp_check(n_frames)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad region record {rec!r}: {exc}") from exc
        out.append(region)
    return out


def _read_instructions(path: str) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"instructions file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"instructions file not valid JSON: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise DataError("instructions file must hold a non-empty list of strings")
    if not all(isinstance(s, str) and s.strip() for s in doc):
        raise DataError("instructions must be non-empty strings")
    return [s for s in doc]


@main.command()
@click.option("--task", type=click.Choice(["qa", "dvc"]), required=True)
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--manifest-dir", "manifest_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--n-events", type=int, default=None)
@click.option("--T", "t_steps", type=int, default=None)
@click.option("--frames", type=int, default=None)
@click.option("--shots", type=int, default=None)
@click.option("--s2-mode", type=click.Choice(["trajectories", "symmetric"]), default=None)
@click.option("--true-proposals", "true_proposals", type=click.Path(), default=None)
@click.option("--stub-all", is_flag=True, default=False)
@click.option("--seed", type=int, default=None)
@_exit_codes
def run(task, dataset_path, manifest_dir, out_dir, config_path, n_events, t_steps,
        frames, shots, s2_mode, true_proposals, stub_all, seed) -> None:
    """Full pipeline over a dataset: initialize, reason, respond."""
    cfg = RunConfig.load(config_path, _common_overrides(n_events, t_steps, frames, shots, s2_mode, seed))
    if stub_all:
        cfg.force_stubs()
    hub = build_hub(cfg)
    snapshot = cfg.snapshot()
    run_id = compute_run_id(snapshot, task, file_digest(dataset_path) if os.path.exists(dataset_path) else dataset_path)
    ensure_dir(out_dir)
    traces_dir = ensure_dir(os.path.join(out_dir, "traces"))
    instruction_demos = load_demo_set(cfg, "instruction")

    if task == "qa":
        items = load_qa_dataset(dataset_path)
        qa_demos = load_demo_set(cfg, "qa")
        by_video: dict[str, list] = {}
        order: list[str] = []
        for item in items:
            if item.video_id not in by_video:
                by_video[item.video_id] = []
                order.append(item.video_id)
            by_video[item.video_id].append(item)
        all_records = []
        for video_id in order:
            manifest = load_manifest(manifest_path_for(manifest_dir, video_id))
            video_run = run_video(manifest, hub, cfg, task, instruction_demos, true_proposals)
            write_json_atomic(
                os.path.join(traces_dir, f"{video_id}.json"), video_run.trace(snapshot)
            )
            all_records.extend(answer_items(video_run, hub, cfg, by_video[video_id], qa_demos))
        payload = {
            "task": "qa",
            "run_id": run_id,
            "config": snapshot,
            "items": all_records,
        }
    else:
        videos = load_dvc_dataset(dataset_path)
        responses: dict[str, list] = {}
        for video_id in sorted(videos):
            manifest = load_manifest(manifest_path_for(manifest_dir, video_id))
            video_run = run_video(manifest, hub, cfg, task, instruction_demos, true_proposals)
            write_json_atomic(
                os.path.join(traces_dir, f"{video_id}.json"), video_run.trace(snapshot)
            )
            responses[video_id] = dvc_records(video_run)
        payload = {
            "task": "dvc",
            "run_id": run_id,
            "config": snapshot,
            "videos": responses,
        }
    write_json_atomic(os.path.join(out_dir, "responses.json"), payload)
    click.echo(f"run {run_id} complete: {os.path.join(out_dir, 'responses.json')}")


@main.command()
@click.option("--task", type=click.Choice(["qa", "dvc"]), required=True)
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--responses", "responses_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--no-figures", is_flag=True, default=False)
@_exit_codes
def eval(task, dataset_path, responses_path, out_dir, config_path, no_figures) -> None:
    """Score a responses file against its dataset; write report, CSV, figures."""
    cfg = RunConfig.load(config_path)
    responses = _read_responses(responses_path, task)
    ensure_dir(out_dir)
    run_id = compute_run_id(cfg.snapshot(), task, file_digest(dataset_path), file_digest(responses_path))

    if task == "qa":
        items = load_qa_dataset(dataset_path)
        predictions = {
            rec["item_id"]: rec.get("predicted_index") for rec in responses["items"]
        }
        result = eval_qa(items, predictions)
        item_rows = []
        answer_map = {it.item_id: it for it in items}
        for rec in responses["items"]:
            item = answer_map[rec["item_id"]]
            pred = rec.get("predicted_index")
            item_rows.append(
                {
                    "item_id": item.item_id,
                    "video_id": item.video_id,
                    "question_type": item.question_type,
                    "predicted_index": "" if pred is None else pred,
                    "answer_index": item.answer_index,
                    "correct": int(pred == item.answer_index),
                }
            )
        report = {
            "task": "qa",
            "run_id": run_id,
            "config": cfg.snapshot(),
            "metrics": {
                "per_type": {
                    t: {
                        "correct": s.correct,
                        "total": s.total,
                        "accuracy": s.accuracy,
                    }
                    for t, s in sorted(result.per_type.items())
                },
                "mean_accuracy": result.mean_accuracy,
                "n_items": result.n_items,
                "n_ambiguous": result.n_ambiguous,
            },
        }
        write_json_atomic(os.path.join(out_dir, "report.json"), report)
        write_qa_csv(os.path.join(out_dir, "report.csv"), item_rows)
        if not no_figures:
            figures = ensure_dir(os.path.join(out_dir, "figures"))
            render_qa_figure(os.path.join(figures, "accuracy_by_type.png"), result)
    else:
        dataset = load_dvc_dataset(dataset_path)
        video_rows = []
        for video_id in sorted(dataset):
            refs = list(zip(dataset[video_id].spans, dataset[video_id].sentences))
            preds_raw = responses["videos"].get(video_id, [])
            preds = [
                (TimeRange(float(r["start_s"]), float(r["end_s"])), str(r["caption"]))
                for r in preds_raw
            ]
            scored = soda_style_score(preds, refs)
            video_rows.append(
                {
                    "video_id": video_id,
                    "n_predictions": len(preds),
                    "n_references": len(refs),
                    "precision": scored.precision,
                    "recall": scored.recall,
                    "f1": scored.f1,
                }
            )
        n = len(video_rows)
        mean_p = sum(r["precision"] for r in video_rows) / n
        mean_r = sum(r["recall"] for r in video_rows) / n
        mean_f = sum(r["f1"] for r in video_rows) / n
        report = {
            "task": "dvc",
            "run_id": run_id,
            "config": cfg.snapshot(),
            "metrics": {
                "mean_precision": mean_p,
                "mean_recall": mean_r,
                "mean_f1": mean_f,
                "n_videos": n,
                "per_video": video_rows,
            },
        }
        write_json_atomic(os.path.join(out_dir, "report.json"), report)
        write_dvc_csv(os.path.join(out_dir, "report.csv"), video_rows)
        if not no_figures:
            figures = ensure_dir(os.path.join(out_dir, "figures"))
            render_dvc_figure(os.path.join(figures, "matching_by_video.png"), video_rows, mean_f)
    click.echo(f"eval {run_id} complete: {os.path.join(out_dir, 'report.json')}")


def _read_responses(path: str, task: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"responses file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"responses file not valid JSON: {exc}") from exc
    if doc.get("task") != task:
        raise DataError(f"responses file is for task {doc.get('task')!r}, expected {task!r}")
    key = "items" if task == "qa" else "videos"
    if key not in doc:
        raise DataError(f"responses file missing {key!r}")
    return doc


if __name__ == "__main__":
    main()
