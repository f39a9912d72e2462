"""Orchestration shared by the CLI commands: wiring providers, running the
per-video pipeline, and serializing traces and responses."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .agent import (
    AgentConfig,
    EventOutcome,
    StepTrace,
    answer_question,
    gather_event_info,
    load_demos,
    produce_dvc_response,
    run_reasoning,
)
from .cache import ResponseCache, canonical_json
from .config import PROVIDER_TOOLS, RunConfig
from .domain import EventRegion, region_seconds
from .errors import AmbiguousAnswer, DataError
from .evaluation import QAItem
from .manifest import FrameManifest, load_manifest
from .providers import ProviderHub
from .refinement import RefinementTrace
from .segmentation import RegionState, run_s1_detailed

TOOL_TO_KIND = {
    "embed_image": "embed_image",
    "embed_text": "embed_text",
    "caption": "caption",
    "scene_graph": "scene_graph",
    "oie": "oie",
    "llm": "complete",
}


def build_hub(cfg: RunConfig) -> ProviderHub:
    configs = {TOOL_TO_KIND[tool]: cfg.provider(tool) for tool in PROVIDER_TOOLS}
    tables_raw = cfg.stub_tables()
    tables = {TOOL_TO_KIND[tool]: tables_raw[tool] for tool in tables_raw if tool in TOOL_TO_KIND}
    cache_dir = cfg.cache_dir()
    cache = ResponseCache(cache_dir) if cache_dir else None
    return ProviderHub(configs=configs, stub_tables=tables, cache=cache, seed=cfg.seed())


def resolve_embeddings(manifest: FrameManifest, hub: ProviderHub) -> list[np.ndarray]:
    return [hub.embed_image(frame) for frame in manifest.frames]


def region_record(region: EventRegion, manifest: FrameManifest) -> dict:
    span = region_seconds(region, manifest.frames)
    return {
        "begin": region.begin,
        "end": region.end,
        "begin_s": span.start_s,
        "end_s": span.end_s,
    }


def state_record(state: RegionState, manifest: FrameManifest) -> dict:
    rec = region_record(state.region, manifest)
    rec["epochs"] = state.epochs
    rec["stable"] = state.stable
    return rec


def refinement_record(trace: RefinementTrace) -> dict:
    return {
        "initial_region": list(trace.initial_region),
        "final_region": list(trace.final_region),
        "initial_xi": trace.initial_xi,
        "final_xi": trace.final_xi,
        "assertions": list(trace.assertions),
        "fallback_used": trace.fallback_used,
        "mode": trace.mode,
        "no_signal": trace.no_signal,
        "evaluations": trace.evaluations,
        "moves": [
            {
                "trajectory": m.trajectory,
                "region": list(m.region),
                "xi_before": m.xi_before,
                "xi_after": m.xi_after,
                "accepted": m.accepted,
            }
            for m in trace.moves
        ],
    }


def step_record(step: StepTrace) -> dict:
    return {
        "step": step.step,
        "instruction": step.instruction,
        "region_before": list(step.region_before),
        "region_after": list(step.region_after),
        "converged": step.converged,
        "prompt_digest": step.prompt_digest,
        "degenerate_info": step.degenerate_info,
        "refinement": None if step.refinement is None else refinement_record(step.refinement),
        "calls": [
            {"kind": c.kind, "digest": c.digest, "origin": c.origin} for c in step.calls
        ],
    }


def outcome_record(outcome: EventOutcome, manifest: FrameManifest) -> dict:
    return {
        "region": region_record(outcome.region, manifest),
        "instruction": outcome.instruction,
        "steps": [step_record(s) for s in outcome.steps],
    }


def write_json_atomic(path: str, obj) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def compute_run_id(snapshot: dict, *extra: str) -> str:
    h = hashlib.sha256()
    h.update(canonical_json(snapshot))
    for item in extra:
        h.update(b"\x00")
        h.update(item.encode("utf-8"))
    return h.hexdigest()[:12]


def manifest_path_for(manifest_dir: str, video_id: str) -> str:
    path = os.path.join(manifest_dir, f"{video_id}.json")
    if not os.path.exists(path):
        raise DataError(f"no manifest for video {video_id!r} under {manifest_dir}")
    return path


def load_true_proposals(path: str, manifest: FrameManifest) -> list[RegionState] | None:
    """Map second-valued ground-truth spans onto sampled frame indices."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"true-proposals file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"true-proposals file not valid JSON: {exc}") from exc
    spans = doc.get(manifest.video.video_id)
    if spans is None:
        return None
    stamps = [f.timestamp_s for f in manifest.frames]

    def nearest(t: float) -> int:
        return min(range(len(stamps)), key=lambda i: (abs(stamps[i] - t), i))

    states = []
    for pair in spans:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise DataError(f"true proposal must be [start, end], got {pair!r}")
        b, e = nearest(float(pair[0])), nearest(float(pair[1]))
        if b > e:
            raise DataError(f"true proposal reversed: {pair!r}")
        states.append(RegionState(region=EventRegion(b, e), epochs=0, stable=True))
    if not states:
        raise DataError(f"true-proposals entry for {manifest.video.video_id!r} is empty")
    return states


class VideoRun:
    """Result of pushing one video through initialization and reasoning."""

    def __init__(
        self,
        manifest: FrameManifest,
        states: list[RegionState],
        outcomes: list[EventOutcome],
    ) -> None:
        self.manifest = manifest
        self.states = states
        self.outcomes = outcomes

    def trace(self, snapshot: dict) -> dict:
        return {
            "video_id": self.manifest.video.video_id,
            "config": snapshot,
            "s1_regions": [state_record(s, self.manifest) for s in self.states],
            "events": [outcome_record(o, self.manifest) for o in self.outcomes],
        }


def run_video(
    manifest: FrameManifest,
    hub: ProviderHub,
    cfg: RunConfig,
    task: str,
    instruction_demos,
    true_proposals_path: str | None = None,
) -> VideoRun:
    agent_cfg = cfg.agent(task)
    states: list[RegionState] | None = None
    if true_proposals_path is not None:
        states = load_true_proposals(true_proposals_path, manifest)
    if states is None:
        embeddings = resolve_embeddings(manifest, hub)
        states = run_s1_detailed(embeddings, cfg.n_events(task), cfg.s1())
    demos = list(instruction_demos)[: agent_cfg.n_demos]
    outcomes = run_reasoning(
        hub, manifest, [s.region for s in states], agent_cfg, cfg.s2(), demos
    )
    return VideoRun(manifest=manifest, states=states, outcomes=outcomes)


def answer_items(
    run: VideoRun,
    hub: ProviderHub,
    cfg: RunConfig,
    items: list[QAItem],
    qa_demos,
) -> list[dict]:
    agent_cfg = cfg.agent("qa")
    bundles = [
        gather_event_info(hub, run.manifest, outcome.region, agent_cfg)
        for outcome in run.outcomes
    ]
    demos = list(qa_demos)[: agent_cfg.n_demos]
    records = []
    for item in items:
        try:
            result = answer_question(
                hub, bundles, item.question, list(item.options), demos, agent_cfg
            )
            predicted: int | None = result.index
            reply = result.reply
            digest = result.prompt_digest
        except AmbiguousAnswer as exc:
            predicted = None
            reply = getattr(exc, "reply", str(exc))
            digest = getattr(exc, "prompt_digest", "")
        records.append(
            {
                "item_id": item.item_id,
                "video_id": item.video_id,
                "question_type": item.question_type,
                "predicted_index": predicted,
                "answer_index": item.answer_index,
                "reply": reply,
                "prompt_digest": digest,
            }
        )
    return records


def dvc_records(run: VideoRun) -> list[dict]:
    return produce_dvc_response(run.outcomes, run.manifest)


def load_demo_set(cfg: RunConfig, purpose: str) -> list:
    path = cfg.demo_path(purpose)
    if path is None:
        return []
    task = "qa" if purpose == "qa" else "dvc"
    return load_demos(path, task)
