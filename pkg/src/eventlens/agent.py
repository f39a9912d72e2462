"""Multi-step reasoning loop over event-level scene graphs and captions.

Per event and step: gather keyframe captions plus confidence-filtered
scene triples, ask the completion model to phrase the event as one
instruction sentence, refine the event boundaries against that sentence,
and stop once the boundary movement (in seconds) falls under the
convergence budget. With zero steps the events pass through untouched and
only the final sentence is produced.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .domain import EventRegion, FrameRef, VideoMeta, region_seconds
from .errors import AmbiguousAnswer, DataError, EmptyCompletion, MissingQuestion
from .manifest import FrameManifest, select_keyframes
from .providers import (
    CallRecord,
    CompletionParams,
    ProviderHub,
    SceneGraph,
    SceneTriple,
    filter_triples,
)
from .refinement import AlignmentScorer, RefinementTrace, S2Config, refine_event

PREAMBLE_QA = (
    "You are given events from one video, described frame by frame with captions "
    "and scene triples. Answer the question by choosing one option."
)
PREAMBLE_INSTRUCTION = (
    "You are given one event from a video, described frame by frame with captions "
    "and scene triples. State the activity shown in this event in one sentence."
)

MIN_OPTIONS = 2
MAX_OPTIONS = 26


@dataclass(frozen=True)
class AgentConfig:
    """Knobs for the reasoning loop."""

    T: int = 1
    delta_conv_s: float = 1.0
    n_keyframes: int = 4
    n_demos: int = 6
    tau: float = 0.4
    max_tokens: int = 256

    def __post_init__(self) -> None:
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.delta_conv_s < 0:
            raise ValueError("delta_conv_s must be >= 0")
        if self.n_keyframes < 1:
            raise ValueError("n_keyframes must be >= 1")
        if self.n_demos < 0:
            raise ValueError("n_demos must be >= 0")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError("tau must lie in [0, 1]")


@dataclass(frozen=True)
class FrameInfo:
    frame: FrameRef
    caption: str
    graph: SceneGraph


@dataclass(frozen=True)
class EventInfoBundle:
    """Everything the prompt renderer needs about one event."""

    video: VideoMeta
    region: EventRegion
    frames: tuple[FrameInfo, ...]
    degenerate: bool


@dataclass(frozen=True)
class Demonstration:
    """One worked example rendered into prompts ahead of the live video."""

    video_line: str
    frame_lines: tuple[str, ...]
    question: str | None
    options: tuple[str, ...]
    target: str


@dataclass
class StepTrace:
    """Provenance for one reasoning step of one event."""

    step: int
    instruction: str
    region_before: tuple[int, int]
    region_after: tuple[int, int]
    converged: bool
    prompt_digest: str
    degenerate_info: bool
    refinement: RefinementTrace | None = None
    calls: list[CallRecord] = field(default_factory=list)


@dataclass
class EventOutcome:
    region: EventRegion
    instruction: str
    steps: list[StepTrace]


def _fmt(value: float) -> str:
    i = int(value)
    return str(i) if value == i else str(value)


def _box_str(box) -> str:
    return "[" + ",".join(_fmt(float(c)) for c in box) + "]"


def _triple_str(t: SceneTriple) -> str:
    return f"{t.subject.label}{_box_str(t.subject.box)} {t.predicate} {t.object.label}{_box_str(t.object.box)}"


def render_frame_line(timestamp_s: float, caption: str, triples) -> str:
    shown = "; ".join(_triple_str(t) for t in triples) if triples else "(none)"
    return f"Frame @{_fmt(timestamp_s)}s | Caption: {caption} | Triples: {shown}"


def render_video_line(video: VideoMeta) -> str:
    return (
        f"Video {video.video_id} | duration {_fmt(video.duration_s)}s"
        f" | resolution {video.width}x{video.height}"
    )


def render_event_block(bundle: EventInfoBundle, ordinal: int) -> str:
    first = bundle.frames[0].frame.timestamp_s
    last = bundle.frames[-1].frame.timestamp_s
    lines = [f"Event {ordinal}: frames {_fmt(first)}s to {_fmt(last)}s"]
    for info in bundle.frames:
        lines.append(render_frame_line(info.frame.timestamp_s, info.caption, info.graph.triples))
    return "\n".join(lines)


def _render_options(options) -> str:
    letters = [chr(ord("A") + i) for i in range(len(options))]
    return "\n".join(f"{letter}. {opt}" for letter, opt in zip(letters, options))


def _render_demo(demo: Demonstration, task: str) -> str:
    lines = [demo.video_line, *demo.frame_lines]
    if task == "qa":
        lines.append(f"Question: {demo.question}")
        lines.append("Options:")
        lines.append(_render_options(demo.options))
        lines.append(f"Answer: {demo.target}")
    else:
        lines.append(f"Instruction: {demo.target}")
    return "\n".join(lines)


def build_prompt(
    task: str,
    bundles,
    demos=(),
    question: str | None = None,
    options=None,
) -> str:
    """Deterministic prompt bytes for either task.

    QA prompts require a question plus 2..26 options; the instruction
    prompt (also used per event for dense captioning) asks for a single
    sentence instead.
    """
    if task not in ("qa", "dvc"):
        raise ValueError(f"unknown task {task!r}")
    bundles = list(bundles)
    if not bundles:
        raise ValueError("at least one event bundle required")
    if task == "qa":
        if question is None or options is None:
            raise MissingQuestion("qa prompt needs question and options")
        options = list(options)
        if not (MIN_OPTIONS <= len(options) <= MAX_OPTIONS):
            raise MissingQuestion(f"option count must be {MIN_OPTIONS}..{MAX_OPTIONS}, got {len(options)}")

    parts = [PREAMBLE_QA if task == "qa" else PREAMBLE_INSTRUCTION]
    for demo in demos:
        parts.append(_render_demo(demo, task))
    body = [render_video_line(bundles[0].video)]
    for i, bundle in enumerate(bundles, start=1):
        body.append(render_event_block(bundle, i))
    parts.append("\n".join(body))
    if task == "qa":
        parts.append(f"Question: {question}\nOptions:\n{_render_options(options)}\nAnswer:")
    else:
        parts.append("Instruction:")
    return "\n\n".join(parts)


def gather_event_info(
    hub: ProviderHub,
    manifest: FrameManifest,
    region: EventRegion,
    cfg: AgentConfig,
) -> EventInfoBundle:
    """Caption and scene-parse the event's evenly spaced keyframes."""
    frames, degenerate = select_keyframes(manifest, region, cfg.n_keyframes)
    infos = []
    for frame in frames:
        caption = hub.caption(frame)
        graph = filter_triples(hub.scene_graph(frame, manifest.video), cfg.tau)
        infos.append(FrameInfo(frame=frame, caption=caption, graph=graph))
    return EventInfoBundle(
        video=manifest.video, region=region, frames=tuple(infos), degenerate=degenerate
    )


_MARKUP_PREFIXES = ("- ", "* ", "> ", "#")


def _clean_reply_line(line: str) -> str:
    s = line.strip()
    while s.startswith(_MARKUP_PREFIXES):
        for pre in _MARKUP_PREFIXES:
            if s.startswith(pre):
                s = s[len(pre):].strip()
                break
    s = s.strip("`").strip()
    if s.startswith("**") and s.endswith("**") and len(s) > 4:
        s = s[2:-2].strip()
    lowered = s.lower()
    for label in ("instruction:", "caption:", "sentence:"):
        if lowered.startswith(label):
            s = s[len(label):].strip()
            break
    return s


def first_content_line(text: str) -> str:
    for line in text.splitlines():
        cleaned = _clean_reply_line(line)
        if cleaned:
            return cleaned
    raise EmptyCompletion("completion had no usable line")


def propose_instruction(
    hub: ProviderHub,
    bundle: EventInfoBundle,
    demos,
    cfg: AgentConfig,
) -> tuple[str, str]:
    """Ask the completion model for the event's instruction sentence.

    Returns (instruction, prompt_digest).
    """
    prompt = build_prompt("dvc", [bundle], demos)
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    reply = hub.complete(prompt, CompletionParams(max_tokens=cfg.max_tokens, temperature=0.0))
    return first_content_line(reply), digest


def run_reasoning(
    hub: ProviderHub,
    manifest: FrameManifest,
    regions,
    cfg: AgentConfig,
    s2cfg: S2Config,
    demos=(),
) -> list[EventOutcome]:
    """Drive every event through up to T propose-refine steps."""
    scorer = AlignmentScorer(manifest.frames, hub.embed_image, hub.embed_text, s2cfg.m_v)
    outcomes = []
    for region in regions:
        outcomes.append(_reason_one(hub, manifest, region, cfg, s2cfg, demos, scorer))
    return outcomes


def _reason_one(
    hub: ProviderHub,
    manifest: FrameManifest,
    region: EventRegion,
    cfg: AgentConfig,
    s2cfg: S2Config,
    demos,
    scorer: AlignmentScorer,
) -> EventOutcome:
    current = region
    steps: list[StepTrace] = []
    instruction = ""

    if cfg.T == 0:
        recorder: list[CallRecord] = []
        hub.recorder = recorder
        try:
            bundle = gather_event_info(hub, manifest, current, cfg)
            instruction, digest = propose_instruction(hub, bundle, demos, cfg)
        finally:
            hub.recorder = None
        steps.append(
            StepTrace(
                step=0,
                instruction=instruction,
                region_before=(current.begin, current.end),
                region_after=(current.begin, current.end),
                converged=False,
                prompt_digest=digest,
                degenerate_info=bundle.degenerate,
                refinement=None,
                calls=recorder,
            )
        )
        return EventOutcome(region=current, instruction=instruction, steps=steps)

    for t in range(1, cfg.T + 1):
        recorder = []
        hub.recorder = recorder
        try:
            bundle = gather_event_info(hub, manifest, current, cfg)
            instruction, digest = propose_instruction(hub, bundle, demos, cfg)
            refined, rtrace = refine_event(current, instruction, scorer, hub.extract_tuples, s2cfg)
        finally:
            hub.recorder = None
        before_s = region_seconds(current, manifest.frames)
        after_s = region_seconds(refined, manifest.frames)
        moved = abs(after_s.start_s - before_s.start_s) + abs(after_s.end_s - before_s.end_s)
        converged = moved <= cfg.delta_conv_s
        steps.append(
            StepTrace(
                step=t,
                instruction=instruction,
                region_before=(current.begin, current.end),
                region_after=(refined.begin, refined.end),
                converged=converged,
                prompt_digest=digest,
                degenerate_info=bundle.degenerate,
                refinement=rtrace,
                calls=recorder,
            )
        )
        current = refined
        if converged:
            break
    return EventOutcome(region=current, instruction=instruction, steps=steps)


@dataclass(frozen=True)
class AnswerResult:
    index: int | None
    reply: str
    prompt_digest: str


def answer_question(
    hub: ProviderHub,
    bundles,
    question: str,
    options,
    demos,
    cfg: AgentConfig,
) -> AnswerResult:
    """One-shot answer over the final event bundles; see match_answer for parsing."""
    from .evaluation import match_answer  # local import, avoids a module cycle

    prompt = build_prompt("qa", bundles, demos, question=question, options=options)
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    reply = hub.complete(prompt, CompletionParams(max_tokens=cfg.max_tokens, temperature=0.0))
    try:
        index = match_answer(reply, list(options))
    except AmbiguousAnswer as exc:
        # Preserve what the model actually said for the caller's records.
        exc.reply = reply
        exc.prompt_digest = digest
        raise
    return AnswerResult(index=index, reply=reply, prompt_digest=digest)


def produce_dvc_response(outcomes, manifest: FrameManifest) -> list[dict]:
    """Dense-captioning payload: one record per event, sorted by start."""
    records = []
    for outcome in outcomes:
        span = region_seconds(outcome.region, manifest.frames)
        records.append(
            {"start_s": span.start_s, "end_s": span.end_s, "caption": outcome.instruction}
        )
    records.sort(key=lambda r: (r["start_s"], r["end_s"]))
    return records


def load_demos(path: str, task: str) -> list[Demonstration]:
    """Load rendered-example demonstrations from a fixture file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"demo file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"demo file not valid JSON: {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError("demo file must hold a list")
    demos = []
    for pos, rec in enumerate(raw):
        try:
            video = rec["video"]
            video_line = (
                f"Video {video['video_id']} | duration {_fmt(float(video['duration_s']))}s"
                f" | resolution {int(video['width'])}x{int(video['height'])}"
            )
            frame_lines = []
            for fr in rec["frames"]:
                triples = [_demo_triple(t) for t in fr.get("triples", [])]
                frame_lines.append(
                    render_frame_line(float(fr["timestamp_s"]), str(fr["caption"]), triples)
                )
            if task == "qa":
                demos.append(
                    Demonstration(
                        video_line=video_line,
                        frame_lines=tuple(frame_lines),
                        question=str(rec["question"]),
                        options=tuple(str(o) for o in rec["options"]),
                        target=str(rec["answer"]),
                    )
                )
            else:
                demos.append(
                    Demonstration(
                        video_line=video_line,
                        frame_lines=tuple(frame_lines),
                        question=None,
                        options=(),
                        target=str(rec["instruction"]),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad demo record {pos}: {exc}") from exc
    return demos


def _demo_triple(raw: dict) -> SceneTriple:
    from .providers import SceneEntity

    def entity(obj) -> SceneEntity:
        return SceneEntity(label=str(obj["label"]), box=tuple(float(c) for c in obj["box"]))

    return SceneTriple(
        subject=entity(raw["subject"]),
        predicate=str(raw["predicate"]),
        object=entity(raw["object"]),
        confidence=float(raw.get("confidence", 1.0)),
    )
