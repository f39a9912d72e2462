"""Stage 2: instruction-guided boundary refinement.

The instruction is decomposed into atomic assertions; a region is scored by
optimally matching assertion embeddings against the embeddings of evenly
spaced keyframes and summing the matched cosines (no normalization). Greedy
searches then move one boundary at a time, keeping only strict score
increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assignment import Assignment, solve_max_assignment
from .domain import EventRegion, FrameRef, cosine_similarity
from .errors import EmptyText, NoAssertions, ZeroVector
from .manifest import select_keyframe_indices

ALLOWED_KEYFRAME_COUNTS = (3, 4, 5, 6)


@dataclass(frozen=True)
class S2Config:
    """Knobs for the refinement stage."""

    m_v: int = 5
    stride: int = 5
    max_moves: int = 20
    min_len: int | None = None  # default m_v - 1
    mode: str = "trajectories"  # or "symmetric"

    def __post_init__(self) -> None:
        if self.m_v not in ALLOWED_KEYFRAME_COUNTS:
            raise ValueError(f"m_v must be one of {ALLOWED_KEYFRAME_COUNTS}, got {self.m_v}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.max_moves < 0:
            raise ValueError("max_moves must be >= 0")
        if self.mode not in ("trajectories", "symmetric"):
            raise ValueError(f"unknown s2 mode {self.mode!r}")

    @property
    def effective_min_len(self) -> int:
        return self.m_v - 1 if self.min_len is None else self.min_len


def decompose_instruction(instruction: str, extract: Callable[[str], list]) -> list[str]:
    """Split an instruction into assertion strings via open extraction.

    Each extracted tuple becomes one assertion: its parts joined by single
    spaces. Zero tuples raises NoAssertions.
    """
    if not instruction or not instruction.strip():
        raise EmptyText("instruction is empty")
    tuples = extract(instruction)
    assertions = []
    for parts in tuples:
        cleaned = [str(p).strip() for p in parts if str(p).strip()]
        if len(cleaned) >= 2:
            assertions.append(" ".join(cleaned))
    if not assertions:
        raise NoAssertions(f"no assertions extracted from {instruction!r}")
    return assertions


@dataclass(frozen=True)
class ScoredAlignment:
    """Score of one region against a fixed assertion list."""

    xi: float
    assignment: Assignment
    keyframe_indices: tuple[int, ...]
    degenerate: bool


class AlignmentScorer:
    """Scores regions against assertions, memoizing every embedding.

    The memo keys frames by index and assertions by text, so repeated
    scorings during a greedy search never re-embed anything.
    """

    def __init__(
        self,
        frames: Sequence[FrameRef],
        embed_frame: Callable[[FrameRef], np.ndarray],
        embed_text: Callable[[str], np.ndarray],
        m_v: int,
    ) -> None:
        self.frames = list(frames)
        self._embed_frame = embed_frame
        self._embed_text = embed_text
        self.m_v = m_v
        self._frame_memo: dict[int, np.ndarray] = {}
        self._text_memo: dict[str, np.ndarray] = {}
        self.evaluations = 0

    def frame_vec(self, index: int) -> np.ndarray:
        if index not in self._frame_memo:
            self._frame_memo[index] = self._embed_frame(self.frames[index])
        return self._frame_memo[index]

    def text_vec(self, text: str) -> np.ndarray:
        if text not in self._text_memo:
            self._text_memo[text] = self._embed_text(text)
        return self._text_memo[text]

    def score_alignment(self, assertions: Sequence[str], region: EventRegion) -> ScoredAlignment:
        if not assertions:
            raise NoAssertions("cannot score an empty assertion list")
        region.clamp_check(len(self.frames))
        indices, degenerate = select_keyframe_indices(region, self.m_v)
        rows = [self.text_vec(a) for a in assertions]
        cols = [self.frame_vec(i) for i in indices]
        matrix = np.array([[cosine_similarity(r, c) for c in cols] for r in rows], dtype=np.float64)
        result = solve_max_assignment(matrix)
        self.evaluations += 1
        return ScoredAlignment(
            xi=result.total,
            assignment=result,
            keyframe_indices=tuple(indices),
            degenerate=degenerate,
        )


@dataclass(frozen=True)
class MoveRecord:
    """One tentative boundary move and its outcome."""

    trajectory: str
    region: tuple[int, int]
    xi_before: float
    xi_after: float
    accepted: bool


@dataclass
class RefinementTrace:
    """Full account of one refinement run."""

    initial_region: tuple[int, int]
    final_region: tuple[int, int]
    initial_xi: float
    final_xi: float
    assertions: list[str]
    fallback_used: bool
    mode: str
    moves: list[MoveRecord] = field(default_factory=list)
    evaluations: int = 0
    no_signal: bool = False


def _resolve_assertions(instruction: str, extract: Callable[[str], list]) -> tuple[list[str], bool]:
    try:
        return decompose_instruction(instruction, extract), False
    except NoAssertions:
        # Fall back to treating the whole instruction as a single assertion.
        return [instruction.strip()], True


def refine_event(
    region: EventRegion,
    instruction: str,
    scorer: AlignmentScorer,
    extract: Callable[[str], list],
    cfg: S2Config,
) -> tuple[EventRegion, RefinementTrace]:
    """Greedy boundary search maximizing the alignment score.

    Trajectories mode runs four passes (begin leftward, begin rightward,
    end leftward, end rightward); symmetric mode widens both boundaries in
    lockstep. Every accepted move strictly increases the score.
    """
    n = len(scorer.frames)
    region.clamp_check(n)

    def unchanged() -> tuple[EventRegion, RefinementTrace]:
        trace = RefinementTrace(
            initial_region=(region.begin, region.end),
            final_region=(region.begin, region.end),
            initial_xi=0.0,
            final_xi=0.0,
            assertions=[],
            fallback_used=False,
            mode=cfg.mode,
            no_signal=True,
        )
        return region, trace

    if not instruction or not instruction.strip():
        return unchanged()
    assertions, fallback = _resolve_assertions(instruction, extract)

    start_evals = scorer.evaluations
    current = region
    try:
        xi = scorer.score_alignment(assertions, current).xi
    except ZeroVector:
        if fallback:
            # The whole-instruction fallback produced no usable signal.
            return unchanged()
        raise
    min_len = min(cfg.effective_min_len, region.end - region.begin)
    trace = RefinementTrace(
        initial_region=(region.begin, region.end),
        final_region=(region.begin, region.end),
        initial_xi=xi,
        final_xi=xi,
        assertions=list(assertions),
        fallback_used=fallback,
        mode=cfg.mode,
    )

    def try_moves(name: str, step: Callable[[EventRegion], EventRegion | None]) -> None:
        nonlocal current, xi
        for _ in range(cfg.max_moves):
            candidate = step(current)
            if candidate is None or candidate == current:
                break
            scored = scorer.score_alignment(assertions, candidate)
            accepted = scored.xi > xi
            trace.moves.append(
                MoveRecord(
                    trajectory=name,
                    region=(candidate.begin, candidate.end),
                    xi_before=xi,
                    xi_after=scored.xi,
                    accepted=accepted,
                )
            )
            if not accepted:
                break
            current = candidate
            xi = scored.xi

    if cfg.mode == "trajectories":
        try_moves("begin_left", lambda r: EventRegion(max(0, r.begin - cfg.stride), r.end))
        try_moves("begin_right", lambda r: EventRegion(min(r.begin + cfg.stride, r.end - min_len), r.end))
        try_moves("end_left", lambda r: EventRegion(r.begin, max(r.end - cfg.stride, r.begin + min_len)))
        try_moves("end_right", lambda r: EventRegion(r.begin, min(r.end + cfg.stride, n - 1)))
    else:
        try_moves(
            "symmetric",
            lambda r: EventRegion(max(0, r.begin - cfg.stride), min(r.end + cfg.stride, n - 1)),
        )

    trace.final_region = (current.begin, current.end)
    trace.final_xi = xi
    trace.evaluations = scorer.evaluations - start_evals
    return current, trace
