"""Stage 1: event initialization by moving-average region growing.

Each candidate event starts as a single center frame. Per epoch the region's
mean embedding is computed once, then the region absorbs adjacent frames
(left side first, then right) while their cosine against that mean stays at
or above the threshold. Epochs repeat until a fixpoint or the epoch cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import EventRegion, cosine_similarity, mean_embedding, meets_threshold, round_half_up
from .errors import TooFewFrames


@dataclass(frozen=True)
class S1Config:
    """Knobs for the initialization stage."""

    delta1: float = 0.95
    max_epochs: int = 10

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta1 <= 1.0):
            raise ValueError(f"delta1 must lie in [0, 1], got {self.delta1}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class RegionState:
    """One candidate event after growing: where it ended up and how."""

    region: EventRegion
    epochs: int
    stable: bool


def init_centers(n_frames: int, n_events: int) -> list[int]:
    """Place n_events seed frames evenly across the interior of the video.

    Centers are clamped away from the first and last frame; collisions after
    rounding shift right while room remains, keeping the list strictly
    increasing.
    """
    if n_frames < 3:
        raise TooFewFrames(f"need at least 3 frames, got {n_frames}")
    if n_events < 1 or n_events > n_frames - 2:
        raise TooFewFrames(f"cannot place {n_events} centers in {n_frames} frames")
    centers: list[int] = []
    for k in range(1, n_events + 1):
        c = round_half_up(k * (n_frames - 1) / (n_events + 1))
        c = min(max(c, 1), n_frames - 2)
        while centers and c <= centers[-1]:
            c += 1
        if c > n_frames - 2:
            raise TooFewFrames(f"center placement overflow with {n_events} events in {n_frames} frames")
        centers.append(c)
    return centers


def expand_epoch(embeddings: list[np.ndarray], region: EventRegion, delta1: float) -> EventRegion:
    """One growing pass: fixed mean, absorb left then right until a miss."""
    center = mean_embedding([embeddings[i] for i in range(region.begin, region.end + 1)])
    b, e = region.begin, region.end
    while b > 0 and meets_threshold(cosine_similarity(embeddings[b - 1], center), delta1):
        b -= 1
    n = len(embeddings)
    while e < n - 1 and meets_threshold(cosine_similarity(embeddings[e + 1], center), delta1):
        e += 1
    return EventRegion(begin=b, end=e)


def grow_region(embeddings: list[np.ndarray], center: int, cfg: S1Config) -> RegionState:
    region = EventRegion(begin=center, end=center)
    for epoch in range(1, cfg.max_epochs + 1):
        grown = expand_epoch(embeddings, region, cfg.delta1)
        if grown == region:
            return RegionState(region=region, epochs=epoch, stable=True)
        region = grown
    return RegionState(region=region, epochs=cfg.max_epochs, stable=False)


def run_s1_detailed(embeddings: list[np.ndarray], n_events: int, cfg: S1Config) -> list[RegionState]:
    """Grow every candidate event; results sorted by region begin."""
    centers = init_centers(len(embeddings), n_events)
    states = [grow_region(embeddings, c, cfg) for c in centers]
    return sorted(states, key=lambda s: (s.region.begin, s.region.end))


def run_s1(embeddings: list[np.ndarray], n_events: int, cfg: S1Config) -> list[EventRegion]:
    return [s.region for s in run_s1_detailed(embeddings, n_events, cfg)]
