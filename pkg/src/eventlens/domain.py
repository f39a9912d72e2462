"""Core value types and the small numeric kernel everything else builds on.

Embeddings are stored as float32 arrays; similarity arithmetic is done in
float64. Comparisons against configured thresholds use a fixed absolute
tolerance so float32 storage never flips a boundary decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonFiniteEntry, ZeroVector

# Absolute slack applied whenever a similarity is compared to a threshold.
THRESHOLD_TOL = 1e-6


def as_embedding(values) -> np.ndarray:
    """Validate and store a vector as float32.

    Rejects empty vectors and non-finite entries.
    """
    arr = np.asarray(values, dtype=np.float32)
    if arr.size == 0:
        raise EmptyInput("embedding must not be empty")
    if arr.ndim != 1:
        raise DimensionMismatch(f"embedding must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntry("embedding contains non-finite entries")
    return arr


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, computed in float64."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dims differ: {a.shape} vs {b.shape}")
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    na = float(np.linalg.norm(af))
    nb = float(np.linalg.norm(bf))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero-magnitude vector")
    return float(np.dot(af, bf) / (na * nb))


def mean_embedding(vectors) -> np.ndarray:
    """Componentwise mean of a non-empty list of same-dim vectors (float32)."""
    vecs = list(vectors)
    if not vecs:
        raise EmptyInput("mean over zero vectors")
    dim = np.asarray(vecs[0]).shape
    for v in vecs[1:]:
        if np.asarray(v).shape != dim:
            raise DimensionMismatch("mean over mixed-dim vectors")
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in vecs])
    return stacked.mean(axis=0).astype(np.float32)


def meets_threshold(value: float, threshold: float) -> bool:
    """value >= threshold under the shared absolute tolerance."""
    return value >= threshold - THRESHOLD_TOL


def round_half_up(x: float) -> int:
    # Deterministic tie rule for index arithmetic; x is always >= 0 here.
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class TimeRange:
    """Half-agnostic second-valued interval; start <= end."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValueError("time range must be finite")
        if self.start_s > self.end_s:
            raise ValueError(f"start {self.start_s} after end {self.end_s}")

    @property
    def length(self) -> float:
        return self.end_s - self.start_s


def tiou(p: TimeRange, q: TimeRange) -> float:
    """Temporal intersection over union of two second ranges.

    Two identical zero-length ranges score 1; differing ranges with a
    zero-length union score 0.
    """
    inter = min(p.end_s, q.end_s) - max(p.start_s, q.start_s)
    inter = max(0.0, inter)
    union = (p.length + q.length) - inter
    if union <= 0.0:
        return 1.0 if (p.start_s == q.start_s and p.end_s == q.end_s) else 0.0
    return inter / union


@dataclass(frozen=True)
class VideoMeta:
    """Static facts about one source video."""

    video_id: str
    duration_s: float
    fps_native: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError("duration_s must be positive")
        if not (math.isfinite(self.fps_native) and self.fps_native > 0):
            raise ValueError("fps_native must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")


@dataclass(frozen=True)
class FrameRef:
    """One sampled frame: position in the sampled sequence plus provenance.

    `embedding` is optional; when present the image-embedding provider
    returns it without a remote call.
    """

    index: int
    timestamp_s: float
    source: str
    embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        if not math.isfinite(self.timestamp_s) or self.timestamp_s < 0:
            raise ValueError("timestamp_s must be finite and >= 0")


@dataclass(frozen=True)
class EventRegion:
    """Closed frame-index interval [begin, end] in the sampled sequence.

    Seconds are always derived from frame timestamps, never stored here.
    """

    begin: int
    end: int

    def __post_init__(self) -> None:
        if self.begin < 0:
            raise ValueError("begin must be >= 0")
        if self.begin > self.end:
            raise ValueError(f"begin {self.begin} after end {self.end}")

    @property
    def n_frames(self) -> int:
        return self.end - self.begin + 1

    def clamp_check(self, n_frames: int) -> None:
        if self.end >= n_frames:
            raise ValueError(f"end {self.end} outside video of {n_frames} frames")


def region_seconds(region: EventRegion, frames) -> TimeRange:
    """Second-valued view of a region via the sampled frame timestamps."""
    return TimeRange(frames[region.begin].timestamp_s, frames[region.end].timestamp_s)
