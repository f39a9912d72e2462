"""Frame manifests: the sampled-frame view of a video plus keyframe picks.

A manifest is a JSON document listing the video's metadata, the sampling
rate, and one record per sampled frame. Frames may carry precomputed
embeddings so whole runs can execute without any image backend.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .domain import EventRegion, FrameRef, VideoMeta, as_embedding, round_half_up
from .errors import (
    InvalidFps,
    ManifestNotFound,
    ManifestParseError,
    ManifestValidationError,
)


@dataclass(frozen=True)
class SamplingPolicy:
    """How timestamps are drawn from a video's duration."""

    fps: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise InvalidFps(f"sampling fps must be positive, got {self.fps}")


@dataclass
class FrameManifest:
    """A video's sampled frames, in index order."""

    video: VideoMeta
    sampling_fps: float
    frames: list[FrameRef] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def sample_timestamps(duration_s: float, fps: float) -> list[float]:
    """Uniform timestamps i/fps for i = 0..floor(duration*fps), capped at duration."""
    if not (math.isfinite(fps) and fps > 0):
        raise InvalidFps(f"fps must be positive, got {fps}")
    if not (math.isfinite(duration_s) and duration_s > 0):
        raise ManifestValidationError(f"duration must be positive, got {duration_s}")
    # tiny guard so 10.0 * 1.0 style products do not floor down on fp dust
    last = int(math.floor(duration_s * fps + 1e-9))
    return [min(i / fps, duration_s) for i in range(last + 1)]


def sample_uniform(meta: VideoMeta, policy: SamplingPolicy, source_pattern: str = "frame_{index:05d}") -> list[FrameRef]:
    """Build FrameRefs at uniform timestamps; sources come from the pattern."""
    stamps = sample_timestamps(meta.duration_s, policy.fps)
    return [
        FrameRef(index=i, timestamp_s=t, source=source_pattern.format(index=i))
        for i, t in enumerate(stamps)
    ]


def select_keyframe_indices(region: EventRegion, m_v: int) -> tuple[list[int], bool]:
    """Evenly spaced frame indices across a region, boundaries included.

    Returns (indices, degenerate). Duplicates after rounding are dropped
    while preserving order; a single-frame region yields just that frame
    and is flagged degenerate when more frames were requested.
    """
    if m_v < 1:
        raise ValueError(f"m_v must be >= 1, got {m_v}")
    b, e = region.begin, region.end
    if b == e:
        return [b], m_v >= 2
    if m_v == 1:
        return [b], False
    raw = [b + round_half_up(q * (e - b) / (m_v - 1)) for q in range(m_v)]
    seen: set[int] = set()
    picks: list[int] = []
    for idx in raw:
        if idx not in seen:
            seen.add(idx)
            picks.append(idx)
    return picks, False


def select_keyframes(manifest: FrameManifest, region: EventRegion, m_v: int) -> tuple[list[FrameRef], bool]:
    region.clamp_check(manifest.n_frames)
    indices, degenerate = select_keyframe_indices(region, m_v)
    return [manifest.frames[i] for i in indices], degenerate


def _parse_video(doc: dict) -> VideoMeta:
    try:
        return VideoMeta(
            video_id=str(doc["video_id"]),
            duration_s=float(doc["duration_s"]),
            fps_native=float(doc["fps_native"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestValidationError(f"bad video block: {exc}") from exc


def manifest_from_dict(doc: dict) -> FrameManifest:
    if not isinstance(doc, dict):
        raise ManifestValidationError("manifest root must be an object")
    for key in ("video", "sampling_fps", "frames"):
        if key not in doc:
            raise ManifestValidationError(f"manifest missing '{key}'")
    video = _parse_video(doc["video"])
    fps = doc["sampling_fps"]
    if not isinstance(fps, (int, float)) or not math.isfinite(fps) or fps <= 0:
        raise InvalidFps(f"sampling_fps must be positive, got {fps!r}")
    raw_frames = doc["frames"]
    if not isinstance(raw_frames, list) or not raw_frames:
        raise ManifestValidationError("frames must be a non-empty list")

    frames: list[FrameRef] = []
    dim: int | None = None
    prev_ts = -math.inf
    for pos, rec in enumerate(raw_frames):
        try:
            index = int(rec["index"])
            ts = float(rec["timestamp_s"])
            source = str(rec["source"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestValidationError(f"bad frame record {pos}: {exc}") from exc
        if index != pos:
            raise ManifestValidationError(f"frame indices must be contiguous from 0, got {index} at {pos}")
        if ts <= prev_ts:
            raise ManifestValidationError(f"timestamps must strictly increase (frame {pos})")
        if ts > video.duration_s + 1e-9:
            raise ManifestValidationError(f"timestamp {ts} beyond duration {video.duration_s}")
        prev_ts = ts
        emb = None
        if "embedding" in rec and rec["embedding"] is not None:
            emb = as_embedding(rec["embedding"])
            if dim is None:
                dim = emb.size
            elif emb.size != dim:
                raise ManifestValidationError(f"embedding dim flips from {dim} to {emb.size} at frame {pos}")
        frames.append(FrameRef(index=index, timestamp_s=ts, source=source, embedding=emb))
    return FrameManifest(video=video, sampling_fps=float(fps), frames=frames)


def load_manifest(path: str) -> FrameManifest:
    if not os.path.exists(path):
        raise ManifestNotFound(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    return manifest_from_dict(doc)


def manifest_to_dict(manifest: FrameManifest) -> dict:
    frames = []
    for f in manifest.frames:
        rec: dict = {"index": f.index, "timestamp_s": f.timestamp_s, "source": f.source}
        if f.embedding is not None:
            rec["embedding"] = [float(x) for x in np.asarray(f.embedding)]
        frames.append(rec)
    return {
        "video": {
            "video_id": manifest.video.video_id,
            "duration_s": manifest.video.duration_s,
            "fps_native": manifest.video.fps_native,
            "width": manifest.video.width,
            "height": manifest.video.height,
        },
        "sampling_fps": manifest.sampling_fps,
        "frames": frames,
    }


def save_manifest(manifest: FrameManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_dict(manifest), fh, indent=1)
        fh.write("\n")
