"""Deterministic in-process provider stubs.

Every stub is a pure function of (route, request payload, stub config,
seed) returning a wire-shaped response dict, so runs against stubs are
byte-reproducible. Families:

  fixed     constants, optionally overridden per tool in the stub config
  lookup    table-driven (alias: scripted); the LLM variant supports rule
            lists keyed on prompt markers, including a coverage rule that
            answers correctly only when the prompted frame span covers a
            planted segment
  blocks    frame index to one of k mutually orthogonal unit vectors
  hash      text digest to a unit vector, stable per seed
  echo      naive open extraction: "x loves y" becomes one (x, loves, y)

Image payloads carry base64 of either the real file bytes or, when the
frame source is only a symbolic name, the UTF-8 bytes of that name; stubs
that need a frame index parse the last integer run out of the decoded
source.
"""

from __future__ import annotations

import base64
import hashlib
import re

import numpy as np


def decode_image_payload(payload: dict) -> str:
    raw = base64.b64decode(payload.get("image_b64", ""))
    return raw.decode("utf-8", errors="replace")


def frame_index_from_source(source: str) -> int:
    runs = re.findall(r"\d+", source)
    if not runs:
        raise ValueError(f"no frame index in source {source!r}")
    return int(runs[-1])


def _overflow_check(payload: dict, cfg: dict) -> dict | None:
    limit = cfg.get("context_limit")
    if limit is not None and len(str(payload.get("prompt", "")).split()) > int(limit):
        return {"error": {"type": "context_overflow"}}
    return None


def _one_hot(dim: int, hot: int) -> list[float]:
    vec = [0.0] * dim
    vec[hot % dim] = 1.0
    return vec


# ---------------------------------------------------------------- families


def stub_fixed(route: str, payload: dict, cfg: dict, seed: int) -> dict:
    if route in ("embed_image", "embed_text"):
        emb = cfg.get("embedding")
        if emb is None:
            emb = _one_hot(int(cfg.get("dim", 8)), 0)
        return {"embedding": list(emb)}
    if route == "caption":
        return {"caption": cfg.get("caption", "a frame")}
    if route == "scene_graph":
        return {"triples": cfg.get("triples", [])}
    if route == "oie":
        return {"tuples": cfg.get("tuples", [])}
    if route == "complete":
        overflow = _overflow_check(payload, cfg)
        return overflow or {"text": cfg.get("text", "A")}
    raise ValueError(f"fixed stub: unknown route {route}")


_VIDEO_RE = re.compile(r"Video (\S+) \|")
_FRAME_TIME_RE = re.compile(r"Frame @([0-9]+(?:\.[0-9]+)?)s")


def _prompt_video_id(prompt: str) -> str | None:
    # last header wins: demonstration blocks render their own video lines
    matches = _VIDEO_RE.findall(prompt)
    return matches[-1] if matches else None


def _prompt_frame_span(prompt: str) -> tuple[float, float] | None:
    headers = list(_VIDEO_RE.finditer(prompt))
    tail = prompt[headers[-1].end():] if headers else prompt
    times = [float(t) for t in _FRAME_TIME_RE.findall(tail)]
    if not times:
        return None
    return min(times), max(times)


def _coverage_reply(prompt: str, spec: dict) -> str | None:
    vid = _prompt_video_id(prompt)
    if vid is None or vid not in spec:
        return None
    entry = spec[vid]
    span = _prompt_frame_span(prompt)
    if span is None:
        return entry["miss"]
    b, e = float(entry["span"][0]), float(entry["span"][1])
    lo, hi = span
    overlap = max(0.0, min(hi, e) - max(lo, b))
    length = max(e - b, 1e-9)
    covered = overlap / length >= float(entry.get("threshold", 0.7))
    return entry["hit"] if covered else entry["miss"]


def _scripted_complete(payload: dict, cfg: dict) -> dict:
    overflow = _overflow_check(payload, cfg)
    if overflow:
        return overflow
    prompt = str(payload.get("prompt", ""))
    for rule in cfg.get("rules", []):
        marker = rule.get("contains", "")
        if marker and marker not in prompt:
            continue
        if "answer_by_coverage" in rule:
            reply = _coverage_reply(prompt, rule["answer_by_coverage"])
            if reply is None:
                reply = rule.get("default", cfg.get("default", "A"))
            return {"text": reply}
        if "instruction_by_video" in rule:
            vid = _prompt_video_id(prompt)
            table = rule["instruction_by_video"]
            if vid is not None and vid in table:
                return {"text": table[vid]}
            return {"text": rule.get("default", cfg.get("default", "A"))}
        if "text" in rule:
            return {"text": rule["text"]}
    return {"text": cfg.get("default", "A")}


def stub_lookup(route: str, payload: dict, cfg: dict, seed: int) -> dict:
    if route == "complete":
        return _scripted_complete(payload, cfg)
    table = cfg.get("table", {})
    if route == "embed_text":
        key = str(payload.get("text", ""))
    elif route == "oie":
        key = str(payload.get("text", ""))
    else:
        key = decode_image_payload(payload)
    if key not in table:
        if "default" in cfg:
            value = cfg["default"]
        else:
            return {"error": {"type": "missing_key", "key": key}}
    else:
        value = table[key]
    if route in ("embed_image", "embed_text"):
        return {"embedding": list(value)}
    if route == "caption":
        return {"caption": str(value)}
    if route == "scene_graph":
        return {"triples": value.get("triples", value) if isinstance(value, dict) else value}
    if route == "oie":
        return {"tuples": value.get("tuples", value) if isinstance(value, dict) else value}
    raise ValueError(f"lookup stub: unknown route {route}")


def stub_blocks(route: str, payload: dict, cfg: dict, seed: int) -> dict:
    if route != "embed_image":
        raise ValueError("blocks stub only serves embed_image")
    dim = int(cfg["dim"])
    index = frame_index_from_source(decode_image_payload(payload))
    if "bounds" in cfg:
        block = None
        for start, end, block_id in cfg["bounds"]:
            if start <= index <= end:
                block = int(block_id)
                break
        if block is None:
            return {"error": {"type": "missing_key", "key": str(index)}}
    else:
        block = index // int(cfg["block_size"])
    return {"embedding": _one_hot(dim, block)}


def stub_hash(route: str, payload: dict, cfg: dict, seed: int) -> dict:
    if route not in ("embed_text", "embed_image"):
        raise ValueError("hash stub only serves embedding routes")
    if route == "embed_text":
        key = str(payload.get("text", ""))
    else:
        key = decode_image_payload(payload)
    dim = int(cfg.get("dim", 8))
    digest = hashlib.sha256(f"{seed}:{key}".encode("utf-8")).digest()
    need = dim * 4
    while len(digest) < need:
        digest += hashlib.sha256(digest).digest()
    ints = np.frombuffer(digest[:need], dtype="<u4").astype(np.float64)
    vec = (ints / np.float64(2**32)) * 2.0 - 1.0
    norm = float(np.linalg.norm(vec))
    vec = vec / norm
    return {"embedding": [float(x) for x in vec]}


def stub_echo(route: str, payload: dict, cfg: dict, seed: int) -> dict:
    if route != "oie":
        raise ValueError("echo stub only serves oie")
    text = str(payload.get("text", "")).strip().rstrip(".!?")
    tokens = text.split()
    if len(tokens) >= 3:
        tuples = [[tokens[0], tokens[1], " ".join(tokens[2:])]]
    elif len(tokens) == 2:
        tuples = [tokens]
    else:
        tuples = []
    return {"tuples": tuples}


STUB_FAMILIES = {
    "fixed": stub_fixed,
    "lookup": stub_lookup,
    "scripted": stub_lookup,
    "blocks": stub_blocks,
    "hash": stub_hash,
    "echo": stub_echo,
}
