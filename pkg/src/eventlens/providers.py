"""Model-backed tool clients behind one JSON-over-HTTP wire protocol.

Five tools (image embedder, text embedder, captioner, scene-graph
generator, open extractor, completion model) share a uniform shape:
POST one JSON object, receive one JSON object. An endpoint is either an
http(s) URL or "stub:<family>", which dispatches to the in-process stub
registry with the same request and response shapes. Responses are parsed
and validated through a single path regardless of origin, and an optional
content-addressed cache short-circuits repeats.
"""

from __future__ import annotations

import base64
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .cache import ResponseCache, canonical_json, digest_request
from .domain import FrameRef, VideoMeta, as_embedding
from .errors import (
    BadResponse,
    ConfigError,
    ContextOverflow,
    EmptyText,
    ProviderUnavailable,
)
from .stubs import STUB_FAMILIES

ROUTES = {
    "embed_image": "/v1/embed_image",
    "embed_text": "/v1/embed_text",
    "caption": "/v1/caption",
    "scene_graph": "/v1/scene_graph",
    "oie": "/v1/oie",
    "complete": "/v1/complete",
}

BACKOFF_FACTOR = 2


@dataclass(frozen=True)
class ProviderConfig:
    """Where one tool lives and how patiently to talk to it."""

    endpoint: str
    model_id: str | None = None
    timeout_ms: int = 10_000
    max_retries: int = 2
    backoff_base_ms: int = 200

    @property
    def is_stub(self) -> bool:
        return self.endpoint.startswith("stub:")

    @property
    def stub_family(self) -> str:
        return self.endpoint.split(":", 1)[1]


@dataclass(frozen=True)
class SceneEntity:
    label: str
    box: tuple[float, float, float, float]


@dataclass(frozen=True)
class SceneTriple:
    subject: SceneEntity
    predicate: str
    object: SceneEntity
    confidence: float


@dataclass(frozen=True)
class SceneGraph:
    """Triples sorted by confidence descending, ties by subject label."""

    triples: tuple[SceneTriple, ...]


@dataclass(frozen=True)
class CallRecord:
    """Provenance for one provider invocation."""

    kind: str
    digest: str
    origin: str  # cache | stub | http | manifest


@dataclass
class CompletionParams:
    max_tokens: int = 256
    temperature: float = 0.0
    stop: list[str] = field(default_factory=list)


def _image_bytes(frame: FrameRef) -> bytes:
    if os.path.exists(frame.source):
        with open(frame.source, "rb") as fh:
            return fh.read()
    # Symbolic sources (fixture manifests) stand in for their own bytes.
    return frame.source.encode("utf-8")


def _validate_box(raw, video: VideoMeta | None) -> tuple[float, float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise BadResponse(f"box must have 4 coordinates, got {raw!r}")
    try:
        x1, y1, x2, y2 = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise BadResponse(f"non-numeric box {raw!r}") from exc
    if not all(math.isfinite(v) for v in (x1, y1, x2, y2)):
        raise BadResponse(f"non-finite box {raw!r}")
    if x1 < 0 or y1 < 0 or x1 > x2 or y1 > y2:
        raise BadResponse(f"degenerate box {raw!r}")
    if video is not None and (x2 > video.width or y2 > video.height):
        raise BadResponse(f"box {raw!r} outside {video.width}x{video.height} frame")
    return (x1, y1, x2, y2)


def _parse_entity(raw, video: VideoMeta | None) -> SceneEntity:
    if not isinstance(raw, dict) or not str(raw.get("label", "")).strip():
        raise BadResponse(f"entity needs a label, got {raw!r}")
    return SceneEntity(label=str(raw["label"]), box=_validate_box(raw.get("box"), video))


def parse_scene_graph(doc: dict, video: VideoMeta | None = None) -> SceneGraph:
    triples_raw = doc.get("triples")
    if not isinstance(triples_raw, list):
        raise BadResponse("scene graph reply missing 'triples' list")
    triples = []
    for rec in triples_raw:
        if not isinstance(rec, dict):
            raise BadResponse(f"triple must be an object, got {rec!r}")
        conf = rec.get("confidence")
        if not isinstance(conf, (int, float)) or not (0.0 <= float(conf) <= 1.0):
            raise BadResponse(f"confidence must lie in [0, 1], got {conf!r}")
        predicate = str(rec.get("predicate", "")).strip()
        if not predicate:
            raise BadResponse("triple predicate is empty")
        triples.append(
            SceneTriple(
                subject=_parse_entity(rec.get("subject"), video),
                predicate=predicate,
                object=_parse_entity(rec.get("object"), video),
                confidence=float(conf),
            )
        )
    triples.sort(key=lambda t: (-t.confidence, t.subject.label))
    return SceneGraph(triples=tuple(triples))


def filter_triples(graph: SceneGraph, tau: float) -> SceneGraph:
    """Keep exactly the triples with confidence >= tau, order preserved."""
    return SceneGraph(triples=tuple(t for t in graph.triples if t.confidence >= tau))


class ProviderHub:
    """All five tool clients plus shared cache, stubs, and call recording."""

    def __init__(
        self,
        configs: dict[str, ProviderConfig],
        stub_tables: dict | None = None,
        cache: ResponseCache | None = None,
        seed: int = 0,
    ) -> None:
        self.configs = configs
        self.stub_tables = stub_tables or {}
        self.cache = cache
        self.seed = seed
        self.recorder: list[CallRecord] | None = None

    def _config(self, kind: str) -> ProviderConfig:
        try:
            return self.configs[kind]
        except KeyError as exc:
            raise ConfigError(f"no provider configured for {kind!r}") from exc

    def _record(self, kind: str, digest: str, origin: str) -> None:
        if self.recorder is not None:
            self.recorder.append(CallRecord(kind=kind, digest=digest, origin=origin))

    def _http_call(self, cfg: ProviderConfig, route: str, payload: dict) -> dict:
        url = cfg.endpoint.rstrip("/") + ROUTES[route]
        last_exc: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(cfg.backoff_base_ms / 1000.0 * (BACKOFF_FACTOR ** (attempt - 1)))
            try:
                resp = requests.post(url, json=payload, timeout=cfg.timeout_ms / 1000.0)
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = ProviderUnavailable(f"{url} -> {resp.status_code}")
                continue
            if resp.status_code >= 400:
                body: dict = {}
                try:
                    body = resp.json()
                except ValueError:
                    pass
                err_type = (body.get("error") or {}).get("type") if isinstance(body.get("error"), dict) else None
                if resp.status_code == 413 or err_type == "context_overflow":
                    raise ContextOverflow(f"{url} -> {resp.status_code}")
                raise BadResponse(f"{url} -> {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BadResponse(f"{url} returned non-JSON body") from exc
        raise ProviderUnavailable(f"{url} unreachable after {cfg.max_retries + 1} attempts: {last_exc}")

    def _call(self, kind: str, payload: dict) -> dict:
        cfg = self._config(kind)
        wire_payload = dict(payload)
        if cfg.model_id:
            wire_payload["model_id"] = cfg.model_id
        key = digest_request(kind, cfg.model_id, wire_payload)

        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self._record(kind, key, "cache")
                return json.loads(hit.decode("utf-8"))

        if cfg.is_stub:
            family = cfg.stub_family
            if family not in STUB_FAMILIES:
                raise ConfigError(f"unknown stub family {family!r}")
            table = self.stub_tables.get(kind, {})
            doc = STUB_FAMILIES[family](kind, wire_payload, table, self.seed)
            origin = "stub"
        else:
            doc = self._http_call(cfg, kind, wire_payload)
            origin = "http"

        err = doc.get("error") if isinstance(doc, dict) else None
        if isinstance(err, dict):
            if err.get("type") == "context_overflow":
                raise ContextOverflow(str(err))
            raise BadResponse(f"{kind} error reply: {err}")

        if self.cache is not None:
            self.cache.put(key, canonical_json(doc))
        self._record(kind, key, origin)
        return doc

    # ---------------------------------------------------------- clients

    def embed_image(self, frame: FrameRef) -> np.ndarray:
        if frame.embedding is not None:
            self._record("embed_image", f"manifest:{frame.index}", "manifest")
            return frame.embedding
        payload = {"image_b64": base64.b64encode(_image_bytes(frame)).decode("ascii")}
        doc = self._call("embed_image", payload)
        if "embedding" not in doc:
            raise BadResponse("embed_image reply missing 'embedding'")
        try:
            return as_embedding(doc["embedding"])
        except Exception as exc:
            raise BadResponse(f"bad embedding payload: {exc}") from exc

    def embed_text(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        doc = self._call("embed_text", {"text": text})
        if "embedding" not in doc:
            raise BadResponse("embed_text reply missing 'embedding'")
        try:
            return as_embedding(doc["embedding"])
        except Exception as exc:
            raise BadResponse(f"bad embedding payload: {exc}") from exc

    def caption(self, frame: FrameRef) -> str:
        payload = {"image_b64": base64.b64encode(_image_bytes(frame)).decode("ascii")}
        doc = self._call("caption", payload)
        text = doc.get("caption")
        if not isinstance(text, str) or not text.strip():
            raise BadResponse("caption reply missing non-empty 'caption'")
        return text.strip()

    def scene_graph(self, frame: FrameRef, video: VideoMeta | None = None) -> SceneGraph:
        payload = {"image_b64": base64.b64encode(_image_bytes(frame)).decode("ascii")}
        doc = self._call("scene_graph", payload)
        return parse_scene_graph(doc, video)

    def extract_tuples(self, text: str) -> list[list[str]]:
        if not text or not text.strip():
            raise EmptyText("cannot extract from empty text")
        doc = self._call("oie", {"text": text})
        tuples_raw = doc.get("tuples")
        if not isinstance(tuples_raw, list):
            raise BadResponse("oie reply missing 'tuples' list")
        out: list[list[str]] = []
        for tup in tuples_raw:
            if not isinstance(tup, (list, tuple)) or not all(isinstance(p, str) for p in tup):
                raise BadResponse(f"oie tuple must be a list of strings, got {tup!r}")
            out.append(list(tup))
        return out

    def complete(self, prompt: str, params: CompletionParams | None = None) -> str:
        params = params or CompletionParams()
        payload = {
            "prompt": prompt,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "stop": list(params.stop),
        }
        doc = self._call("complete", payload)
        text = doc.get("text")
        if not isinstance(text, str):
            raise BadResponse("complete reply missing 'text'")
        return text

    # ---------------------------------------------------------- checks

    def check_embedding_dims(self, sample_frame: FrameRef | None = None) -> int:
        """Assert the image and text embedders agree on dimension."""
        text_dim = self.embed_text("dimension probe").size
        if sample_frame is not None:
            image_dim = self.embed_image(sample_frame).size
            if image_dim != text_dim:
                raise ConfigError(f"embedding dims differ: image {image_dim} vs text {text_dim}")
        return int(text_dim)
