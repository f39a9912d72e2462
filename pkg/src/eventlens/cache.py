"""Content-addressed cache for provider responses.

Keys are digests over (tool kind, model id, canonical request bytes), so a
repeated request never re-reaches the backend. Values are stored one file
per key; writes go through a temp file and an atomic rename, which makes
concurrent puts of the same key idempotent.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def canonical_json(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def digest_request(kind: str, model_id: str | None, payload: dict) -> str:
    h = hashlib.sha256()
    h.update(kind.encode("utf-8"))
    h.update(b"\x00")
    h.update((model_id or "").encode("utf-8"))
    h.update(b"\x00")
    h.update(canonical_json(payload))
    return h.hexdigest()


class ResponseCache:
    """File-backed response store addressed by request digest."""

    def __init__(self, cache_dir: str) -> None:
        self.cache_dir = cache_dir
        self.hits = 0
        self.misses = 0
        os.makedirs(cache_dir, exist_ok=True)

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, key[:2], key + ".json")

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except FileNotFoundError:
            self.misses += 1
            return None
        self.hits += 1
        return data

    def put(self, key: str, value: bytes) -> None:
        path = self._path(key)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(value)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
