"""Run configuration: one flat document of namespaced keys.

Config files are JSON objects whose keys are dotted paths (for example
"s1.delta1" or "providers.llm.endpoint"). CLI flags override file values;
unknown keys are rejected outright so typos fail loudly.
"""

from __future__ import annotations

import json
import os

from .errors import ConfigError
from .providers import ProviderConfig
from .refinement import S2Config
from .segmentation import S1Config
from .agent import AgentConfig

CACHE_DIR_ENV = "EVENTLENS_CACHE_DIR"

PROVIDER_TOOLS = ("embed_image", "embed_text", "caption", "scene_graph", "oie", "llm")

# tool name -> default stub family used under --stub-all
DEFAULT_STUBS = {
    "embed_image": "stub:hash",
    "embed_text": "stub:hash",
    "caption": "stub:fixed",
    "scene_graph": "stub:fixed",
    "oie": "stub:echo",
    "llm": "stub:fixed",
}

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "n_events": None,  # task default: 1 for qa, 3 for dvc
    "s1.delta1": 0.95,
    "s1.max_epochs": 10,
    "s2.m_v": 5,
    "s2.stride": 5,
    "s2.max_moves": 20,
    "s2.min_len": None,
    "s2.mode": "trajectories",
    "agent.T": 1,
    "agent.delta_conv_s": 1.0,
    "agent.n_keyframes": 4,
    "agent.n_demos": None,  # task default: 6 for qa, 4 for dvc
    "agent.tau": 0.4,
    "agent.max_tokens": 256,
    "providers.cache_dir": None,
    "providers.script_file": None,
    "demos.qa": None,
    "demos.instruction": None,
}

for _tool in PROVIDER_TOOLS:
    DEFAULTS[f"providers.{_tool}.endpoint"] = DEFAULT_STUBS[_tool]
    DEFAULTS[f"providers.{_tool}.model_id"] = None
    DEFAULTS[f"providers.{_tool}.timeout_ms"] = 10_000
    DEFAULTS[f"providers.{_tool}.max_retries"] = 2
    DEFAULTS[f"providers.{_tool}.backoff_base_ms"] = 200

TASK_DEFAULT_EVENTS = {"qa": 1, "dvc": 3}
TASK_DEFAULT_DEMOS = {"qa": 6, "dvc": 4}


class RunConfig:
    """Resolved flat config with typed accessors."""

    def __init__(self, values: dict[str, object]) -> None:
        self.values = values

    @classmethod
    def load(cls, path: str | None = None, overrides: dict[str, object] | None = None) -> "RunConfig":
        values = dict(DEFAULTS)
        if path is not None:
            if not os.path.exists(path):
                raise ConfigError(f"config file not found: {path}")
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file not valid JSON: {path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config root must be an object of dotted keys")
            for key, value in doc.items():
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown config key {key!r}")
                values[key] = value
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if value is not None:
                values[key] = value
        env_cache = os.environ.get(CACHE_DIR_ENV)
        if env_cache:
            values["providers.cache_dir"] = env_cache
        return cls(values)

    def snapshot(self) -> dict[str, object]:
        # cache location is operational, not semantic: leaving it out keeps
        # run ids and recorded traces identical across machines
        return {k: v for k, v in sorted(self.values.items()) if k != "providers.cache_dir"}

    # ---------------------------------------------------------- sections

    def s1(self) -> S1Config:
        try:
            return S1Config(
                delta1=float(self.values["s1.delta1"]),
                max_epochs=int(self.values["s1.max_epochs"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad s1 config: {exc}") from exc

    def s2(self) -> S2Config:
        min_len = self.values["s2.min_len"]
        try:
            return S2Config(
                m_v=int(self.values["s2.m_v"]),
                stride=int(self.values["s2.stride"]),
                max_moves=int(self.values["s2.max_moves"]),
                min_len=None if min_len is None else int(min_len),
                mode=str(self.values["s2.mode"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad s2 config: {exc}") from exc

    def agent(self, task: str) -> AgentConfig:
        demos = self.values["agent.n_demos"]
        if demos is None:
            demos = TASK_DEFAULT_DEMOS.get(task, 6)
        try:
            return AgentConfig(
                T=int(self.values["agent.T"]),
                delta_conv_s=float(self.values["agent.delta_conv_s"]),
                n_keyframes=int(self.values["agent.n_keyframes"]),
                n_demos=int(demos),
                tau=float(self.values["agent.tau"]),
                max_tokens=int(self.values["agent.max_tokens"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad agent config: {exc}") from exc

    def n_events(self, task: str) -> int:
        value = self.values["n_events"]
        if value is None:
            value = TASK_DEFAULT_EVENTS.get(task, 1)
        n = int(value)
        if n < 1:
            raise ConfigError(f"n_events must be >= 1, got {n}")
        return n

    def seed(self) -> int:
        return int(self.values["seed"])

    def provider(self, tool: str) -> ProviderConfig:
        if tool not in PROVIDER_TOOLS:
            raise ConfigError(f"unknown provider tool {tool!r}")
        endpoint = str(self.values[f"providers.{tool}.endpoint"])
        model_id = self.values[f"providers.{tool}.model_id"]
        try:
            return ProviderConfig(
                endpoint=endpoint,
                model_id=None if model_id is None else str(model_id),
                timeout_ms=int(self.values[f"providers.{tool}.timeout_ms"]),
                max_retries=int(self.values[f"providers.{tool}.max_retries"]),
                backoff_base_ms=int(self.values[f"providers.{tool}.backoff_base_ms"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad provider config for {tool}: {exc}") from exc

    def force_stubs(self) -> None:
        """Swap every HTTP endpoint for that tool's default stub family."""
        for tool in PROVIDER_TOOLS:
            key = f"providers.{tool}.endpoint"
            if not str(self.values[key]).startswith("stub:"):
                self.values[key] = DEFAULT_STUBS[tool]

    def stub_tables(self) -> dict:
        """Per-tool stub config sections, loaded from the script file."""
        path = self.values["providers.script_file"]
        if path is None:
            return {}
        if not os.path.exists(str(path)):
            raise ConfigError(f"stub script file not found: {path}")
        try:
            with open(str(path), "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"stub script file not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("stub script file must hold an object")
        return doc

    def cache_dir(self) -> str | None:
        value = self.values["providers.cache_dir"]
        return None if value is None else str(value)

    def demo_path(self, purpose: str) -> str | None:
        value = self.values[f"demos.{purpose}"]
        return None if value is None else str(value)
