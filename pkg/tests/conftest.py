from __future__ import annotations

import json
import os

import pytest

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(REPO_ROOT, "fixtures")


def fixture_path(*parts: str) -> str:
    return os.path.join(FIXTURES, *parts)


def load_json(*parts: str):
    with open(fixture_path(*parts), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def write_config(tmp_path):
    """Writes a flat dotted-key config file and returns its path.

    script_file and demo paths are resolved against the fixtures dir when
    given relative, so tests stay independent of the working directory.
    """

    def _write(name: str = "config.json", **values):
        resolved = {}
        for key, value in values.items():
            key = key.replace("__", ".")
            if key in ("providers.script_file", "demos.qa", "demos.instruction"):
                if isinstance(value, str) and not os.path.isabs(value):
                    value = os.path.join(FIXTURES, value)
            resolved[key] = value
        path = tmp_path / name
        path.write_text(json.dumps(resolved), encoding="utf-8")
        return str(path)

    return _write
