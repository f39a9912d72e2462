from __future__ import annotations

import math
import random

import numpy as np
import pytest

from eventlens.domain import EventRegion
from eventlens.errors import TooFewFrames
from eventlens.manifest import load_manifest
from eventlens.segmentation import (
    S1Config,
    expand_epoch,
    grow_region,
    init_centers,
    run_s1,
    run_s1_detailed,
)
from conftest import fixture_path, load_json


def test_init_centers_frozen():
    # k * (N - 1) / (n + 1), round half up, clamped to [1, N - 2]
    assert init_centers(11, 2) == [3, 7]
    assert init_centers(3, 1) == [1]
    assert init_centers(5, 3) == [1, 2, 3]
    assert init_centers(100, 1) == [50]
    assert init_centers(60, 1) == [30]
    assert init_centers(10, 3) == [2, 5, 7]
    assert init_centers(6, 2) == [2, 3]


def test_init_centers_rejects_impossible():
    with pytest.raises(TooFewFrames):
        init_centers(2, 1)
    with pytest.raises(TooFewFrames):
        init_centers(10, 0)
    with pytest.raises(TooFewFrames):
        init_centers(5, 4)


def test_init_centers_properties():
    rng = random.Random(4242)
    for _ in range(200):
        n_frames = rng.randint(3, 400)
        n_events = rng.randint(1, min(8, n_frames - 2))
        centers = init_centers(n_frames, n_events)
        assert len(centers) == n_events
        assert all(1 <= c <= n_frames - 2 for c in centers)
        assert all(a < b for a, b in zip(centers, centers[1:]))


def _unit(x: float, y: float) -> np.ndarray:
    vec = np.array([x, y], dtype=np.float64)
    return vec / np.linalg.norm(vec)


def test_grow_region_threshold_boundary():
    # neighbors at cosine exactly 0.95 must be absorbed (tolerance band),
    # neighbors a hair below must not
    c_pass, c_fail = 0.95, 0.94999
    s_pass = math.sqrt(1 - c_pass * c_pass)
    s_fail = math.sqrt(1 - c_fail * c_fail)
    embeddings = [
        _unit(c_fail, s_fail),
        _unit(c_pass, s_pass),
        _unit(1.0, 0.0),
        _unit(c_pass, -s_pass),
        _unit(c_fail, -s_fail),
    ]
    state = grow_region(embeddings, 2, S1Config())
    assert state.region == EventRegion(1, 3)
    assert state.stable
    assert state.epochs == 2


def test_grow_region_no_growth_is_stable_after_one_epoch():
    embeddings = [_unit(1, 0), _unit(0, 1), _unit(1, 0)]
    state = grow_region(embeddings, 1, S1Config(delta1=1.0))
    assert state.region == EventRegion(1, 1)
    assert state.stable
    assert state.epochs == 1


def test_grow_region_zero_threshold_swallows_positive_video():
    rng = np.random.default_rng(9)
    embeddings = [rng.uniform(0.1, 1.0, size=4) for _ in range(17)]
    state = grow_region(embeddings, 8, S1Config(delta1=0.0))
    assert state.region == EventRegion(0, 16)
    assert state.stable


def test_expand_epoch_contains_input_region():
    rng = np.random.default_rng(31)
    for _ in range(150):
        n = rng.integers(5, 30)
        embeddings = [rng.standard_normal(6) for _ in range(n)]
        b = int(rng.integers(0, n))
        e = int(rng.integers(b, n))
        grown = expand_epoch(embeddings, EventRegion(b, e), 0.8)
        assert grown.begin <= b
        assert grown.end >= e
        assert 0 <= grown.begin and grown.end <= n - 1


def test_stable_regions_are_fixpoints():
    rng = np.random.default_rng(140)
    for _ in range(60):
        n = int(rng.integers(6, 40))
        embeddings = [rng.standard_normal(5) for _ in range(n)]
        center = int(rng.integers(1, n - 1))
        state = grow_region(embeddings, center, S1Config(delta1=0.9))
        assert state.region.begin <= center <= state.region.end
        if state.stable:
            again = expand_epoch(embeddings, state.region, 0.9)
            assert again == state.region


def test_block_videos_recover_blocks_exactly():
    expected = load_json("blocks", "expected.json")
    for vid, spec in sorted(expected.items()):
        manifest = load_manifest(fixture_path("blocks", f"{vid}.json"))
        embeddings = [f.embedding for f in manifest.frames]
        states = run_s1_detailed(embeddings, spec["n_events"], S1Config())
        got = [[s.region.begin, s.region.end] for s in states]
        assert got == spec["regions"], vid
        # one epoch grows to the block edge, the next sees no change
        assert all(s.stable and s.epochs == 2 for s in states), vid


def test_run_s1_sorted_and_in_bounds():
    rng = np.random.default_rng(77)
    for _ in range(40):
        n = int(rng.integers(8, 60))
        embeddings = [np.abs(rng.standard_normal(4)) + 0.05 for _ in range(n)]
        n_events = int(rng.integers(1, 4))
        regions = run_s1(embeddings, n_events, S1Config(delta1=0.97))
        assert len(regions) == n_events
        begins = [r.begin for r in regions]
        assert begins == sorted(begins)
        for r in regions:
            assert 0 <= r.begin <= r.end <= n - 1


def test_s1_config_validation():
    with pytest.raises(ValueError):
        S1Config(delta1=1.5)
    with pytest.raises(ValueError):
        S1Config(max_epochs=0)
