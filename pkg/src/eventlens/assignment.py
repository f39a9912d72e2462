"""Maximum-weight bipartite matching with a deterministic tie-break.

The optimizer core is scipy's assignment solver. Because several optimal
assignments can share the same total, a canonicalization pass then fixes
pairs greedily in (row, col) order, keeping only prefixes that still reach
the optimal total, so the reported pair list is the lexicographically
smallest one among the optima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, EmptyInput, NonFiniteEntry

# Slack for "still reaches the optimum" checks during canonicalization.
# Only ties are affected; distinct totals differ by far more in practice.
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Assignment:
    """Result of one matching: row-sorted pairs plus their score total."""

    pairs: tuple[tuple[int, int], ...]
    total: float


def _pair_total(scores: np.ndarray, pairs) -> float:
    # Sum in row order so equal assignments always produce identical floats.
    return float(sum(scores[r, c] for r, c in pairs))


def _best_total(scores: np.ndarray) -> float:
    if scores.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(scores, maximize=True)
    return _pair_total(scores, sorted(zip(rows.tolist(), cols.tolist())))


def solve_max_assignment(scores) -> Assignment:
    """Match min(rows, cols) pairs maximizing the summed score.

    Ties between optimal assignments resolve to the lexicographically
    smallest row-sorted pair list.
    """
    mat = np.asarray(scores, dtype=np.float64)
    if mat.ndim != 2:
        raise DimensionMismatch(f"score matrix must be 2-d, got shape {mat.shape}")
    if mat.shape[0] == 0 or mat.shape[1] == 0:
        raise EmptyInput("score matrix must not be empty")
    if not np.all(np.isfinite(mat)):
        raise NonFiniteEntry("score matrix contains NaN or infinity")

    n_rows, n_cols = mat.shape
    k = min(n_rows, n_cols)
    target = _best_total(mat)
    tol = _TIE_TOL * max(1.0, abs(target))

    chosen: list[tuple[int, int]] = []
    fixed_sum = 0.0
    used_cols: set[int] = set()
    row_floor = 0
    for pos in range(k):
        placed = False
        # When every row is used the pos-th pair's row is forced.
        row_candidates = [pos] if n_rows <= n_cols else range(row_floor, n_rows)
        for r in row_candidates:
            remaining_rows = n_rows - r - 1
            if remaining_rows < k - pos - 1:
                break
            for c in range(n_cols):
                if c in used_cols:
                    continue
                rest_rows = [i for i in range(r + 1, n_rows)]
                rest_cols = [j for j in range(n_cols) if j != c and j not in used_cols]
                sub = mat[np.ix_(rest_rows, rest_cols)] if rest_rows and rest_cols else np.zeros((0, 0))
                attainable = fixed_sum + mat[r, c] + _best_total(sub)
                if attainable >= target - tol:
                    chosen.append((r, c))
                    fixed_sum += float(mat[r, c])
                    used_cols.add(c)
                    row_floor = r + 1
                    placed = True
                    break
            if placed:
                break
        if not placed:  # pragma: no cover - optimum is always completable
            raise RuntimeError("assignment canonicalization failed to complete")

    return Assignment(pairs=tuple(chosen), total=_pair_total(mat, chosen))
