"""Brute-force references for the incremental machinery.

Everything here recomputes fits and losses from scratch, on explicitly
materialized key sequences, sharing no arithmetic with the O(1) update path.
Deliberately simple and slow; guard rails refuse instances where brute force
stops being viable.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .core import CandidatePoint, SortedKeySet

MAX_BRUTE_SPREAD = 10**5
MAX_EXHAUSTIVE_CANDIDATES = 30
MAX_EXHAUSTIVE_BUDGET = 6


@dataclass
class OracleReport:
    best_subset: list[int]
    best_sse: float
    evaluations: int
    wall_time_s: float = 0.0


def direct_sse(keys, model) -> float:
    """Naive sum of squared residuals of model over (key, rank) pairs."""
    arr = keys.array if isinstance(keys, SortedKeySet) else np.asarray(keys)
    if arr.size == 0:
        raise ValueError("empty key set")
    ranks = np.arange(arr.size, dtype=np.float64)
    resid = model.slope * arr.astype(np.float64) + model.intercept - ranks
    return float(np.dot(resid, resid))


def _plain_fit(ks: np.ndarray) -> tuple[float, float]:
    # Mean-centered float least squares; independent of the exact-integer path.
    ys = np.arange(ks.size, dtype=np.float64)
    kf = ks.astype(np.float64)
    km = kf.mean()
    ym = ys.mean()
    dk = kf - km
    w = float(np.dot(dk, ys - ym) / np.dot(dk, dk))
    return w, float(ym - w * km)


def _legal_candidates(keys: SortedKeySet) -> np.ndarray:
    arr = keys.array.astype(np.int64)
    allv = np.arange(arr[0] + 1, arr[-1], dtype=np.int64)
    return np.setdiff1d(allv, arr, assume_unique=True)


def brute_force_best_candidate(keys: SortedKeySet) -> CandidatePoint:
    """Scan every legal candidate value: refit from scratch, keep the min SSE.

    Ties break toward the smallest key.  Refuses key spreads past 1e5 where
    the scan stops being a sensible oracle.
    """
    if len(keys) < 2:
        raise ValueError("need at least 2 keys")
    spread = int(keys[-1]) - int(keys[0])
    if spread > MAX_BRUTE_SPREAD:
        raise ValueError(f"key spread {spread} exceeds oracle limit {MAX_BRUTE_SPREAD}")
    cands = _legal_candidates(keys)
    if cands.size == 0:
        raise ValueError("no legal candidate values")

    arr = keys.array.astype(np.float64)
    n = arr.size
    ranks = np.searchsorted(arr, cands).astype(np.int64)

    # Materialize every enlarged sequence as one (p, n+1) matrix.
    cols = np.arange(n + 1, dtype=np.int64)[None, :]
    r = ranks[:, None]
    left = np.where(cols < n, arr[np.minimum(cols, n - 1)], 0.0)
    right = np.where(cols >= 1, arr[np.maximum(cols - 1, 0)], 0.0)
    mat = np.where(cols < r, left, np.where(cols == r, cands[:, None].astype(np.float64), right))

    ys = np.arange(n + 1, dtype=np.float64)
    m = float(n + 1)
    sk = mat.sum(axis=1)
    skk = (mat * mat).sum(axis=1)
    sky = (mat * ys).sum(axis=1)
    sy = ys.sum()
    w = (m * sky - sk * sy) / (m * skk - sk * sk)
    b = (sy - w * sk) / m
    resid = w[:, None] * mat + b[:, None] - ys
    sse = (resid * resid).sum(axis=1)

    best_sse = sse.min()
    best_i = int(np.flatnonzero(sse == best_sse)[0])  # candidates ascend: smallest key
    return CandidatePoint(int(cands[best_i]), int(ranks[best_i]), float(best_sse))


def _fit_and_sse(ks: list[int]) -> float:
    n = len(ks)
    sk = sy = skk = sky = syy = 0.0
    for i, k in enumerate(ks):
        kf = float(k)
        sk += kf
        sy += i
        skk += kf * kf
        sky += kf * i
        syy += float(i) * i
    w = (n * sky - sk * sy) / (n * skk - sk * sk)
    b = (sy - w * sk) / n
    sse = 0.0
    for i, k in enumerate(ks):
        e = w * k + b - i
        sse += e * e
    return sse


def exhaustive_smooth(keys: SortedKeySet, budget: int) -> OracleReport:
    """Global optimum over all candidate subsets of size <= budget.

    Inserts each subset jointly (later points see earlier ones' rank shifts),
    refits, and keeps the minimum total SSE.  Enumeration is lexicographic by
    key values with strict improvement, so ties resolve to the
    lexicographically smallest subset.
    """
    if len(keys) < 2:
        raise ValueError("need at least 2 keys")
    cands = _legal_candidates(keys)
    if cands.size > MAX_EXHAUSTIVE_CANDIDATES:
        raise ValueError(
            f"{cands.size} candidates exceed oracle limit {MAX_EXHAUSTIVE_CANDIDATES}"
        )
    if budget > MAX_EXHAUSTIVE_BUDGET:
        raise ValueError(f"budget {budget} exceeds oracle limit {MAX_EXHAUSTIVE_BUDGET}")

    base = keys.key_list()
    cand_list = [int(c) for c in cands]
    start = time.perf_counter()
    best_sse = _fit_and_sse(base)
    best_subset: list[int] = []
    evaluations = 1
    for size in range(1, budget + 1):
        for subset in itertools.combinations(cand_list, size):
            merged = sorted(base + list(subset))
            sse = _fit_and_sse(merged)
            evaluations += 1
            if sse < best_sse:
                best_sse = sse
                best_subset = list(subset)
    wall = time.perf_counter() - start
    return OracleReport(best_subset, best_sse, evaluations, wall)
