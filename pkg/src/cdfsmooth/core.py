"""Linear fits of rank over key, with O(1) refits under virtual-point insertion.

A key set is a strictly ascending sequence of unsigned 64-bit integers whose
rank function (key -> 0-based position) is the discrete CDF an index model
approximates.  This module fits ``rank ~ slope * key + intercept`` by least
squares and evaluates how the fit and its squared-error loss change when one
*virtual point* (a synthetic key, never returned by queries) is inserted at
its order-preserving rank.

All running sums are kept as exact Python integers, so the incremental
formulas agree with a from-scratch fit to the last bit before the final
float division.  Loss evaluation also accepts ``float`` or ``fractions.Fraction``
candidate keys, which is what the derivative check and the real-relaxed
minimum search rely on.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_KEY = 2**64 - 1


class SortedKeySet:
    """Deduplicated, strictly ascending uint64 keys; rank of keys[i] is i."""

    __slots__ = ("_arr",)

    def __init__(self, keys: Iterable[int] | np.ndarray):
        arr = np.asarray(keys, dtype=np.uint64)
        if arr.ndim != 1:
            raise ValueError("key set must be one-dimensional")
        if arr.size >= 2 and not np.all(arr[1:] > arr[:-1]):
            raise ValueError("keys must be strictly ascending (no duplicates)")
        self._arr = arr
        self._arr.setflags(write=False)

    @classmethod
    def from_unsorted(cls, values: Iterable[int] | np.ndarray) -> "SortedKeySet":
        """Sort and deduplicate arbitrary values into a key set."""
        arr = np.unique(np.asarray(values, dtype=np.uint64))
        return cls(arr)

    @property
    def array(self) -> np.ndarray:
        return self._arr

    def key_list(self) -> list[int]:
        return [int(k) for k in self._arr]

    def __len__(self) -> int:
        return int(self._arr.size)

    def __getitem__(self, i) -> int:
        return int(self._arr[i])

    def __iter__(self):
        return (int(k) for k in self._arr)

    def __contains__(self, key: int) -> bool:
        i = int(np.searchsorted(self._arr, np.uint64(key)))
        return i < len(self) and int(self._arr[i]) == int(key)

    def __eq__(self, other) -> bool:
        return isinstance(other, SortedKeySet) and np.array_equal(self._arr, other._arr)

    def __repr__(self) -> str:
        return f"SortedKeySet(n={len(self)})"


@dataclass(frozen=True)
class LinearModel:
    """Indexing function f(key) = slope * key + intercept, in rank units."""

    slope: float
    intercept: float

    def predict(self, key):
        return self.slope * key + self.intercept


@dataclass(frozen=True)
class CandidatePoint:
    """A virtual point: key value, its insertion rank, and the total SSE if inserted."""

    key: int
    rank: int
    sse: float = float("nan")


class FitAggregates:
    """Running sums over a key set that make per-candidate refits O(1).

    Stores n, sum(k), sum(y), sum(k^2), sum(k*y), sum(y^2) as exact integers
    plus inclusive prefix sums of the keys (``prefix[i]`` = sum of the first
    ``i`` keys), which give the tail sum of keys whose rank shifts when a
    candidate is inserted.
    """

    __slots__ = ("keys", "n", "sum_k", "sum_y", "sum_kk", "sum_ky", "sum_yy", "prefix")

    def __init__(self, keys: Sequence[int]):
        ks = [int(k) for k in keys]
        n = len(ks)
        if n < 2:
            raise ValueError("need at least 2 keys to fit")
        sum_k = sum_kk = sum_ky = 0
        prefix = [0] * (n + 1)
        for i, k in enumerate(ks):
            sum_k += k
            sum_kk += k * k
            sum_ky += k * i
            prefix[i + 1] = sum_k
        self.keys = ks
        self.n = n
        self.sum_k = sum_k
        self.sum_y = n * (n - 1) // 2
        self.sum_kk = sum_kk
        self.sum_ky = sum_ky
        self.sum_yy = (n - 1) * n * (2 * n - 1) // 6
        self.prefix = prefix

    def tail_key_sum(self, rank: int) -> int:
        """Sum of keys whose rank is >= rank (the ranks that shift on insertion)."""
        return self.prefix[self.n] - self.prefix[rank]

    def rank_of(self, key) -> int:
        """Number of keys strictly below key."""
        return bisect.bisect_left(self.keys, key)


def aggregates_build(keys: SortedKeySet) -> FitAggregates:
    """Populate all running sums for a key set in one O(n) pass."""
    if len(keys) < 2:
        raise ValueError("need at least 2 keys to fit")
    return FitAggregates(keys.key_list())


def _fit_from_sums(n, sum_k, sum_y, sum_kk, sum_ky):
    # Slope/intercept from exact integer sums; floats only at the divisions.
    r = n * sum_kk - sum_k * sum_k
    q = n * sum_ky - sum_k * sum_y
    if r == 0:
        raise ValueError("degenerate key set (zero key variance)")
    w = q / r
    b = (sum_y * r - q * sum_k) / (n * r)
    return LinearModel(w, b)


def _sse_from_sums(n, sum_k, sum_y, sum_kk, sum_ky, sum_yy):
    # Least-squares residual: SSE = (P*R - Q^2) / (R*n) with
    # P = n*Syy - Sy^2, Q = n*Sky - Sk*Sy, R = n*Skk - Sk^2.
    # Exact whenever the sums are exact; one rounding at the division.
    p = n * sum_yy - sum_y * sum_y
    q = n * sum_ky - sum_k * sum_y
    r = n * sum_kk - sum_k * sum_k
    if r == 0:
        raise ValueError("degenerate key set (zero key variance)")
    return (p * r - q * q) / (r * n)


def fit_direct(keys: SortedKeySet) -> tuple[LinearModel, float]:
    """Closed-form least squares of rank on key, plus the fit's SSE.

    This is the from-scratch baseline every incremental formula is checked
    against.
    """
    agg = aggregates_build(keys)
    model = _fit_from_sums(agg.n, agg.sum_k, agg.sum_y, agg.sum_kk, agg.sum_ky)
    sse = _sse_from_sums(agg.n, agg.sum_k, agg.sum_y, agg.sum_kk, agg.sum_ky, agg.sum_yy)
    return model, max(sse, 0.0)


def _validate_candidate(agg: FitAggregates, cand: CandidatePoint) -> None:
    key, rank = cand.key, cand.rank
    if not (agg.keys[0] < key < agg.keys[-1]):
        raise ValueError(
            f"candidate key {key} outside open range ({agg.keys[0]}, {agg.keys[-1]})"
        )
    expected = agg.rank_of(key)
    if int(key) == key and expected < agg.n and agg.keys[expected] == key:
        raise ValueError(f"candidate key {key} already present")
    if rank != expected:
        raise ValueError(f"candidate rank {rank} inconsistent (expected {expected})")


def _enlarged_sums(agg: FitAggregates, key, rank: int):
    """Sums over the base set with (key, rank) inserted and later ranks shifted.

    The enlarged ranks are exactly 0..n, so their sum and square sum are
    closed forms independent of the insertion rank.
    """
    n = agg.n
    m = n + 1
    sk = agg.sum_k + key
    skk = agg.sum_kk + key * key
    sky = agg.sum_ky + agg.tail_key_sum(rank) + key * rank
    sy = n * m // 2
    syy = n * m * (2 * n + 1) // 6
    return m, sk, sy, skk, sky, syy


def refit_with_candidate(agg: FitAggregates, cand: CandidatePoint) -> LinearModel:
    """Model refit over base + candidate, in O(1) from the aggregates."""
    _validate_candidate(agg, cand)
    m, sk, sy, skk, sky, _ = _enlarged_sums(agg, cand.key, cand.rank)
    return _fit_from_sums(m, sk, sy, skk, sky)


def loss_with_candidate(agg: FitAggregates, cand: CandidatePoint):
    """Total SSE over base + candidate under the refitted model.

    Includes the candidate's own residual term.  Integer candidate keys give
    an exactly computed value (single rounding); Fraction keys propagate
    exactly, which the finite-difference tests use.
    """
    _validate_candidate(agg, cand)
    m, sk, sy, skk, sky, syy = _enlarged_sums(agg, cand.key, cand.rank)
    p = m * syy - sy * sy
    q = m * sky - sk * sy
    r = m * skk - sk * sk
    return (p * r - q * q) / (r * m)


def slope_intercept_partials(agg: FitAggregates, cand: CandidatePoint):
    """Refit coefficients and their partial derivatives w.r.t. the candidate key.

    Writing the slope as B/A with
      A = (n+1) * sum(k^2 over enlarged) - (sum k over enlarged)^2
      B = (n+1) * sum(k*y over enlarged) - (sum k)(sum y) over enlarged,
    the key appears linearly in B and quadratically in A, so
      dA/dk = 2((n+1)k - sum k),  dB/dk = (n+1)rank - sum y,
      slope' = (A*dB - B*dA) / A^2,
      intercept' = -(slope + sum(k) * slope') / (n+1).

    Returns (slope, intercept, slope', intercept').
    """
    m, sk, sy, skk, sky, _ = _enlarged_sums(agg, cand.key, cand.rank)
    a = m * skk - sk * sk
    b_num = m * sky - sk * sy
    da = 2 * (m * cand.key - sk)
    db = m * cand.rank - sy
    w = b_num / a
    b = (sy * a - b_num * sk) / (m * a)
    wp = (a * db - b_num * da) / (a * a)
    bp = -(w + sk * wp) / m
    return w, b, wp, bp


def loss_derivative(agg: FitAggregates, cand: CandidatePoint):
    """d(loss)/d(key) with the key relaxed to a real and the rank held fixed.

    Splits the loss into the base-set residuals (whose ranks are already
    shifted for the insertion) and the candidate's own residual, then applies
    the chain rule through the refit coefficients.
    """
    _validate_candidate(agg, cand)
    w, b, wp, bp = slope_intercept_partials(agg, cand)
    n = agg.n
    # Sums over the base keys with post-insertion ranks (candidate excluded).
    sky_shift = agg.sum_ky + agg.tail_key_sum(cand.rank)
    sy_shift = agg.sum_y + (n - cand.rank)
    base_k = wp * (w * agg.sum_kk + b * agg.sum_k - sky_shift)
    base_c = bp * (w * agg.sum_k + n * b - sy_shift)
    resid = w * cand.key + b - cand.rank
    return 2 * (base_k + base_c + resid * (wp * cand.key + w + bp))


def commit_virtual_point(agg: FitAggregates, cand: CandidatePoint) -> FitAggregates:
    """Fold an accepted candidate into the base set, returning new aggregates.

    Equivalent to rebuilding from scratch over the enlarged key list; the
    enlarged set then serves as the base for the next insertion round.
    """
    _validate_candidate(agg, cand)
    key = int(cand.key)
    enlarged = FitAggregates.__new__(FitAggregates)
    keys = list(agg.keys)
    keys.insert(cand.rank, key)
    m, sk, sy, skk, sky, syy = _enlarged_sums(agg, key, cand.rank)
    prefix = [0] * (m + 1)
    acc = 0
    for i, k in enumerate(keys):
        acc += k
        prefix[i + 1] = acc
    enlarged.keys = keys
    enlarged.n = m
    enlarged.sum_k = sk
    enlarged.sum_y = sy
    enlarged.sum_kk = skk
    enlarged.sum_ky = sky
    enlarged.sum_yy = syy
    enlarged.prefix = prefix
    return enlarged


def fit_from_aggregates(agg: FitAggregates) -> tuple[LinearModel, float]:
    """Model and SSE of the current base set, straight from the sums."""
    model = _fit_from_sums(agg.n, agg.sum_k, agg.sum_y, agg.sum_kk, agg.sum_ky)
    sse = _sse_from_sums(agg.n, agg.sum_k, agg.sum_y, agg.sum_kk, agg.sum_ky, agg.sum_yy)
    return model, max(sse, 0.0)
