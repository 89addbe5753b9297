"""Greedy CDF smoothing: insert virtual points where they shrink the fit loss most.

Candidate virtual keys live strictly between adjacent real keys (values already
present are skipped, and anything outside the key range cannot improve the
fit).  Each such gap is one *subsequence* whose candidates all share a single
insertion rank; the loss restricted to a subsequence is convex, so its integer
minimum is found from the derivative signs at the endpoints, bisecting when
they differ.  Rounds pick the global best candidate, commit it, and repeat
until the budget is exhausted or no candidate strictly improves the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (
    CandidatePoint,
    FitAggregates,
    LinearModel,
    SortedKeySet,
    aggregates_build,
    commit_virtual_point,
    fit_from_aggregates,
    loss_derivative,
    loss_with_candidate,
)

# Integer keys bound the bisection depth; 64 iterations cover any uint64 gap.
_MAX_BISECT_ITERS = 64


@dataclass
class Subsequence:
    """One run of integer candidate values between two adjacent keys."""

    lo_key: int
    hi_key: int
    rank: int  # shared insertion rank: index of the gap's upper key

    def __post_init__(self):
        if self.lo_key > self.hi_key:
            raise ValueError("empty subsequence")

    @property
    def width(self) -> int:
        return self.hi_key - self.lo_key + 1


@dataclass(frozen=True)
class SmoothingConfig:
    """Virtual-point budget: a fraction alpha of n, or an explicit count."""

    alpha: float | None = None
    budget: int | None = None
    require_strict_improvement: bool = True

    def __post_init__(self):
        if (self.alpha is None) == (self.budget is None):
            raise ValueError("give exactly one of alpha or budget")
        if self.alpha is not None and not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be >= 0")

    def resolve_budget(self, n: int) -> int:
        if self.budget is not None:
            return self.budget
        return math.floor(self.alpha * n)


@dataclass
class VirtualPointSet:
    """Accepted virtual points with the loss after each insertion."""

    points: list[tuple[int, int]] = field(default_factory=list)  # (key, rank at insertion)
    sse_trace: list[float] = field(default_factory=list)  # [base, after 1st, ...]
    final_model: LinearModel | None = None

    @property
    def final_sse(self) -> float:
        return self.sse_trace[-1]

    def keys(self) -> list[int]:
        return [k for k, _ in self.points]


def enumerate_subsequences(keys: SortedKeySet) -> list[Subsequence]:
    """One subsequence per gap of two or more between adjacent keys."""
    if len(keys) < 2:
        raise ValueError("need at least 2 keys")
    subs = []
    arr = keys.array
    for i in range(len(keys) - 1):
        lo = int(arr[i]) + 1
        hi = int(arr[i + 1]) - 1
        if lo <= hi:
            subs.append(Subsequence(lo, hi, i + 1))
    return subs


def _loss_at(agg: FitAggregates, key: int, rank: int) -> float:
    return loss_with_candidate(agg, CandidatePoint(key, rank))


def best_in_subsequence(sub: Subsequence, agg: FitAggregates) -> CandidatePoint:
    """Candidate minimizing the loss within one subsequence.

    Two or fewer values are evaluated directly.  Otherwise the endpoint
    derivatives decide: equal signs put the minimum at an endpoint; opposite
    signs bracket an interior minimum that integer bisection pins down.
    Ties go to the smaller key.
    """
    rank = sub.rank
    if sub.width <= 2:
        best_key = sub.lo_key
        best = _loss_at(agg, sub.lo_key, rank)
        if sub.width == 2:
            other = _loss_at(agg, sub.hi_key, rank)
            if other < best:
                best, best_key = other, sub.hi_key
        return CandidatePoint(best_key, rank, best)

    d_lo = loss_derivative(agg, CandidatePoint(sub.lo_key, rank))
    d_hi = loss_derivative(agg, CandidatePoint(sub.hi_key, rank))
    if d_lo * d_hi >= 0:
        # Minimum sits at one endpoint.
        lo_sse = _loss_at(agg, sub.lo_key, rank)
        hi_sse = _loss_at(agg, sub.hi_key, rank)
        if hi_sse < lo_sse:
            return CandidatePoint(sub.hi_key, rank, hi_sse)
        return CandidatePoint(sub.lo_key, rank, lo_sse)

    lo, hi = sub.lo_key, sub.hi_key
    for _ in range(_MAX_BISECT_ITERS):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        d = loss_derivative(agg, CandidatePoint(mid, rank))
        if d < 0:
            lo = mid
        elif d > 0:
            hi = mid
        else:
            lo = hi = mid
            break
    lo_sse = _loss_at(agg, lo, rank)
    if hi == lo:
        return CandidatePoint(lo, rank, lo_sse)
    hi_sse = _loss_at(agg, hi, rank)
    if hi_sse < lo_sse:
        return CandidatePoint(hi, rank, hi_sse)
    return CandidatePoint(lo, rank, lo_sse)


def _split_subsequences(
    subs: list[Subsequence], accepted: CandidatePoint
) -> list[Subsequence]:
    """Update gap list after committing a point: split its gap, shift later ranks."""
    out = []
    for s in subs:
        if s.lo_key <= accepted.key <= s.hi_key:
            if s.lo_key <= accepted.key - 1:
                out.append(Subsequence(s.lo_key, accepted.key - 1, s.rank))
            if accepted.key + 1 <= s.hi_key:
                out.append(Subsequence(accepted.key + 1, s.hi_key, s.rank + 1))
        elif s.rank > accepted.rank:
            out.append(Subsequence(s.lo_key, s.hi_key, s.rank + 1))
        else:
            out.append(s)
    return out


def smooth(keys: SortedKeySet, cfg: SmoothingConfig) -> VirtualPointSet:
    """Greedy virtual-point insertion with early stopping.

    Each round evaluates every subsequence's best candidate in O(1) via the
    aggregates, inserts the global minimum if it strictly lowers the total
    SSE, and re-derives the split gap.  Stops at the budget or at the first
    round with no strict improvement.
    """
    agg = aggregates_build(keys)
    budget = cfg.resolve_budget(len(keys))
    model, base_sse = fit_from_aggregates(agg)
    result = VirtualPointSet(sse_trace=[base_sse], final_model=model)
    if budget == 0:
        return result

    subs = enumerate_subsequences(keys)
    previous = base_sse
    while len(result.points) < budget and subs:
        best: CandidatePoint | None = None
        for s in subs:
            c = best_in_subsequence(s, agg)
            if best is None or (c.sse, c.key) < (best.sse, best.key):
                best = c
        if best is None:
            break
        if cfg.require_strict_improvement and not (best.sse < previous):
            break
        result.points.append((best.key, best.rank))
        result.sse_trace.append(best.sse)
        agg = commit_virtual_point(agg, best)
        subs = _split_subsequences(subs, best)
        previous = best.sse

    result.final_model, _ = fit_from_aggregates(agg)
    return result
