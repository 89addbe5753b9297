"""Bottom-up subtree merging: smooth a subtree's keys, rebuild it one level up.

For every node with a subtree (walked from the deepest eligible level toward
the root, stopping below it), the subtree's keys are collected, smoothed with
virtual points, and the subtree is rebuilt in place as a single node provided
a cost gate passes:

* exact mode: the rebuild must strictly lower both the subtree height and the
  summed model fit error (there is no in-node search to get worse).
* gapped mode: the expected per-key query-cost change, modeled as
  ``search_constant * d(expected searches) + traversal_constant * d(levels)``,
  must fall below a negative threshold.  Expected searches per key use
  ``1 + log2(1 + |predicted slot - actual slot|)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import SortedKeySet
from .index import (
    ExactNode,
    GappedLeaf,
    Index,
    InnerNode,
    _build_exact,
    _make_leaf,
)
from .smoothing import SmoothingConfig, VirtualPointSet, smooth


@dataclass(frozen=True)
class CostModelParams:
    """Per-probe and per-level costs in nanoseconds, plus the merge gate."""

    search_constant: float = 25.0
    traversal_constant: float = 50.0
    threshold_c: float = -1.0

    def __post_init__(self):
        if self.search_constant <= 0 or self.traversal_constant <= 0:
            raise ValueError("cost constants must be positive")

    def require_gating(self):
        if self.threshold_c >= 0:
            raise ValueError("threshold_c must be below 0 to demand improvement")


@dataclass
class MergeDecision:
    accepted: bool
    cost_delta: float
    sse_before: float
    sse_after: float
    height_before: int
    height_after: int
    node_level: int = 0
    subtree_keys: int = 0


@dataclass
class OptimizationReport:
    promoted: list[tuple[int, int, int]] = field(default_factory=list)  # key, old, new
    promoted_count: int = 0
    nodes_removed: int = 0
    slots_added: int = 0
    merges_accepted: int = 0
    merges_evaluated: int = 0
    virtual_budget_total: int = 0
    decisions: list[MergeDecision] = field(default_factory=list)
    wall_time_s: float = 0.0


def _iter_subtree(node):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, ExactNode):
            stack.extend(n.children.values())
        elif isinstance(n, InnerNode):
            stack.extend(ch for ch in n.children if ch is not None)


def _has_child(node) -> bool:
    if isinstance(node, ExactNode):
        return bool(node.children)
    if isinstance(node, InnerNode):
        return any(ch is not None for ch in node.children)
    return False


def _collect_pairs(node) -> tuple[np.ndarray, np.ndarray]:
    keys, pays = [], []
    for n in _iter_subtree(node):
        if isinstance(n, ExactNode):
            occ = n.state == 1
            if occ.any():
                keys.append(n.skey[occ])
                pays.append(n.pay[occ])
        elif isinstance(n, GappedLeaf):
            if n.keys.size:
                keys.append(n.keys)
                pays.append(n.pay)
    ka = np.concatenate(keys)
    pa = np.concatenate(pays)
    order = np.argsort(ka, kind="stable")
    return ka[order], pa[order]


def collect_subtree_keys(node) -> SortedKeySet:
    """Ascending union of all keys at a node and its descendants."""
    if not _has_child(node):
        raise ValueError("node has no subtree to collect")
    ka, _ = _collect_pairs(node)
    return SortedKeySet(ka)


def _subtree_sse_height(node) -> tuple[float, int]:
    sse = 0.0
    height = node.level
    for n in _iter_subtree(node):
        sse += n.build_sse
        height = max(height, n.level)
    return sse, height


def _leaf_search_errors(leaf: GappedLeaf) -> np.ndarray:
    if leaf.keys.size == 0:
        return np.empty(0, dtype=np.float64)
    pred = leaf.predict_slots(leaf.keys)
    return np.abs(pred - leaf.slotpos).astype(np.float64)


def _expected_searches(errors: np.ndarray) -> np.ndarray:
    return 1.0 + np.log2(1.0 + errors)


def _gapped_cost_profile(node) -> tuple[float, float, int]:
    """(sum of expected searches, sum of depths, key count) over a subtree."""
    s_sum = d_sum = 0.0
    count = 0
    for n in _iter_subtree(node):
        if isinstance(n, GappedLeaf) and n.keys.size:
            s_sum += float(_expected_searches(_leaf_search_errors(n)).sum())
            d_sum += float(n.level * n.keys.size)
            count += int(n.keys.size)
    return s_sum, d_sum, count


def _simulate_merge(node, keys, pays, smoothed: VirtualPointSet, cfg, mode: str):
    vkeys = np.array(smoothed.keys(), dtype=np.uint64)
    if mode == "exact":
        return _build_exact(keys, pays, vkeys, node.level, cfg)
    return _make_leaf(keys, pays, vkeys, node.level, cfg)


def _decide(node, keys, pays, smoothed, params: CostModelParams, mode: str, cfg):
    sse_before, height_before = _subtree_sse_height(node)
    built = _simulate_merge(node, keys, pays, smoothed, cfg, mode)
    sse_after, height_after = _subtree_sse_height(built)
    if mode == "exact":
        accepted = height_after < height_before and sse_after < sse_before
        cost_delta = sse_after - sse_before
    else:
        params.require_gating()
        s_b, d_b, cnt = _gapped_cost_profile(node)
        s_a, d_a, cnt_a = _gapped_cost_profile(built)
        assert cnt == cnt_a
        cost_delta = (
            params.search_constant * (s_a - s_b) / cnt
            + params.traversal_constant * (d_a - d_b) / cnt
        )
        accepted = cost_delta < params.threshold_c
    decision = MergeDecision(
        accepted=accepted,
        cost_delta=float(cost_delta),
        sse_before=sse_before,
        sse_after=sse_after,
        height_before=height_before,
        height_after=height_after,
        node_level=node.level,
        subtree_keys=int(keys.size),
    )
    return decision, built


def evaluate_merge(node, smoothed: VirtualPointSet, params: CostModelParams,
                   mode: str, cfg) -> MergeDecision:
    """Cost-gate a rebuild of node's subtree (smoothing already done)."""
    keys, pays = _collect_pairs(node)
    decision, _ = _decide(node, keys, pays, smoothed, params, mode, cfg)
    return decision


def recompute_cost_delta(index: Index, node, before_profile, params: CostModelParams) -> float:
    """Post-rebuild check: cost delta of an applied merge from actual stats."""
    s_b, d_b, cnt = before_profile
    s_a, d_a, cnt_a = _gapped_cost_profile(node)
    return (
        params.search_constant * (s_a - s_b) / cnt
        + params.traversal_constant * (d_a - d_b) / cnt
    )


def optimize(
    index: Index,
    cfg: SmoothingConfig,
    params: CostModelParams,
    start_level_offset: int | None = None,
    stop_level: int = 2,
) -> OptimizationReport:
    """Merge subtrees level by level, from the deepest eligible level up.

    ``start_level_offset`` is the distance below the root of the deepest
    level processed; by default exact mode processes only level 2 (whose
    subtrees span the most keys) while gapped mode sweeps from the bottom.
    All keys remain retrievable; a report with zero merges is a valid outcome.
    """
    if stop_level < 2:
        raise ValueError("stop_level must be >= 2 (the root is never merged)")
    t0 = time.perf_counter()
    report = OptimizationReport()
    if index.root is None:
        return report
    mode = index.cfg.mode
    if mode == "gapped":
        params.require_gating()

    all_keys = index.keys_in_order()
    _, depth_before, _ = index.lookup_batch(all_keys)
    stats_before = index.stats()

    max_parent = max(
        (n.level for n, _, _ in index.iter_nodes() if _has_child(n)), default=0
    )
    if start_level_offset is None:
        start_level = 2 if mode == "exact" else max_parent
    else:
        start_level = 1 + start_level_offset
    start_level = min(start_level, max_parent)

    for level in range(start_level, stop_level - 1, -1):
        parents = [
            (n, p, s) for n, p, s in index.iter_nodes()
            if n.level == level and _has_child(n)
        ]
        for node, parent, slot in parents:
            keys, pays = _collect_pairs(node)
            smoothed = smooth(SortedKeySet(keys), cfg)
            decision, built = _decide(node, keys, pays, smoothed, params, mode, cfg)
            report.merges_evaluated += 1
            report.decisions.append(decision)
            if not decision.accepted:
                continue
            report.merges_accepted += 1
            report.virtual_budget_total += cfg.resolve_budget(int(keys.size))
            if parent is None:
                index.root = built
            elif isinstance(parent, ExactNode):
                parent.children[slot] = built
            else:
                parent.children[slot] = built

    _, depth_after, _ = index.lookup_batch(all_keys)
    stats_after = index.stats()
    moved = depth_after < depth_before
    report.promoted = [
        (int(k), int(b), int(a))
        for k, b, a in zip(all_keys[moved], depth_before[moved], depth_after[moved])
    ]
    report.promoted_count = len(report.promoted)
    report.nodes_removed = stats_before.node_count - stats_after.node_count
    report.slots_added = stats_after.total_slots - stats_before.total_slots
    report.wall_time_s = time.perf_counter() - t0
    return report


def calibrate_cost_constants(
    index: Index,
    sample_keys,
    repetitions: int = 10,
    defaults: CostModelParams | None = None,
    probe=None,
) -> CostModelParams:
    """Fit per-level and per-probe costs from timed lookups.

    Regresses mean lookup time on (depth, search_steps); any non-positive or
    unidentifiable coefficient falls back to its default.  Fewer than 100
    samples means calibration fails and the defaults are returned.
    """
    if defaults is None:
        defaults = CostModelParams()
    sample = np.asarray(sample_keys, dtype=np.uint64)
    if sample.size < 100 or repetitions < 1:
        return defaults

    if probe is None:
        def probe(key, reps):
            t0 = time.perf_counter_ns()
            for _ in range(reps):
                trace = index.lookup(int(key))
            elapsed = (time.perf_counter_ns() - t0) / reps
            return trace.depth, trace.search_steps, elapsed

    rows = np.empty((sample.size, 3), dtype=np.float64)
    times = np.empty(sample.size, dtype=np.float64)
    for i, k in enumerate(sample):
        d, s, t = probe(int(k), repetitions)
        rows[i] = (d, s, 1.0)
        times[i] = t
    coef, _, rank, _ = np.linalg.lstsq(rows, times, rcond=None)
    trav, srch = float(coef[0]), float(coef[1])
    if rank < 2 or trav <= 0:
        trav = defaults.traversal_constant
    if rank < 2 or srch <= 0:
        srch = defaults.search_constant
    return CostModelParams(
        search_constant=srch,
        traversal_constant=trav,
        threshold_c=defaults.threshold_c,
    )
