"""Hierarchical learned index with two node policies.

``exact`` mode places every key at the slot its node model predicts; keys
that collide on a slot are pushed into a child node fit over just that group,
so lookups never search within a node.  ``gapped`` mode routes through
model-partitioned inner nodes to leaves that keep keys in order with gaps,
correcting model error by exponential search.

Virtual points from CDF smoothing materialize as reserved empty slots at
their predicted positions: invisible to queries, usable by inserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SortedKeySet

EMPTY, KEY, CHILD = 0, 1, 2

_INT64_SAFE = 2**63


class DuplicateKeyError(ValueError):
    pass


@dataclass(frozen=True)
class IndexConfig:
    mode: str = "exact"  # "exact" | "gapped"
    slots_per_key: float = 2.0
    max_leaf_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "gapped"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.slots_per_key < 1.0:
            raise ValueError("slots_per_key must be >= 1")
        if self.max_leaf_size < 16:
            raise ValueError("max_leaf_size must be >= 16")


@dataclass
class LookupTrace:
    found: bool
    depth: int
    search_steps: int
    payload: int | None = None


@dataclass
class InsertOutcome:
    key: int
    depth: int
    consumed_virtual_gap: bool
    created_node: bool


@dataclass
class IndexStats:
    height: int
    key_count: int
    node_count: int
    total_slots: int
    virtual_slots: int
    total_sse: float
    keys_per_level: dict[int, int] = field(default_factory=dict)
    nodes_per_level: dict[int, int] = field(default_factory=dict)


def _centered(keys: np.ndarray, origin: int) -> np.ndarray:
    """Exact signed key-minus-origin as float64 (vector fast path below 2^63)."""
    if keys.size == 0:
        return np.empty(0, dtype=np.float64)
    if origin < _INT64_SAFE and int(keys.max()) < _INT64_SAFE:
        return (keys.astype(np.int64) - np.int64(origin)).astype(np.float64)
    return np.array([float(int(k) - origin) for k in keys], dtype=np.float64)


def _fit_ranks(seq: np.ndarray) -> tuple[int, float, float]:
    """Least squares of rank on (key - origin); origin is the first key."""
    origin = int(seq[0])
    n = seq.size
    if n == 1:
        return origin, 0.0, 0.0
    dk = _centered(seq, origin)
    ys = np.arange(n, dtype=np.float64)
    km = dk.mean()
    d = dk - km
    denom = float(np.dot(d, d))
    w = float(np.dot(d, ys) / denom)
    b = float(ys.mean() - w * km)
    return origin, w, b


def _interp_ranks(seq: np.ndarray) -> tuple[int, float, float]:
    # Interpolation through the extremes: guarantees the endpoints separate.
    origin = int(seq[0])
    span = int(seq[-1]) - origin
    return origin, (seq.size - 1) / span, 0.0


def _rank_sse(seq: np.ndarray, origin: int, w: float, b: float) -> float:
    resid = w * _centered(seq, origin) + b - np.arange(seq.size, dtype=np.float64)
    return float(np.dot(resid, resid))


def _merge_virtual(keys: np.ndarray, pays: np.ndarray, vkeys: np.ndarray):
    """Interleave real and virtual keys ascending; returns (seq, virt, pays)."""
    if vkeys.size == 0:
        return keys, np.zeros(keys.size, dtype=bool), pays
    seq = np.concatenate([keys, vkeys])
    virt = np.concatenate([np.zeros(keys.size, dtype=bool), np.ones(vkeys.size, dtype=bool)])
    pall = np.concatenate([pays, np.zeros(vkeys.size, dtype=np.uint64)])
    order = np.argsort(seq, kind="stable")
    return seq[order], virt[order], pall[order]


class ExactNode:
    __slots__ = (
        "level", "origin", "slope", "intercept", "expansion", "nslots",
        "skey", "pay", "state", "vflag", "children", "build_sse", "build_count",
        "key_count",
    )

    def predict_slot(self, key: int) -> int:
        dk = float(int(key) - self.origin)
        pred = (self.slope * dk + self.intercept) * self.expansion
        return min(max(math.floor(pred + 0.5), 0), self.nslots - 1)

    def predict_slots(self, keys: np.ndarray) -> np.ndarray:
        pred = (self.slope * _centered(keys, self.origin) + self.intercept) * self.expansion
        return np.clip(np.floor(pred + 0.5), 0, self.nslots - 1).astype(np.int64)


def _build_exact(
    keys: np.ndarray, pays: np.ndarray, vkeys: np.ndarray, level: int, cfg: IndexConfig
) -> ExactNode:
    """Model-predicted placement; colliding real keys recurse into children."""
    seq, virt, pall = _merge_virtual(keys, pays, vkeys)
    nb = seq.size
    node = ExactNode()
    node.level = level
    origin, w, b = _fit_ranks(seq)
    nslots = max(1, math.ceil(cfg.slots_per_key * nb))
    node.origin, node.slope, node.intercept = origin, w, b
    node.nslots = nslots
    node.expansion = nslots / nb
    node.build_sse = _rank_sse(seq, origin, w, b)
    node.build_count = nb

    slots = node.predict_slots(seq)
    if nb >= 2 and slots[0] == slots[-1]:
        # Fit failed to separate the extremes; fall back to interpolation.
        node.origin, node.slope, node.intercept = _interp_ranks(seq)
        node.build_sse = _rank_sse(seq, node.origin, node.slope, node.intercept)
        slots = node.predict_slots(seq)

    node.skey = np.zeros(nslots, dtype=np.uint64)
    node.pay = np.zeros(nslots, dtype=np.uint64)
    node.state = np.zeros(nslots, dtype=np.int8)
    node.vflag = np.zeros(nslots, dtype=bool)
    node.children = {}
    node.key_count = 0

    starts = np.concatenate([[0], np.flatnonzero(np.diff(slots)) + 1, [nb]])
    for i in range(starts.size - 1):
        i0, i1 = int(starts[i]), int(starts[i + 1])
        s = int(slots[i0])
        rmask = ~virt[i0:i1]
        nreal = int(rmask.sum())
        if nreal == 0:
            node.vflag[s] = True  # reserved gap from virtual point(s)
        elif nreal == 1:
            node.state[s] = KEY
            node.skey[s] = seq[i0:i1][rmask][0]
            node.pay[s] = pall[i0:i1][rmask][0]
            node.key_count += 1
        else:
            child = _build_exact(
                seq[i0:i1][rmask], pall[i0:i1][rmask],
                np.empty(0, dtype=np.uint64), level + 1, cfg,
            )
            node.state[s] = CHILD
            node.children[s] = child
    return node


class GappedLeaf:
    __slots__ = (
        "level", "origin", "slope", "intercept", "expansion", "nslots",
        "keys", "slotpos", "pay", "occ", "vflag", "build_sse", "build_count",
    )

    def predict_slot(self, key: int) -> int:
        dk = float(int(key) - self.origin)
        pred = (self.slope * dk + self.intercept) * self.expansion
        return min(max(math.floor(pred + 0.5), 0), self.nslots - 1)

    def predict_slots(self, keys: np.ndarray) -> np.ndarray:
        pred = (self.slope * _centered(keys, self.origin) + self.intercept) * self.expansion
        return np.clip(np.floor(pred + 0.5), 0, self.nslots - 1).astype(np.int64)

    def free_slots(self) -> int:
        return self.nslots - self.keys.size


class InnerNode:
    __slots__ = (
        "level", "origin", "slope", "intercept", "fanout", "n", "children",
        "build_sse", "build_count",
    )

    def bucket_of(self, key: int) -> int:
        dk = float(int(key) - self.origin)
        pred = self.slope * dk + self.intercept
        return min(max(math.floor(pred * self.fanout / self.n), 0), self.fanout - 1)

    def buckets_of(self, keys: np.ndarray) -> np.ndarray:
        pred = self.slope * _centered(keys, self.origin) + self.intercept
        return np.clip(np.floor(pred * self.fanout / self.n), 0, self.fanout - 1).astype(np.int64)


def _make_leaf(
    keys: np.ndarray, pays: np.ndarray, vkeys: np.ndarray, level: int, cfg: IndexConfig
) -> GappedLeaf:
    """Gapped array: model-predicted slots, nudged to stay strictly increasing."""
    seq, virt, pall = _merge_virtual(keys, pays, vkeys)
    nb = seq.size
    leaf = GappedLeaf()
    leaf.level = level
    nslots = max(nb, math.ceil(cfg.slots_per_key * max(nb, 1)))
    if nb == 0:
        leaf.origin, leaf.slope, leaf.intercept = 0, 0.0, 0.0
        leaf.nslots, leaf.expansion = nslots, 1.0
        leaf.keys = np.empty(0, dtype=np.uint64)
        leaf.slotpos = np.empty(0, dtype=np.int64)
        leaf.pay = np.empty(0, dtype=np.uint64)
        leaf.occ = np.zeros(nslots, dtype=bool)
        leaf.vflag = np.zeros(nslots, dtype=bool)
        leaf.build_sse = 0.0
        leaf.build_count = 0
        return leaf
    origin, w, b = _fit_ranks(seq)
    leaf.origin, leaf.slope, leaf.intercept = origin, w, b
    leaf.nslots = nslots
    leaf.expansion = nslots / nb
    leaf.build_sse = _rank_sse(seq, origin, w, b)
    leaf.build_count = nb

    ideal = leaf.predict_slots(seq)
    ar = np.arange(nb, dtype=np.int64)
    q = np.clip(np.maximum.accumulate(ideal - ar), 0, nslots - nb)
    pos = q + ar

    leaf.occ = np.zeros(nslots, dtype=bool)
    leaf.vflag = np.zeros(nslots, dtype=bool)
    real = ~virt
    leaf.keys = seq[real]
    leaf.pay = pall[real]
    leaf.slotpos = pos[real]
    leaf.occ[leaf.slotpos] = True
    leaf.vflag[pos[virt]] = True
    return leaf


def _build_gapped(keys: np.ndarray, pays: np.ndarray, level: int, cfg: IndexConfig):
    """Model-partitioned routing tree over gapped leaves of <= max_leaf_size."""
    n = keys.size
    if n <= cfg.max_leaf_size:
        return _make_leaf(keys, pays, np.empty(0, dtype=np.uint64), level, cfg)
    node = InnerNode()
    node.level = level
    origin, w, b = _fit_ranks(keys)
    node.origin, node.slope, node.intercept = origin, w, b
    node.n = n
    node.fanout = min(max(2, math.ceil(n / cfg.max_leaf_size)), 1 << 16)
    node.build_sse = _rank_sse(keys, origin, w, b)
    node.build_count = n

    buckets = node.buckets_of(keys)
    if buckets[0] == buckets[-1]:
        node.origin, node.slope, node.intercept = _interp_ranks(keys)
        node.build_sse = _rank_sse(keys, node.origin, node.slope, node.intercept)
        buckets = node.buckets_of(keys)

    node.children = [None] * node.fanout
    starts = np.concatenate([[0], np.flatnonzero(np.diff(buckets)) + 1, [n]])
    for i in range(starts.size - 1):
        i0, i1 = int(starts[i]), int(starts[i + 1])
        node.children[int(buckets[i0])] = _build_gapped(keys[i0:i1], pays[i0:i1], level + 1, cfg)
    return node


def _exp_search(arr: np.ndarray, key: int, start: int) -> tuple[int, int]:
    """Exponential + binary search from start; returns (index or -1, probes)."""
    n = arr.size
    probes = 1
    v = int(arr[start])
    if v == key:
        return start, probes
    if v < key:
        lo, off = start, 1
        while True:
            j = min(start + off, n - 1)
            if j == lo:
                return -1, probes
            probes += 1
            vj = int(arr[j])
            if vj == key:
                return j, probes
            if vj > key:
                hi = j
                break
            if j == n - 1:
                return -1, probes
            lo, off = j, off << 1
    else:
        hi, off = start, 1
        while True:
            j = max(start - off, 0)
            if j == hi:
                return -1, probes
            probes += 1
            vj = int(arr[j])
            if vj == key:
                return j, probes
            if vj < key:
                lo = j
                break
            if j == 0:
                return -1, probes
            hi, off = j, off << 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        probes += 1
        vm = int(arr[mid])
        if vm == key:
            return mid, probes
        if vm < key:
            lo = mid
        else:
            hi = mid
    return -1, probes


class Index:
    """Queryable learned index; structure is fixed by (keys, config)."""

    def __init__(self, cfg: IndexConfig):
        self.cfg = cfg
        self.root = None
        self.key_count = 0

    # ------------------------------------------------------------------
    # Build
    # ------------------------------------------------------------------
    @classmethod
    def bulk_build(cls, keys: SortedKeySet, cfg: IndexConfig, payloads=None) -> "Index":
        idx = cls(cfg)
        arr = keys.array
        if arr.size == 0:
            return idx
        pays = arr.copy() if payloads is None else np.asarray(payloads, dtype=np.uint64)
        if pays.size != arr.size:
            raise ValueError("payloads must align with keys")
        novirt = np.empty(0, dtype=np.uint64)
        if cfg.mode == "exact":
            idx.root = _build_exact(arr, pays, novirt, 1, cfg)
        else:
            idx.root = _build_gapped(arr, pays, 1, cfg)
        idx.key_count = int(arr.size)
        return idx

    # ------------------------------------------------------------------
    # Lookup
    # ------------------------------------------------------------------
    def lookup(self, key: int) -> LookupTrace:
        node = self.root
        if node is None:
            return LookupTrace(False, 0, 0)
        if self.cfg.mode == "exact":
            while True:
                s = node.predict_slot(key)
                st = int(node.state[s])
                if st == CHILD:
                    node = node.children[s]
                    continue
                if st == KEY and int(node.skey[s]) == int(key):
                    return LookupTrace(True, node.level, 0, int(node.pay[s]))
                return LookupTrace(False, node.level, 0)
        while isinstance(node, InnerNode):
            child = node.children[node.bucket_of(key)]
            if child is None:
                return LookupTrace(False, node.level, 0)
            node = child
        leaf: GappedLeaf = node
        if leaf.keys.size == 0:
            return LookupTrace(False, leaf.level, 0)
        p = leaf.predict_slot(key)
        rhat = min(int(np.searchsorted(leaf.slotpos, p)), leaf.keys.size - 1)
        i, probes = _exp_search(leaf.keys, int(key), rhat)
        if i >= 0:
            return LookupTrace(True, leaf.level, probes, int(leaf.pay[i]))
        return LookupTrace(False, leaf.level, probes)

    def lookup_batch(self, keys: np.ndarray):
        """Vectorized traversal; returns (found, depth, steps) arrays."""
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        found = np.zeros(keys.size, dtype=bool)
        depth = np.zeros(keys.size, dtype=np.int32)
        steps = np.zeros(keys.size, dtype=np.int32)
        if self.root is None or keys.size == 0:
            return found, depth, steps
        idxs = np.arange(keys.size, dtype=np.int64)
        if self.cfg.mode == "exact":
            self._batch_exact(self.root, keys, idxs, found, depth)
        else:
            self._batch_gapped(self.root, keys, idxs, found, depth, steps)
        return found, depth, steps

    def _batch_exact(self, node: ExactNode, keys, idxs, found, depth):
        slots = node.predict_slots(keys)
        st = node.state[slots]
        hit = (st == KEY) & (node.skey[slots] == keys)
        term = st != CHILD
        depth[idxs[term]] = node.level
        found[idxs[hit]] = True
        if not np.any(~term):
            return
        cm = ~term
        cs, ck, ci = slots[cm], keys[cm], idxs[cm]
        order = np.argsort(cs, kind="stable")
        cs, ck, ci = cs[order], ck[order], ci[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(cs)) + 1, [cs.size]])
        for i in range(starts.size - 1):
            i0, i1 = int(starts[i]), int(starts[i + 1])
            self._batch_exact(node.children[int(cs[i0])], ck[i0:i1], ci[i0:i1], found, depth)

    def _batch_gapped(self, node, keys, idxs, found, depth, steps):
        if isinstance(node, GappedLeaf):
            if node.keys.size == 0:
                depth[idxs] = node.level
                return
            p = node.predict_slots(keys)
            rhat = np.minimum(np.searchsorted(node.slotpos, p), node.keys.size - 1)
            depth[idxs] = node.level
            for j in range(keys.size):
                i, pr = _exp_search(node.keys, int(keys[j]), int(rhat[j]))
                steps[idxs[j]] = pr
                if i >= 0:
                    found[idxs[j]] = True
            return
        buckets = node.buckets_of(keys)
        order = np.argsort(buckets, kind="stable")
        bs, bk, bi = buckets[order], keys[order], idxs[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(bs)) + 1, [bs.size]])
        for i in range(starts.size - 1):
            i0, i1 = int(starts[i]), int(starts[i + 1])
            child = node.children[int(bs[i0])]
            if child is None:
                depth[bi[i0:i1]] = node.level
            else:
                self._batch_gapped(child, bk[i0:i1], bi[i0:i1], found, depth, steps)

    # ------------------------------------------------------------------
    # Insert
    # ------------------------------------------------------------------
    def insert(self, key: int, payload: int | None = None) -> InsertOutcome:
        key = int(key)
        pay = key if payload is None else int(payload)
        if self.root is None:
            arr = np.array([key], dtype=np.uint64)
            pa = np.array([pay], dtype=np.uint64)
            novirt = np.empty(0, dtype=np.uint64)
            if self.cfg.mode == "exact":
                self.root = _build_exact(arr, pa, novirt, 1, self.cfg)
            else:
                self.root = _make_leaf(arr, pa, novirt, 1, self.cfg)
            self.key_count = 1
            return InsertOutcome(key, 1, False, True)
        if self.cfg.mode == "exact":
            out = self._insert_exact(key, pay)
        else:
            out = self._insert_gapped(key, pay)
        self.key_count += 1
        return out

    def _insert_exact(self, key: int, pay: int) -> InsertOutcome:
        node = self.root
        while True:
            s = node.predict_slot(key)
            st = int(node.state[s])
            if st == CHILD:
                node = node.children[s]
                continue
            if st == EMPTY:
                consumed = bool(node.vflag[s])
                node.state[s] = KEY
                node.skey[s] = key
                node.pay[s] = pay
                node.vflag[s] = False
                node.key_count += 1
                return InsertOutcome(key, node.level, consumed, False)
            other = int(node.skey[s])
            if other == key:
                raise DuplicateKeyError(f"key {key} already present")
            pair = sorted([(key, pay), (other, int(node.pay[s]))])
            child = _build_exact(
                np.array([pair[0][0], pair[1][0]], dtype=np.uint64),
                np.array([pair[0][1], pair[1][1]], dtype=np.uint64),
                np.empty(0, dtype=np.uint64), node.level + 1, self.cfg,
            )
            node.state[s] = CHILD
            node.skey[s] = 0
            node.pay[s] = 0
            node.children[s] = child
            node.key_count -= 1
            d = node.level
            probe = child
            while True:
                cs = probe.predict_slot(key)
                if int(probe.state[cs]) == CHILD:
                    probe = probe.children[cs]
                    continue
                d = probe.level
                break
            return InsertOutcome(key, d, False, True)

    def _insert_gapped(self, key: int, pay: int) -> InsertOutcome:
        path = []
        node = self.root
        while isinstance(node, InnerNode):
            bkt = node.bucket_of(key)
            child = node.children[bkt]
            if child is None:
                leaf = _make_leaf(
                    np.array([key], dtype=np.uint64), np.array([pay], dtype=np.uint64),
                    np.empty(0, dtype=np.uint64), node.level + 1, self.cfg,
                )
                node.children[bkt] = leaf
                return InsertOutcome(key, leaf.level, False, True)
            path.append((node, bkt))
            node = child
        leaf: GappedLeaf = node
        r = int(np.searchsorted(leaf.keys, np.uint64(key)))
        if r < leaf.keys.size and int(leaf.keys[r]) == key:
            raise DuplicateKeyError(f"key {key} already present")

        if leaf.free_slots() == 0:
            merged = np.insert(leaf.keys, r, np.uint64(key))
            mpays = np.insert(leaf.pay, r, np.uint64(pay))
            if merged.size <= self.cfg.max_leaf_size:
                repl = _make_leaf(merged, mpays, np.empty(0, dtype=np.uint64),
                                  leaf.level, self.cfg)
            else:
                repl = _build_gapped(merged, mpays, leaf.level, self.cfg)
            if path:
                parent, bkt = path[-1]
                parent.children[bkt] = repl
            else:
                self.root = repl
            probe = repl
            while isinstance(probe, InnerNode):
                probe = probe.children[probe.bucket_of(key)]
            return InsertOutcome(key, probe.level, False, True)

        t = leaf.predict_slot(key)
        f = self._nearest_free(leaf, t)
        s_left = int(leaf.slotpos[r - 1]) if r > 0 else -1
        s_right = int(leaf.slotpos[r]) if r < leaf.keys.size else leaf.nslots
        consumed = bool(leaf.vflag[f])
        leaf.vflag[f] = False
        leaf.occ[f] = True
        if s_left < f < s_right:
            leaf.slotpos = np.insert(leaf.slotpos, r, f)
        elif f >= s_right:
            j = int(np.searchsorted(leaf.slotpos, f))
            leaf.slotpos = np.concatenate([
                leaf.slotpos[:r], leaf.slotpos[r:r + 1], leaf.slotpos[r + 1:j],
                np.array([f], dtype=np.int64), leaf.slotpos[j:],
            ])
        else:
            j = int(np.searchsorted(leaf.slotpos, f))
            leaf.slotpos = np.concatenate([
                leaf.slotpos[:j], np.array([f], dtype=np.int64), leaf.slotpos[j:r - 1],
                leaf.slotpos[r - 1:r], leaf.slotpos[r:],
            ])
        leaf.keys = np.insert(leaf.keys, r, np.uint64(key))
        leaf.pay = np.insert(leaf.pay, r, np.uint64(pay))
        return InsertOutcome(key, leaf.level, consumed, False)

    @staticmethod
    def _nearest_free(leaf: GappedLeaf, t: int) -> int:
        if not leaf.occ[t]:
            return t
        lo, hi = t - 1, t + 1
        while lo >= 0 or hi < leaf.nslots:
            if lo >= 0 and not leaf.occ[lo]:
                return lo
            if hi < leaf.nslots and not leaf.occ[hi]:
                return hi
            lo -= 1
            hi += 1
        raise RuntimeError("no free slot")  # caller checks free_slots first

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------
    def iter_nodes(self):
        """Yields (node, parent, slot_or_bucket); root has parent None."""
        if self.root is None:
            return
        stack = [(self.root, None, None)]
        while stack:
            node, parent, slot = stack.pop()
            yield node, parent, slot
            if isinstance(node, ExactNode):
                for s, ch in node.children.items():
                    stack.append((ch, node, s))
            elif isinstance(node, InnerNode):
                for bkt, ch in enumerate(node.children):
                    if ch is not None:
                        stack.append((ch, node, bkt))

    def keys_in_order(self) -> np.ndarray:
        out = []
        self._collect_in_order(self.root, out)
        if not out:
            return np.empty(0, dtype=np.uint64)
        return np.concatenate(out)

    def _collect_in_order(self, node, out):
        if node is None:
            return
        if isinstance(node, ExactNode):
            key_slots = np.flatnonzero(node.state == KEY)
            child_slots = sorted(node.children)
            ci = 0
            last = 0
            for s in child_slots:
                seg = key_slots[(key_slots >= last) & (key_slots < s)]
                if seg.size:
                    out.append(node.skey[seg])
                self._collect_in_order(node.children[s], out)
                last = s + 1
            seg = key_slots[key_slots >= last]
            if seg.size:
                out.append(node.skey[seg])
        elif isinstance(node, InnerNode):
            for ch in node.children:
                if ch is not None:
                    self._collect_in_order(ch, out)
        else:
            if node.keys.size:
                out.append(node.keys)

    def height(self) -> int:
        return max((n.level for n, _, _ in self.iter_nodes()), default=0)

    def stats(self) -> IndexStats:
        keys_per_level: dict[int, int] = {}
        nodes_per_level: dict[int, int] = {}
        total_slots = 0
        virtual_slots = 0
        total_sse = 0.0
        key_count = 0
        height = 0
        for node, _, _ in self.iter_nodes():
            lvl = node.level
            height = max(height, lvl)
            nodes_per_level[lvl] = nodes_per_level.get(lvl, 0) + 1
            total_sse += node.build_sse
            if isinstance(node, ExactNode):
                nk = node.key_count
                total_slots += node.nslots
                virtual_slots += int(node.vflag.sum())
            elif isinstance(node, GappedLeaf):
                nk = int(node.keys.size)
                total_slots += node.nslots
                virtual_slots += int(node.vflag.sum())
            else:
                nk = 0
            if nk:
                keys_per_level[lvl] = keys_per_level.get(lvl, 0) + nk
                key_count += nk
        return IndexStats(
            height=height,
            key_count=key_count,
            node_count=sum(nodes_per_level.values()),
            total_slots=total_slots,
            virtual_slots=virtual_slots,
            total_sse=total_sse,
            keys_per_level=keys_per_level,
            nodes_per_level=nodes_per_level,
        )


def bulk_build(keys: SortedKeySet, cfg: IndexConfig, payloads=None) -> Index:
    """Build an index over deduplicated ascending keys (empty set -> empty index)."""
    return Index.bulk_build(keys, cfg, payloads)
