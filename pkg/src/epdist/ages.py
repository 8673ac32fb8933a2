"""Age-binned estimate of the minimum expected remaining latency from a live state.

Each table cell holds a Pareto frontier of ``(age_bin, latency)`` pairs:
bins ascending, latencies strictly decreasing. Cell (i, j) at bin a is the
cumulative minimum latency over entries whose resulting EP age falls in a bin
<= a, so the frontier is exactly the list of that table's breakpoints.

Ages of an EP are the older of its two qubits. When two children combine,
the faster child waits for the slower one, so the result bin is
``max_c(bin_c + bins(M - L_c)) + bins(b_t)`` where M is the larger child
latency. Durations are rounded up to whole bins; anything reaching
``n_bins`` is infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import LinkKey, QuantumNetwork, link_expected_latency, link_key, link_success_prob
from .swapdp import default_h_max

INF = math.inf
N_BINS = 100

Frontier = list[tuple[int, float]]


@dataclass(frozen=True)
class EpView:
    """An EP as seen by the estimator. ``elapsed`` is set only for virtual EPs of active links."""

    node_a: int
    node_b: int
    age_a: float
    age_b: float
    links: tuple[LinkKey, ...]
    ep_id: int = -1
    elapsed: float | None = None

    @property
    def virtual(self) -> bool:
        return self.elapsed is not None

    @property
    def age(self) -> float:
        return max(self.age_a, self.age_b)

    @property
    def nodes(self) -> tuple[int, int]:
        return (self.node_a, self.node_b)

    def age_at(self, node: int) -> float:
        return self.age_a if node == self.node_a else self.age_b


@dataclass(frozen=True)
class PendingView:
    """A merged EP whose swap is still in flight; ages are as of the snapshot clock."""

    node_a: int
    node_b: int
    age_a: float
    age_b: float
    links: tuple[LinkKey, ...]
    remaining: float


@dataclass
class StateSnapshot:
    """Live EPs, in-flight swaps and per-link elapsed generation time.

    A link covered by the lineage of an EP or pending swap is inactive. Any
    other link is generating, with elapsed time ``active.get(link, 0.0)``.
    """

    eps: tuple[EpView, ...] = ()
    active: dict[LinkKey, float] = field(default_factory=dict)
    pending: tuple[PendingView, ...] = ()
    clock: float = 0.0

    def covered(self) -> set[LinkKey]:
        out: set[LinkKey] = set()
        for e in self.eps:
            out.update(e.links)
        for p in self.pending:
            out.update(p.links)
        return out

    def elapsed(self, key: LinkKey) -> float:
        return self.active.get(key, 0.0)

    def has_pair(self, s: int, d: int) -> bool:
        return any({e.node_a, e.node_b} == {s, d} for e in self.eps)


def bin_width(tau: float, n_bins: int = N_BINS) -> float:
    return tau / n_bins


def age_bin(age: float, width: float) -> int:
    return int(age // width)


def duration_bins(x: float, width: float) -> int:
    if x <= 0.0:
        return 0
    return max(0, math.ceil(x / width - 1e-9))


def remaining_latency(net: QuantumNetwork, key: LinkKey, elapsed: float) -> float:
    """Expected time left on an active link, never below one attempt."""
    link = net.link_map[key]
    return max(net.params.gen_latency_gt, link_expected_latency(net, link) - elapsed)


def pareto(entries) -> Frontier:
    out: Frontier = []
    best = INF
    for b, lat in sorted(entries):
        if lat < best:
            out.append((b, lat))
            best = lat
    return out


# path-restricted estimator --------------------------------------------------


def _segment(path_pos: dict[int, int], path_links: list[LinkKey], a: int, b: int,
             links: tuple[LinkKey, ...]) -> tuple[int, int] | None:
    if a not in path_pos or b not in path_pos:
        return None
    lo, hi = sorted((path_pos[a], path_pos[b]))
    if lo == hi or set(links) != set(path_links[lo:hi]) or len(links) != hi - lo:
        return None
    return lo, hi


def path_frontiers(net: QuantumNetwork, snapshot: StateSnapshot, path: Sequence[int],
                   n_bins: int = N_BINS) -> dict[tuple[int, int], Frontier]:
    """Height-unbounded interval DP over ``path`` with pivots at interior path nodes."""
    p = net.params
    width = bin_width(p.decoherence_tau, n_bins)
    bt, bp = p.atomic_bsm_latency_bt, p.atomic_bsm_bp
    bt_bins = duration_bins(bt, width)
    m = len(path) - 1
    pos = {v: x for x, v in enumerate(path)}
    plinks = [link_key(a, b) for a, b in zip(path, path[1:])]
    covered = snapshot.covered()

    base: dict[tuple[int, int], list] = {}
    for a, key in enumerate(plinks):
        if key in covered or link_success_prob(net, net.link_map[key]) <= 0.0:
            continue
        base.setdefault((a, a + 1), []).append((0, remaining_latency(net, key, snapshot.elapsed(key))))
    for e in snapshot.eps:
        seg = _segment(pos, plinks, e.node_a, e.node_b, e.links)
        if seg is not None and e.age < p.decoherence_tau:
            b = age_bin(e.age, width)
            if b < n_bins:
                base.setdefault(seg, []).append((b, 0.0))
    for q in snapshot.pending:
        seg = _segment(pos, plinks, q.node_a, q.node_b, q.links)
        if seg is not None:
            b = age_bin(max(q.age_a, q.age_b) + q.remaining, width)
            if b < n_bins:
                base.setdefault(seg, []).append((b, q.remaining))

    # hot loop: inlined merge of child frontiers; singletons dominate in practice
    F: dict[tuple[int, int], Frontier] = {}
    for span in range(1, m + 1):
        for a in range(0, m - span + 1):
            b = a + span
            cands = list(base.get((a, b), ()))
            for k in range(a + 1, b):
                left, right = F[(a, k)], F[(k, b)]
                for b1, l1 in left:
                    for b2, l2 in right:
                        gap = l1 - l2
                        if gap >= 0.0:
                            lag = math.ceil(gap / width - 1e-9) if gap > 0.0 else 0
                            rb = b2 + lag if b2 + lag > b1 else b1
                            top = l1
                        else:
                            lag = math.ceil(-gap / width - 1e-9)
                            rb = b1 + lag if b1 + lag > b2 else b2
                            top = l2
                        rb += bt_bins
                        if rb < n_bins:
                            cands.append((rb, (1.5 * top + bt) / bp))
            F[(a, b)] = cands if len(cands) < 2 else pareto(cands)
    return F


def estimate_on_path(net: QuantumNetwork, snapshot: StateSnapshot, path: Sequence[int],
                     n_bins: int = N_BINS) -> float:
    s, d = path[0], path[-1]
    if snapshot.has_pair(s, d):
        return 0.0
    front = path_frontiers(net, snapshot, path, n_bins)[(0, len(path) - 1)]
    return front[-1][1] if front else INF


# whole-network estimator ----------------------------------------------------


@dataclass
class AgedLatencyTable:
    """Frontiers for every node pair at one height bound, padded to a common width.

    ``lat[i, j, f]`` / ``bins[i, j, f]`` hold the f-th frontier entry; padding
    has latency inf and bin ``n_bins``.
    """

    node_ids: list[int]
    lat: np.ndarray
    bins: np.ndarray
    n_bins: int

    def frontier(self, i: int, j: int) -> Frontier:
        idx = {nid: x for x, nid in enumerate(self.node_ids)}
        a, b = idx[i], idx[j]
        return [(int(bn), float(l)) for bn, l in zip(self.bins[a, b], self.lat[a, b]) if l < INF]

    def value(self, i: int, j: int, age_bin: int | None = None) -> float:
        """Cumulative table entry: minimum latency with result age in bins <= ``age_bin``."""
        limit = self.n_bins - 1 if age_bin is None else age_bin
        vals = [l for bn, l in self.frontier(i, j) if bn <= limit]
        return min(vals) if vals else INF


def _pack(cells: dict[tuple[int, int], Frontier], n: int, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    width = max((len(f) for f in cells.values()), default=1) or 1
    lat = np.full((n, n, width), INF)
    bins = np.full((n, n, width), n_bins, dtype=np.int64)
    for (i, j), front in cells.items():
        for f, (b, l) in enumerate(front):
            lat[i, j, f] = lat[j, i, f] = l
            bins[i, j, f] = bins[j, i, f] = b
    return lat, bins


def network_base(net: QuantumNetwork, snapshot: StateSnapshot, n_bins: int) -> dict[tuple[int, int], Frontier]:
    p = net.params
    width = bin_width(p.decoherence_tau, n_bins)
    idx = net.node_index
    covered = snapshot.covered()
    raw: dict[tuple[int, int], list] = {}

    def add(u: int, v: int, entry) -> None:
        a, b = sorted((idx[u], idx[v]))
        raw.setdefault((a, b), []).append(entry)

    for link in net.links:
        key = link.key
        if key in covered or link_success_prob(net, link) <= 0.0:
            continue
        add(*key, (0, remaining_latency(net, key, snapshot.elapsed(key))))
    for e in snapshot.eps:
        if e.age < p.decoherence_tau and age_bin(e.age, width) < n_bins:
            add(e.node_a, e.node_b, (age_bin(e.age, width), 0.0))
    for q in snapshot.pending:
        b = age_bin(max(q.age_a, q.age_b) + q.remaining, width)
        if b < n_bins:
            add(q.node_a, q.node_b, (b, q.remaining))
    return {key: pareto(v) for key, v in raw.items()}


def fill_aged_table(net: QuantumNetwork, snapshot: StateSnapshot, h_max: int | None = None,
                    n_bins: int = N_BINS, chunk_elems: int = 2_000_000) -> AgedLatencyTable:
    """Height-bounded aged recurrence over all node pairs, pivots over all nodes."""
    p = net.params
    width = bin_width(p.decoherence_tau, n_bins)
    bt, bp = p.atomic_bsm_latency_bt, p.atomic_bsm_bp
    bt_bins = duration_bins(bt, width)
    n = len(net.node_ids)
    if h_max is None:
        h_max = default_h_max(n)
    lat, bins = _pack(network_base(net, snapshot, n_bins), n, n_bins)

    for _ in range(h_max):
        F = lat.shape[2]
        best = np.full((n, n, n_bins + 1), INF)
        # carry the previous level
        _scatter_min(best, np.broadcast_to(np.arange(n)[:, None, None], lat.shape),
                     np.broadcast_to(np.arange(n)[None, :, None], lat.shape), bins, lat, n_bins)
        right_all = lat.transpose(1, 0, 2)  # right_all[j, k, f] = lat[k, j, f]
        right_bins = bins.transpose(1, 0, 2)
        rows = max(1, chunk_elems // max(1, n * n * F * F))
        for i0 in range(0, n, rows):
            i1 = min(n, i0 + rows)
            L1 = lat[i0:i1, None, :, :, None]          # (i, 1, k, f1, 1)
            B1 = bins[i0:i1, None, :, :, None]
            L2 = right_all[None, :, :, None, :]        # (1, j, k, 1, f2)
            B2 = right_bins[None, :, :, None, :]
            M = np.maximum(L1, L2)
            ok = np.isfinite(M)
            Mf = np.where(ok, M, 0.0)
            w1 = _dbins(Mf - np.where(ok, L1, 0.0), width)
            w2 = _dbins(Mf - np.where(ok, L2, 0.0), width)
            rb = np.maximum(B1 + w1, B2 + w2) + bt_bins
            ok &= rb < n_bins
            cand = (1.5 * M + bt) / bp
            shape = cand.shape
            ii = np.broadcast_to(np.arange(i0, i1)[:, None, None, None, None], shape)
            jj = np.broadcast_to(np.arange(n)[None, :, None, None, None], shape)
            _scatter_min(best, ii[ok], jj[ok], rb[ok], cand[ok], n_bins)
        best[np.arange(n), np.arange(n), :] = INF
        lat, bins = _frontiers_from_bins(best[:, :, :n_bins], n_bins)
    return AgedLatencyTable(list(net.node_ids), lat, bins, n_bins)


def _dbins(x: np.ndarray, width: float) -> np.ndarray:
    return np.where(x > 0.0, np.ceil(x / width - 1e-9), 0.0).astype(np.int64).clip(min=0)


def _scatter_min(best: np.ndarray, ii, jj, bb, vals, n_bins: int) -> None:
    bb = np.minimum(np.asarray(bb), n_bins)
    np.minimum.at(best, (np.asarray(ii).ravel(), np.asarray(jj).ravel(), bb.ravel()), np.asarray(vals).ravel())


def _frontiers_from_bins(per_bin: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    cum = np.minimum.accumulate(per_bin, axis=2)
    prev = np.concatenate([np.full(cum.shape[:2] + (1,), INF), cum[:, :, :-1]], axis=2)
    mask = cum < prev
    counts = mask.sum(axis=2)
    width = max(1, int(counts.max()))
    order = np.argsort(~mask, axis=2, kind="stable")[:, :, :width]
    valid = np.arange(width)[None, None, :] < counts[:, :, None]
    lat = np.where(valid, np.take_along_axis(cum, order, axis=2), INF)
    bins = np.where(valid, order, n_bins)
    return lat, bins


def estimate_min_latency(net: QuantumNetwork, snapshot: StateSnapshot, s: int, d: int,
                         path: Sequence[int] | None = None, n_bins: int = N_BINS,
                         h_max: int | None = None) -> float:
    """Minimum expected latency to an (s, d) EP from ``snapshot``; inf when infeasible.

    With ``path`` the pivots are restricted to that path's interior nodes and
    tree height is unbounded; otherwise pivots range over the whole network
    with height bound ``h_max``.
    """
    if snapshot.has_pair(s, d):
        return 0.0
    if path is not None:
        if path[0] != s or path[-1] != d:
            raise ValueError("path must run from s to d")
        return estimate_on_path(net, snapshot, path, n_bins)
    table = fill_aged_table(net, snapshot, h_max, n_bins)
    return table.value(s, d)


# swap evaluation --------------------------------------------------------------


def _shared_node(e1: EpView, e2: EpView) -> int:
    shared = set(e1.nodes) & set(e2.nodes)
    if len(shared) != 1 or e1.node_a == e1.node_b or e2.node_a == e2.node_b:
        raise ValueError(f"EPs {e1.nodes} and {e2.nodes} do not share exactly one node")
    return shared.pop()


def _lineage(e: EpView, start: int) -> tuple[LinkKey, ...]:
    """Lineage links ordered walking away from ``start``."""
    return e.links if e.node_a == start else tuple(reversed(e.links))


def _without(snapshot: StateSnapshot, e1: EpView, e2: EpView) -> StateSnapshot:
    gone = [x for x in (e1, e2) if not x.virtual]
    eps = tuple(e for e in snapshot.eps if not any(e is g or e == g for g in gone))
    active = dict(snapshot.active)
    for x in (e1, e2):
        if x.virtual:
            for key in x.links:
                active.pop(key, None)
    return StateSnapshot(eps, active, snapshot.pending, snapshot.clock)


def post_swap_estimate(net: QuantumNetwork, snapshot: StateSnapshot, e1: EpView, e2: EpView,
                       s: int, d: int, path: Sequence[int] | None = None,
                       n_bins: int = N_BINS) -> float:
    """Expected latency to (s, d) if ``e1`` and ``e2`` are swapped.

    ``b_t + b_p * (estimate after success) + (1 - b_p) * (estimate after
    failure)``. When a member is virtual the merged span cannot exist yet; it
    enters the success branch as an in-flight entry whose latency is the
    recurrence's own value for that vertex, so waiting is priced in the same
    units as everything else the table sees.
    """
    p = net.params
    tau, bt, bp = p.decoherence_tau, p.atomic_bsm_latency_bt, p.atomic_bsm_bp
    mid = _shared_node(e1, e2)
    r1 = remaining_latency(net, e1.links[0], e1.elapsed) if e1.virtual else 0.0
    r2 = remaining_latency(net, e2.links[0], e2.elapsed) if e2.virtual else 0.0
    wait = max(r1, r2)
    for e in (e1, e2):
        if not e.virtual and e.age + wait + bt >= tau:
            return INF

    out1 = e1.node_b if e1.node_a == mid else e1.node_a
    out2 = e2.node_b if e2.node_a == mid else e2.node_a
    links = tuple(reversed(_lineage(e1, mid))) + _lineage(e2, mid)
    rest = _without(snapshot, e1, e2)
    is_target = {out1, out2} == {s, d}

    if not (e1.virtual or e2.virtual):
        if is_target:
            success = 0.0
        else:
            merged = EpView(out1, out2, e1.age_at(out1) + bt, e2.age_at(out2) + bt, links)
            ok = StateSnapshot(rest.eps + (merged,), rest.active, rest.pending, rest.clock)
            success = estimate_min_latency(net, ok, s, d, path=path, n_bins=n_bins)
    else:
        lat = (1.5 * wait + bt) / bp
        if is_target:
            success = lat
        else:
            age = max((e.age for e in (e1, e2) if not e.virtual), default=0.0)
            flight = PendingView(out1, out2, age, age, links, lat)
            ok = StateSnapshot(rest.eps, rest.active, rest.pending + (flight,), rest.clock)
            success = estimate_min_latency(net, ok, s, d, path=path, n_bins=n_bins)

    fail_active = dict(rest.active)
    for key in e1.links + e2.links:
        fail_active[key] = 0.0
    failed = StateSnapshot(rest.eps, fail_active, rest.pending, rest.clock)
    failure = estimate_min_latency(net, failed, s, d, path=path, n_bins=n_bins)
    return bt + bp * success + (1.0 - bp) * failure


def virtual_ep(key: LinkKey, elapsed: float) -> EpView:
    return EpView(key[0], key[1], 0.0, 0.0, (key,), elapsed=elapsed)
