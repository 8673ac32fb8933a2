"""Trigger-time decision logic: Greedy-SP, Greedy-MP, static trees, Swap-ASAP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .ages import N_BINS, EpView, StateSnapshot, post_swap_estimate, virtual_ep
from .network import LinkKey, QuantumNetwork, link_key
from .swapdp import SwapTree, dp_optimal, dp_optimal_on_path, extract_path

INF = math.inf
KINDS = ("greedy-sp", "greedy-mp", "static-tree", "static-multi-tree", "swap-asap")


@dataclass(frozen=True)
class Decision:
    """``swap`` holds two EP ids, or None for wait. ``estimate`` is L for the chosen pair."""

    swap: tuple[int, int] | None = None
    estimate: float = INF

    @property
    def is_wait(self) -> bool:
        return self.swap is None


WAIT = Decision()


@dataclass(frozen=True)
class Segment:
    lo: int
    hi: int
    ep: EpView | None  # None: blocked (in-flight swap or EP not lying on this path)


def path_links(path: Sequence[int]) -> list[LinkKey]:
    return [link_key(a, b) for a, b in zip(path, path[1:])]


def path_segments(snapshot: StateSnapshot, path: Sequence[int]) -> list[Segment]:
    """Split the path's links into live EPs, virtual EPs of active links, and blocked runs."""
    plinks = path_links(path)
    pos = {key: x for x, key in enumerate(plinks)}
    owner: list[Segment | None] = [None] * len(plinks)
    for e in snapshot.eps:
        idx = sorted(pos[k] for k in e.links if k in pos)
        contiguous = (len(idx) == len(e.links) and idx and idx[-1] - idx[0] == len(idx) - 1
                      and {e.node_a, e.node_b} == {path[idx[0]], path[idx[-1] + 1]})
        seg = Segment(idx[0], idx[-1] + 1, e) if contiguous else None
        for x in idx:
            owner[x] = seg if seg is not None else Segment(x, x + 1, None)
    covered = snapshot.covered()
    for x, key in enumerate(plinks):
        if owner[x] is None:
            if key in covered:
                owner[x] = Segment(x, x + 1, None)
            else:
                a, b = path[x], path[x + 1]
                v = virtual_ep(key, snapshot.elapsed(key))
                if v.node_a != a:
                    v = EpView(a, b, 0.0, 0.0, (key,), elapsed=v.elapsed)
                owner[x] = Segment(x, x + 1, v)
    out: list[Segment] = []
    for seg in owner:
        if not out or out[-1] is not seg:
            out.append(seg)
    return out


def adjacent_pairs(segments: list[Segment]) -> list[tuple[Segment, Segment]]:
    return [(a, b) for a, b in zip(segments, segments[1:]) if a.ep is not None and b.ep is not None]


def swap_or_wait(net: QuantumNetwork, snapshot: StateSnapshot, path: Sequence[int], s: int, d: int,
                 n_bins: int = N_BINS, evaluated: list | None = None) -> Decision:
    """Pick the adjacent pair with the lowest post-swap estimate; wait unless both are live EPs.

    When no pair of live EPs is adjacent the answer is wait whatever the
    estimates, so they are not computed. If all estimates are infinite the
    leftmost live pair is swapped.
    """
    if len(snapshot.eps) < 2:
        return WAIT
    pairs = adjacent_pairs(path_segments(snapshot, path))
    if not any(not a.ep.virtual and not b.ep.virtual for a, b in pairs):
        return WAIT
    best = None
    for a, b in pairs:
        L = post_swap_estimate(net, snapshot, a.ep, b.ep, s, d, path=path, n_bins=n_bins)
        if evaluated is not None:
            evaluated.append((a.lo, b.hi, L))
        key = (L, a.lo)
        if best is None or key < best[0]:
            best = (key, a, b)
    (L, _), a, b = best
    if L == INF:
        # every candidate is infeasible, so the estimates rank nothing: take the leftmost live pair
        a, b = next((a, b) for a, b in pairs if not a.ep.virtual and not b.ep.virtual)
    if a.ep.virtual or b.ep.virtual:
        return WAIT
    return Decision((a.ep.ep_id, b.ep.ep_id), L)


def greedy_mp_on_trigger(net: QuantumNetwork, snapshot: StateSnapshot, paths: Sequence[Sequence[int]],
                         s: int, d: int, n_bins: int = N_BINS,
                         evaluated: list | None = None) -> list[Decision]:
    per_path = []
    for idx, path in enumerate(paths):
        dec = swap_or_wait(net, snapshot, path, s, d, n_bins, evaluated)
        per_path.append((dec.estimate if dec.swap else INF, idx, dec))
    out: list[Decision] = []
    consumed: set[int] = set()
    for _, _, dec in sorted(per_path, key=lambda t: (t[0], t[1])):
        if dec.swap is None or consumed.intersection(dec.swap):
            continue
        consumed.update(dec.swap)
        out.append(dec)
    return out


@dataclass(frozen=True)
class _Vertex:
    depth: int
    lo: int
    left: frozenset
    right: frozenset


def _tree_vertices(tree: SwapTree) -> list[_Vertex]:
    out = []

    def walk(t: SwapTree, depth: int, lo: int) -> int:
        if t.left is None:
            return lo + 1
        mid = walk(t.left, depth + 1, lo)
        hi = walk(t.right, depth + 1, mid)
        out.append(_Vertex(depth, lo, frozenset(link_key(*l) for l in t.left.links()),
                           frozenset(link_key(*l) for l in t.right.links())))
        return hi

    walk(tree, 0, 0)
    out.sort(key=lambda v: (-v.depth, v.lo))
    return out


def _static_decision(snapshot: StateSnapshot, vertices: list[_Vertex], consumed=()) -> Decision:
    by_lineage = {frozenset(e.links): e.ep_id for e in snapshot.eps if e.ep_id not in consumed}
    for v in vertices:
        a, b = by_lineage.get(v.left), by_lineage.get(v.right)
        if a is not None and b is not None:
            return Decision((a, b))
    return WAIT


def static_tree_on_trigger(snapshot: StateSnapshot, tree: SwapTree) -> Decision:
    """Swap the children of the deepest, then leftmost, vertex whose two child EPs are live."""
    return _static_decision(snapshot, _tree_vertices(tree))


def swap_asap_on_trigger(snapshot: StateSnapshot, path: Sequence[int]) -> Decision:
    if len(snapshot.eps) < 2:
        return WAIT
    for a, b in adjacent_pairs(path_segments(snapshot, path)):
        if not a.ep.virtual and not b.ep.virtual:
            return Decision((a.ep.ep_id, b.ep.ep_id))
    return WAIT


def select_multipaths(net: QuantumNetwork, s: int, d: int, k: int = 3) -> list[list[int]]:
    """Up to k routing paths from repeated DP runs on a shrinking network.

    After each path is recorded its interior links (those touching neither s
    nor d) are removed; a path with no interior link has all its links
    removed. Stops early on disconnection or when a path repeats.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    work = net
    paths: list[list[int]] = []
    while len(paths) < k:
        try:
            tree, _ = dp_optimal(work, s, d)
        except ValueError:
            break
        path = extract_path(tree)
        if path in paths:
            break
        paths.append(path)
        plinks = path_links(path)
        interior = [key for key in plinks if s not in key and d not in key]
        drop = set(interior or plinks)
        work = work.subnetwork(key for key in work.link_map if key not in drop)
    return paths


# policy objects used by the simulator -----------------------------------------


@dataclass
class PolicyConfig:
    kind: str = "greedy-sp"
    k: int = 3
    path: list[int] | None = None
    n_bins: int = N_BINS

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {KINDS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "k": self.k, "n_bins": self.n_bins}
        if self.path is not None:
            out["path"] = list(self.path)
        return out

    @classmethod
    def from_dict(cls, doc: dict | str) -> "PolicyConfig":
        if isinstance(doc, str):
            return cls(kind=doc)
        return cls(doc["kind"], int(doc.get("k", 3)), doc.get("path"), int(doc.get("n_bins", N_BINS)))


@dataclass
class Policy:
    """A prepared policy: routing paths (and trees) fixed for one (net, s, d)."""

    config: PolicyConfig
    s: int
    d: int
    paths: list[list[int]]
    trees: list[SwapTree] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._vertices = [_tree_vertices(t) for t in self.trees]

    @property
    def kind(self) -> str:
        return self.config.kind

    def links(self) -> list[LinkKey]:
        seen: dict[LinkKey, None] = {}
        for path in self.paths:
            for key in path_links(path):
                seen.setdefault(key, None)
        return list(seen)

    def decide(self, net: QuantumNetwork, snapshot: StateSnapshot,
               evaluated: list | None = None) -> list[Decision]:
        kind = self.config.kind
        if kind == "greedy-sp":
            dec = swap_or_wait(net, snapshot, self.paths[0], self.s, self.d, self.config.n_bins, evaluated)
            return [] if dec.is_wait else [dec]
        if kind == "greedy-mp":
            return greedy_mp_on_trigger(net, snapshot, self.paths, self.s, self.d, self.config.n_bins,
                                        evaluated)
        if kind == "swap-asap":
            dec = swap_asap_on_trigger(snapshot, self.paths[0])
            return [] if dec.is_wait else [dec]
        # static trees, one decision per tree, no EP used twice
        out: list[Decision] = []
        consumed: set[int] = set()
        for verts in self._vertices:
            dec = _static_decision(snapshot, verts, consumed)
            if dec.swap is not None:
                consumed.update(dec.swap)
                out.append(dec)
        return out


def build_policy(net: QuantumNetwork, config: PolicyConfig, s: int, d: int) -> Policy:
    kind = config.kind
    if config.path is not None:
        path = list(config.path)
        if path[0] != s or path[-1] != d:
            raise ValueError("explicit path must run from s to d")
        for a, b in zip(path, path[1:]):
            if not net.has_link(a, b):
                raise ValueError(f"explicit path uses missing link ({a}, {b})")
        if len(set(path)) != len(path):
            raise ValueError("explicit path must be simple")
        tree = dp_optimal_on_path(net, path)[0]
    else:
        tree = None
    if kind in ("greedy-sp", "swap-asap", "static-tree"):
        if tree is None:
            tree = dp_optimal(net, s, d)[0]
        path = extract_path(tree)
        return Policy(config, s, d, [path], [tree] if kind == "static-tree" else [])
    paths = [list(config.path)] if config.path is not None else select_multipaths(net, s, d, config.k)
    trees = [dp_optimal_on_path(net, p)[0] for p in paths] if kind == "static-multi-tree" else []
    return Policy(config, s, d, paths, trees)
