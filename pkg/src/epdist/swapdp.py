"""Swapping trees, their expected latency, and the static optimal DP.

A swapping tree is a binary tree over the ordered links of a path. Leaves are
link-EPs; an internal vertex over (i, j) swaps the EPs of its children (i, k)
and (k, j) at pivot k. Latency composes bottom-up as
``(1.5 * max(left, right) + b_t) / b_p``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .network import InfeasibleError, QuantumNetwork, link_expected_latency, link_success_prob

INF = math.inf
MAX_ORACLE_LINKS = 8


@dataclass(frozen=True)
class SwapTree:
    i: int
    j: int
    left: "SwapTree | None" = None
    right: "SwapTree | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def pivot(self) -> int | None:
        return None if self.left is None else self.left.j

    def leaves(self) -> list["SwapTree"]:
        if self.left is None:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def links(self) -> list[tuple[int, int]]:
        return [(leaf.i, leaf.j) for leaf in self.leaves()]

    def height(self) -> int:
        if self.left is None:
            return 0
        return 1 + max(self.left.height(), self.right.height())

    def internal_vertices(self) -> Iterator["SwapTree"]:
        """Internal vertices in post-order."""
        if self.left is not None:
            yield from self.left.internal_vertices()
            yield from self.right.internal_vertices()
            yield self

    def mirror(self) -> "SwapTree":
        if self.left is None:
            return SwapTree(self.j, self.i)
        return SwapTree(self.j, self.i, self.right.mirror(), self.left.mirror())

    def validate(self, net: QuantumNetwork | None = None) -> None:
        """Raise ValueError unless the tree is well formed over a simple path."""
        if (self.left is None) != (self.right is None):
            raise ValueError("internal vertex must have two children")
        if self.left is None:
            if self.i == self.j:
                raise ValueError("leaf over a single node")
            if net is not None and not net.has_link(self.i, self.j):
                raise ValueError(f"leaf ({self.i}, {self.j}) is not a network link")
            return
        if self.left.i != self.i or self.right.j != self.j or self.left.j != self.right.i:
            raise ValueError(f"children of ({self.i}, {self.j}) do not meet at a pivot")
        self.left.validate(net)
        self.right.validate(net)
        path = extract_path(self)
        if len(set(path)) != len(path):
            raise ValueError(f"leaves do not form a simple path: {path}")

    def to_text(self) -> str:
        if self.left is None:
            return f"({self.i} {self.j})"
        return f"({self.left.to_text()}{self.right.to_text()})"

    def __str__(self) -> str:
        return self.to_text()


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_tree(text: str) -> SwapTree:
    """Inverse of :meth:`SwapTree.to_text`."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def atom(tok: str):
        return int(tok) if re.fullmatch(r"-?\d+", tok) else tok

    def parse() -> SwapTree:
        nonlocal pos
        if tokens[pos] != "(":
            raise ValueError(f"expected '(' at token {pos}")
        pos += 1
        if tokens[pos] not in "()":
            a, b = atom(tokens[pos]), atom(tokens[pos + 1])
            if tokens[pos + 2] != ")":
                raise ValueError("leaf must hold exactly two endpoints")
            pos += 3
            return SwapTree(a, b)
        left = parse()
        right = parse()
        if tokens[pos] != ")":
            raise ValueError("internal vertex must hold exactly two subtrees")
        pos += 1
        return SwapTree(left.i, right.j, left, right)

    try:
        tree = parse()
    except IndexError:
        raise ValueError("truncated tree text") from None
    if pos != len(tokens):
        raise ValueError("trailing tokens after tree")
    return tree


def combine(left: float, right: float, bt: float, bp: float) -> float:
    return (1.5 * max(left, right) + bt) / bp


def tree_expected_latency(tree: SwapTree, net: QuantumNetwork) -> float:
    tree.validate(net)
    p = net.params
    bt, bp = p.atomic_bsm_latency_bt, p.atomic_bsm_bp

    def ev(t: SwapTree) -> float:
        if t.left is None:
            return link_expected_latency(net, net.link(t.i, t.j))
        return combine(ev(t.left), ev(t.right), bt, bp)

    return ev(tree)


def extract_path(tree: SwapTree) -> list[int]:
    leaves = tree.leaves()
    return [leaves[0].i] + [leaf.j for leaf in leaves]


def tree_for_path(path: Sequence[int], pivots: dict[tuple[int, int], int]) -> SwapTree:
    """Build the tree over ``path`` from a map of (i, j) position pairs to pivot positions."""

    def build(a: int, b: int) -> SwapTree:
        if b == a + 1:
            return SwapTree(path[a], path[b])
        k = pivots[(a, b)]
        return SwapTree(path[a], path[b], build(a, k), build(k, b))

    return build(0, len(path) - 1)


# static DP over the whole network ----------------------------------------------


@dataclass
class LatencyTable:
    """T[h, i, j] over node indices plus the pivot chosen when level h improved."""

    node_ids: list[int]
    T: np.ndarray
    pivot: np.ndarray

    @property
    def h_max(self) -> int:
        return self.T.shape[0] - 1

    def value(self, i: int, j: int, h: int | None = None) -> float:
        idx = {nid: x for x, nid in enumerate(self.node_ids)}
        return float(self.T[self.h_max if h is None else h, idx[i], idx[j]])

    def tree(self, s: int, d: int, h: int | None = None, bt: float = 0.0, bp: float = 1.0) -> SwapTree:
        """A simple-path tree of height <= h whose latency matches T[h, s, d].

        Pivot choice follows the recorded table where it yields a simple path.
        Tied alternatives are searched (leaf first, then ascending pivot id)
        when the recorded choice would revisit a node; a simple optimum always
        exists because cutting a cycle out of a walk never raises latency.
        """
        idx = {nid: x for x, nid in enumerate(self.node_ids)}
        ids = self.node_ids
        T = self.T
        h = self.h_max if h is None else h
        slack = 1.0 + 1e-12

        def search(i: int, j: int, h: int, bound: float, banned: frozenset):
            # recorded choice first, then every admissible alternative
            seen = set()
            hh = h
            while hh > 0 and self.pivot[hh, i, j] < 0:
                hh -= 1
            order = []
            if hh == 0:
                order.append(("leaf", None, 0))
            else:
                order.append(("pivot", int(self.pivot[hh, i, j]), hh))
            order.append(("leaf", None, 0))
            if h > 0:
                x = (bound * bp - bt) / 1.5
                prev = T[h - 1]
                ks = np.nonzero((prev[i, :] <= x * slack) & (prev[:, j] <= x * slack))[0]
                order.extend(("pivot", int(k), h) for k in ks)
            for kind, k, hk in order:
                if (kind, k, hk) in seen:
                    continue
                seen.add((kind, k, hk))
                if kind == "leaf":
                    if T[0, i, j] <= bound * slack:
                        yield SwapTree(ids[i], ids[j]), frozenset((i, j))
                    continue
                if k in banned or k == i or k == j:
                    continue
                x = (bound * bp - bt) / 1.5
                for left, ln in search(i, k, hk - 1, x, banned | {j}):
                    for right, rn in search(k, j, hk - 1, x, banned | (ln - {k})):
                        yield SwapTree(ids[i], ids[j], left, right), ln | rn
                        break
                    else:
                        continue
                    break

        i, j = idx[s], idx[d]
        bound = float(T[h, i, j])
        for tree, _ in search(i, j, h, bound, frozenset()):
            return tree
        raise InfeasibleError(f"no simple tree between {s} and {d} at height {h}")


def default_h_max(n: int) -> int:
    return math.ceil(math.log2(max(n, 1))) + 1


def hop_distance(net: QuantumNetwork, s: int, d: int) -> int | None:
    seen = {s: 0}
    frontier = [s]
    while frontier:
        nxt = []
        for u in frontier:
            for v in net.adjacency[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    nxt.append(v)
        frontier = nxt
    return seen.get(d)


def base_latency_matrix(net: QuantumNetwork) -> np.ndarray:
    n = len(net.node_ids)
    T0 = np.full((n, n), INF)
    idx = net.node_index
    for link in net.links:
        lat = link_expected_latency(net, link) if link_success_prob(net, link) > 0.0 else INF
        a, b = idx[link.endpoint_a], idx[link.endpoint_b]
        T0[a, b] = T0[b, a] = lat
    return T0


def fill_table(net: QuantumNetwork, h_max: int) -> LatencyTable:
    """Run the height-bounded recurrence for every node pair.

    Pivots range over all nodes; ties keep the lower height, then the lowest
    pivot id (node indices follow ascending id, argmin takes the first).
    """
    p = net.params
    bt, bp = p.atomic_bsm_latency_bt, p.atomic_bsm_bp
    n = len(net.node_ids)
    T = np.full((h_max + 1, n, n), INF)
    piv = np.full((h_max + 1, n, n), -1, dtype=np.int64)
    T[0] = base_latency_matrix(net)
    for h in range(1, h_max + 1):
        prev = T[h - 1]
        # M[i, j, k] = max(prev[i, k], prev[k, j]); diagonal is inf so k in {i, j} never wins
        M = np.maximum(prev[:, None, :], prev.T[None, :, :])
        k_best = np.argmin(M, axis=2)
        B = np.take_along_axis(M, k_best[:, :, None], axis=2)[:, :, 0]
        cand = (1.5 * B + bt) / bp
        better = cand < prev
        T[h] = np.where(better, cand, prev)
        piv[h] = np.where(better, k_best, -1)
    return LatencyTable(list(net.node_ids), T, piv)


def dp_optimal(net: QuantumNetwork, s: int, d: int, h_max: int | None = None,
               table: LatencyTable | None = None) -> tuple[SwapTree, float]:
    """Minimum expected-latency swapping tree for (s, d) over the whole network."""
    if s == d:
        raise ValueError("source and destination must differ")
    hops = hop_distance(net, s, d)
    if hops is None:
        raise InfeasibleError(f"{d} is unreachable from {s}")
    if h_max is None:
        h_max = default_h_max(len(net.nodes))
    if h_max < math.ceil(math.log2(hops)):
        raise ValueError(f"h_max={h_max} below the minimum feasible height for {hops} hops")
    if table is None or table.h_max != h_max:
        table = fill_table(net, h_max)
    value = table.value(s, d)
    if value == INF:
        raise InfeasibleError(f"no feasible tree between {s} and {d}")
    tree = table.tree(s, d, bt=net.params.atomic_bsm_latency_bt, bp=net.params.atomic_bsm_bp)
    tree.validate(net)
    return tree, value


# static DP restricted to one path --------------------------------------------


def path_leaf_latencies(net: QuantumNetwork, path: Sequence[int]) -> list[float]:
    return [link_expected_latency(net, net.link(a, b)) for a, b in zip(path, path[1:])]


def dp_optimal_on_path(net: QuantumNetwork, path: Sequence[int]) -> tuple[SwapTree, float]:
    """Optimal tree over a fixed path, pivots restricted to interior path nodes.

    No height bound: every binary tree over the path is admissible, so the
    result equals exhaustive enumeration. Ties go to the lowest pivot node id.
    """
    path = list(path)
    m = len(path) - 1
    if m < 1:
        raise ValueError("path needs at least one link")
    if len(set(path)) != len(path):
        raise ValueError("path must be simple")
    p = net.params
    bt, bp = p.atomic_bsm_latency_bt, p.atomic_bsm_bp
    leaf = path_leaf_latencies(net, path)
    T: dict[tuple[int, int], float] = {(a, a + 1): leaf[a] for a in range(m)}
    piv: dict[tuple[int, int], int] = {}
    for span in range(2, m + 1):
        for a in range(0, m - span + 1):
            b = a + span
            best, best_k = INF, -1
            for k in sorted(range(a + 1, b), key=lambda x: path[x]):
                v = combine(T[(a, k)], T[(k, b)], bt, bp)
                if v < best:
                    best, best_k = v, k
            T[(a, b)] = best
            piv[(a, b)] = best_k
    return tree_for_path(path, piv), T[(0, m)]


def enumerate_trees(path: Sequence[int]) -> Iterator[SwapTree]:
    """Every binary tree over the links of ``path`` (Catalan many)."""
    path = list(path)

    def rec(a: int, b: int) -> Iterator[SwapTree]:
        if b == a + 1:
            yield SwapTree(path[a], path[b])
            return
        for k in range(a + 1, b):
            for left in list(rec(a, k)):
                for right in rec(k, b):
                    yield SwapTree(path[a], path[b], left, right)

    yield from rec(0, len(path) - 1)


def _pivot_key(tree: SwapTree) -> tuple[int, ...]:
    return tuple(v.pivot for v in _preorder(tree))


def _preorder(tree: SwapTree) -> Iterator[SwapTree]:
    if tree.left is not None:
        yield tree
        yield from _preorder(tree.left)
        yield from _preorder(tree.right)


def brute_force_tree_oracle(net: QuantumNetwork, path: Sequence[int]) -> tuple[SwapTree, float]:
    """Exhaustive minimum over all trees on ``path``; ties by pre-order pivot ids."""
    path = list(path)
    if len(path) - 1 > MAX_ORACLE_LINKS:
        raise ValueError(f"path too long for enumeration (> {MAX_ORACLE_LINKS} links)")
    if len(path) < 2:
        raise ValueError("path needs at least one link")
    best = None
    for tree in enumerate_trees(path):
        key = (tree_expected_latency(tree, net), _pivot_key(tree))
        if best is None or key < best[0]:
            best = (key, tree)
    (value, _), tree = best
    return tree, value
