"""Quantum network model: physical parameters, topology, Waxman generation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

LinkKey = tuple[int, int]


class InfeasibleError(ValueError):
    """Raised when a quantity cannot be achieved (zero success probability, unreachable pair)."""


def link_key(a: int, b: int) -> LinkKey:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class PhysicalParams:
    """Per-network physical parameters. Durations in seconds.

    ``attenuation_length`` switches on the distance model for the half-link
    transmission probability, ``exp(-length / (2 * attenuation_length))``.
    When it is None the constant ``half_link_transmit_ep`` is used.
    """

    gen_latency_gt: float = 100e-6
    gen_success_gp: float = 0.5
    half_link_transmit_ep: float = 1.0
    optical_bsm_php: float = 0.5
    atomic_bsm_latency_bt: float = 10e-6
    atomic_bsm_bp: float = 0.5
    decoherence_tau: float = 1.5
    attenuation_length: float | None = None

    def validate(self, allow_zero: bool = False) -> None:
        probs = {
            "gen_success_gp": self.gen_success_gp,
            "half_link_transmit_ep": self.half_link_transmit_ep,
            "optical_bsm_php": self.optical_bsm_php,
            "atomic_bsm_bp": self.atomic_bsm_bp,
        }
        lo_ok = (lambda p: p >= 0.0) if allow_zero else (lambda p: p > 0.0)
        for name, p in probs.items():
            if not (lo_ok(p) and p <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {p}")
        for name in ("gen_latency_gt", "atomic_bsm_latency_bt", "decoherence_tau"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.attenuation_length is not None and not self.attenuation_length > 0.0:
            raise ValueError("attenuation_length must be positive when set")


@dataclass(frozen=True)
class NetNode:
    id: int
    x: float
    y: float
    memory_capacity: int | None = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class NetLink:
    endpoint_a: int
    endpoint_b: int
    length: float

    @property
    def key(self) -> LinkKey:
        return link_key(self.endpoint_a, self.endpoint_b)


@dataclass
class QuantumNetwork:
    nodes: list[NetNode]
    links: list[NetLink]
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        seen: set[LinkKey] = set()
        for link in self.links:
            if link.endpoint_a == link.endpoint_b:
                raise ValueError(f"self-loop at node {link.endpoint_a}")
            if link.endpoint_a not in known or link.endpoint_b not in known:
                raise ValueError(f"link {link.key} references unknown node")
            if link.key in seen:
                raise ValueError(f"parallel link {link.key}")
            seen.add(link.key)
        for node in self.nodes:
            if node.memory_capacity is not None and node.memory_capacity < 2:
                raise ValueError("memory_capacity must be >= 2 when set")

    @cached_property
    def node_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes)

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {nid: i for i, nid in enumerate(self.node_ids)}

    @cached_property
    def link_map(self) -> dict[LinkKey, NetLink]:
        return {link.key: link for link in self.links}

    @cached_property
    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {nid: [] for nid in self.node_ids}
        for a, b in self.link_map:
            adj[a].append(b)
            adj[b].append(a)
        for nbrs in adj.values():
            nbrs.sort()
        return adj

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.node_ids)
        for link in self.links:
            g.add_edge(link.endpoint_a, link.endpoint_b, length=link.length)
        return g

    def node(self, nid: int) -> NetNode:
        return self.nodes[self._pos_by_id[nid]]

    @cached_property
    def _pos_by_id(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def link(self, a: int, b: int) -> NetLink:
        try:
            return self.link_map[link_key(a, b)]
        except KeyError:
            raise KeyError(f"no link between {a} and {b}") from None

    def has_link(self, a: int, b: int) -> bool:
        return link_key(a, b) in self.link_map

    def distance(self, a: int, b: int) -> float:
        na, nb = self.node(a), self.node(b)
        return math.hypot(na.x - nb.x, na.y - nb.y)

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        return nx.is_connected(self.graph())

    def with_params(self, **changes) -> "QuantumNetwork":
        return QuantumNetwork(list(self.nodes), list(self.links), replace(self.params, **changes))

    def subnetwork(self, keep_links) -> "QuantumNetwork":
        """Same nodes and params, only the links whose keys are in ``keep_links``."""
        keep = set(keep_links)
        return QuantumNetwork(list(self.nodes), [l for l in self.links if l.key in keep], self.params)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "nodes": [
                {"id": n.id, "x": n.x, "y": n.y, "memory_capacity": n.memory_capacity}
                for n in self.nodes
            ],
            "links": [{"a": l.endpoint_a, "b": l.endpoint_b, "length": l.length} for l in self.links],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantumNetwork":
        names = {f.name for f in fields(PhysicalParams)}
        params = PhysicalParams(**{k: v for k, v in doc.get("params", {}).items() if k in names})
        nodes = [
            NetNode(int(n["id"]), float(n["x"]), float(n["y"]), n.get("memory_capacity"))
            for n in doc["nodes"]
        ]
        pos = {n.id: n for n in nodes}
        links = []
        for l in doc["links"]:
            a, b = int(l["a"]), int(l["b"])
            length = l.get("length")
            if length is None:
                length = math.hypot(pos[a].x - pos[b].x, pos[a].y - pos[b].y)
            links.append(NetLink(a, b, float(length)))
        return cls(nodes, links, params)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "QuantumNetwork":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "QuantumNetwork":
        return cls.loads(Path(path).read_text())


def half_link_transmit(params: PhysicalParams, length: float) -> float:
    if params.attenuation_length is None:
        return params.half_link_transmit_ep
    return math.exp(-length / (2.0 * params.attenuation_length))


def link_success_prob(net: QuantumNetwork, link: NetLink) -> float:
    """Per-attempt success probability of a link-EP: g_p^2 * e_p^2 * p_hp."""
    p = net.params
    ep = half_link_transmit(p, link.length)
    return p.gen_success_gp**2 * ep**2 * p.optical_bsm_php


def link_expected_latency(net: QuantumNetwork, link: NetLink) -> float:
    prob = link_success_prob(net, link)
    if prob <= 0.0:
        raise InfeasibleError(f"link {link.key} can never succeed")
    return net.params.gen_latency_gt / prob


def line_network(n: int, spacing: float = 10.0, params: PhysicalParams | None = None) -> QuantumNetwork:
    """Nodes 0..n-1 on a horizontal line, consecutive nodes linked."""
    nodes = [NetNode(i, i * spacing, 0.0) for i in range(n)]
    links = [NetLink(i, i + 1, spacing) for i in range(n - 1)]
    return QuantumNetwork(nodes, links, params or PhysicalParams())


# Waxman --------------------------------------------------------------------

WAXMAN_ALPHA = 0.15
WAXMAN_BETA = 0.6


def waxman_link_mask(positions: np.ndarray, alpha: float, beta: float, diag: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Boolean upper-triangular mask of sampled links, one uniform draw per pair (i < j)."""
    n = len(positions)
    iu, ju = np.triu_indices(n, k=1)
    d = np.hypot(*(positions[iu] - positions[ju]).T)
    prob = beta * np.exp(-d / (alpha * diag))
    draws = rng.random(len(iu))
    mask = np.zeros((n, n), dtype=bool)
    mask[iu, ju] = draws < prob
    return mask


def _components(n: int, edges: set[LinkKey]) -> list[int]:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    label = [0] * n
    for c, comp in enumerate(sorted(nx.connected_components(g), key=min)):
        for v in comp:
            label[v] = c
    return label


def waxman_generate(n: int, area: tuple[float, float] = (100.0, 100.0), alpha: float = WAXMAN_ALPHA,
                    beta: float = WAXMAN_BETA, seed: int = 0,
                    params: PhysicalParams | None = None) -> QuantumNetwork:
    """Random Waxman topology over a rectangle (km), repaired to be connected.

    Repair adds the shortest edge between two different components until one
    component remains; ties go to the lexicographically smaller node pair.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    width, height = area
    if not (width > 0 and height > 0):
        raise ValueError("area dimensions must be positive")
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ValueError("alpha and beta must be in (0, 1]")

    rng = np.random.default_rng(seed)
    positions = rng.random((n, 2)) * np.array([width, height])
    diag = math.hypot(width, height)
    mask = waxman_link_mask(positions, alpha, beta, diag, rng)
    edges = {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}

    dist = np.hypot(positions[:, None, 0] - positions[None, :, 0],
                    positions[:, None, 1] - positions[None, :, 1])
    label = _components(n, edges)
    while len(set(label)) > 1:
        lab = np.array(label)
        cross = lab[:, None] != lab[None, :]
        cand = np.where(cross, dist, np.inf)
        flat = int(np.argmin(cand))  # row-major: ties resolve to smaller (i, j)
        i, j = divmod(flat, n)
        edges.add(link_key(i, j))
        label = _components(n, edges)

    nodes = [NetNode(i, float(positions[i, 0]), float(positions[i, 1])) for i in range(n)]
    links = [NetLink(i, j, float(dist[i, j])) for i, j in sorted(edges)]
    return QuantumNetwork(nodes, links, params or PhysicalParams())
