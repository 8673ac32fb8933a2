"""Continuous-time discrete-event simulation of EP distribution under a policy."""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .ages import EpView, PendingView, StateSnapshot
from .network import LinkKey, QuantumNetwork, link_success_prob
from .policies import Policy, PolicyConfig, build_policy

SUFFICIENT_TIME = 50e-6

# tie order at equal times
LINK, SWAP, DECOHERE, TIMEOUT = 0, 1, 2, 3


@dataclass
class Ep:
    id: int
    node_a: int
    node_b: int
    birth_a: float
    birth_b: float
    links: tuple[LinkKey, ...]  # ordered walking from node_a to node_b
    locked: bool = False

    def birth_at(self, node: int) -> float:
        return self.birth_a if node == self.node_a else self.birth_b

    @property
    def oldest_birth(self) -> float:
        return min(self.birth_a, self.birth_b)

    def lineage_from(self, node: int) -> tuple[LinkKey, ...]:
        return self.links if node == self.node_a else tuple(reversed(self.links))

    def label(self) -> str:
        return f"e{self.id}({self.node_a}-{self.node_b})"


@dataclass(frozen=True)
class TraceRecord:
    time: float
    kind: str
    participants: str
    decision: str = "wait"
    estimates: str = ""

    FIELDS = ("time", "kind", "participants", "decision", "estimates")

    def line(self) -> str:
        return "\t".join((f"{self.time:.9e}", self.kind, self.participants, self.decision, self.estimates))

    @classmethod
    def parse(cls, line: str) -> "TraceRecord":
        t, kind, who, dec, est = line.rstrip("\n").split("\t")
        return cls(float(t), kind, who, dec, est)


@dataclass
class EpisodeResult:
    delivered: bool
    latency: float  # delivery time; nan when censored
    trace: list[TraceRecord]
    seed: int
    violations: list[str] = field(default_factory=list)
    swaps_started: int = 0
    swaps_succeeded: int = 0

    def trace_text(self) -> str:
        return "".join(r.line() + "\n" for r in self.trace)

    def digest(self) -> str:
        return hashlib.sha256(self.trace_text().encode()).hexdigest()


@dataclass
class _Link:
    key: LinkKey
    index: int
    prob: float
    rng: np.random.Generator
    active: bool = False
    since: float = 0.0
    token: int = 0
    deferred: bool = False


@dataclass
class _Swap:
    id: int
    e1: int
    e2: int
    mid: int
    end: float


class Simulation:
    """One episode. Build, then call :meth:`run` once.

    RNG streams are split from ``seed``: swap outcomes use spawn key (0,),
    the link at position i of ``net.links`` uses (1, i).
    """

    def __init__(self, net: QuantumNetwork, policy: Policy, s: int, d: int, seed: int,
                 max_time: float | None = None, sufficient_time: float = SUFFICIENT_TIME,
                 record_estimates: bool = False, check_invariants: bool = True,
                 node_link_cap: int | None = None):
        if max_time is None:
            max_time = 100.0 * net.params.decoherence_tau
        if not max_time > 0:
            raise ValueError("max_time must be positive")
        self.net, self.policy, self.s, self.d = net, policy, s, d
        self.seed, self.max_time, self.sufficient_time = seed, max_time, sufficient_time
        self.record_estimates, self.check = record_estimates, check_invariants
        self.node_link_cap = node_link_cap
        p = net.params
        self.tau, self.gt, self.bt, self.bp = (p.decoherence_tau, p.gen_latency_gt,
                                               p.atomic_bsm_latency_bt, p.atomic_bsm_bp)
        self.swap_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))
        index = {link.key: i for i, link in enumerate(net.links)}
        self.links: dict[LinkKey, _Link] = {}
        for key in policy.links():
            if key not in net.link_map:
                raise ValueError(f"policy uses link {key} missing from the network")
            i = index[key]
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1, i))))
            self.links[key] = _Link(key, i, link_success_prob(net, net.link_map[key]), rng)
        self.incident: dict[int, int] = {}
        for a, b in self.links:
            self.incident[a] = self.incident.get(a, 0) + 1
            self.incident[b] = self.incident.get(b, 0) + 1

        self.now = 0.0
        self.eps: dict[int, Ep] = {}
        self.swaps: dict[int, _Swap] = {}
        self.swap_of: dict[int, int] = {}
        self.heap: list = []
        self.seq = 0
        self.next_ep = 0
        self.next_swap = 0
        self.timeout_token = 0
        self.trace: list[TraceRecord] = []
        self.violations: list[str] = []
        self.delivered: Ep | None = None
        self.swaps_started = 0
        self.swaps_succeeded = 0
        self._deferred: list[LinkKey] = []

    # scheduling ------------------------------------------------------------

    def _push(self, time: float, kind: int, entity: int, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, kind, entity, self.seq, payload))

    def _active_at(self, node: int) -> int:
        return sum(1 for l in self.links.values() if l.active and node in l.key)

    def _activate(self, key: LinkKey) -> None:
        link = self.links[key]
        cap = self.node_link_cap
        if cap is not None and (self._active_at(key[0]) >= cap or self._active_at(key[1]) >= cap):
            link.deferred = True
            self._deferred.append(key)
            return
        link.active, link.deferred, link.since = True, False, self.now
        link.token += 1
        if link.prob > 0.0:
            attempts = int(link.rng.geometric(link.prob))
            self._push(self.now + attempts * self.gt, LINK, link.index, (key, link.token))

    def _deactivate(self, key: LinkKey) -> None:
        self.links[key].active = False
        if self._deferred:
            waiting, self._deferred = self._deferred, []
            for k in waiting:
                self._activate(k)

    def _new_ep(self, a: int, b: int, birth_a: float, birth_b: float, links) -> Ep:
        ep = Ep(self.next_ep, a, b, birth_a, birth_b, tuple(links))
        self.next_ep += 1
        self.eps[ep.id] = ep
        self._push(ep.oldest_birth + self.tau, DECOHERE, ep.id, ep.id)
        if {a, b} == {self.s, self.d}:
            self.delivered = ep
        return ep

    def _resolve(self, e1: Ep, e2: Ep, mid: int, success: bool) -> Ep | None:
        del self.eps[e1.id], self.eps[e2.id]
        if not success:
            for key in e1.links + e2.links:
                self._activate(key)
            return None
        o1 = e1.node_b if e1.node_a == mid else e1.node_a
        o2 = e2.node_b if e2.node_a == mid else e2.node_a
        links = tuple(reversed(e1.lineage_from(mid))) + e2.lineage_from(mid)
        return self._new_ep(o1, o2, e1.birth_at(o1), e2.birth_at(o2), links)

    def _destroy(self, ep: Ep) -> None:
        del self.eps[ep.id]
        for key in ep.links:
            self._activate(key)

    # views -------------------------------------------------------------------

    def _fresh(self, ep: Ep) -> bool:
        return self.now - ep.oldest_birth < self.tau

    def snapshot(self) -> StateSnapshot:
        now = self.now
        eps = tuple(
            EpView(e.node_a, e.node_b, now - e.birth_a, now - e.birth_b, e.links, ep_id=e.id)
            for e in self.eps.values() if not e.locked and self._fresh(e)
        )
        pending = []
        for sw in self.swaps.values():
            e1, e2 = self.eps[sw.e1], self.eps[sw.e2]
            o1 = e1.node_b if e1.node_a == sw.mid else e1.node_a
            o2 = e2.node_b if e2.node_a == sw.mid else e2.node_a
            links = tuple(reversed(e1.lineage_from(sw.mid))) + e2.lineage_from(sw.mid)
            pending.append(PendingView(o1, o2, now - e1.birth_at(o1), now - e2.birth_at(o2), links,
                                       sw.end - now))
        active = {k: now - l.since for k, l in self.links.items() if l.active}
        return StateSnapshot(eps, active, tuple(pending), now)

    # event handlers ------------------------------------------------------------

    def _on_link(self, payload) -> str | None:
        key, token = payload
        link = self.links[key]
        if not link.active or link.token != token:
            return None
        self._deactivate(key)
        ep = self._new_ep(key[0], key[1], self.now, self.now, (key,))
        return f"{key[0]}-{key[1]} {ep.label()}"

    def _on_swap(self, swap_id: int) -> tuple[str, str] | None:
        sw = self.swaps.pop(swap_id, None)
        if sw is None:
            return None
        e1, e2 = self.eps[sw.e1], self.eps[sw.e2]
        del self.swap_of[e1.id], self.swap_of[e2.id]
        who = f"{e1.label()}+{e2.label()}"
        before = len(self.eps)
        success = self.swap_rng.random() < self.bp
        if not (self._fresh(e1) and self._fresh(e2)):
            success = False
            kind = "swap_expired"
        else:
            kind = "swap_ok" if success else "swap_fail"
        merged = self._resolve(e1, e2, sw.mid, success)
        if merged is not None:
            who += f" -> {merged.label()}"
            self.swaps_succeeded += 1
        if self.check and not (before - 2 <= len(self.eps) <= before - 1):
            self.violations.append(f"{self.now:.9e} swap conservation broken")
        return kind, who

    def _on_decohere(self, ep_id: int) -> tuple[str, str] | None:
        ep = self.eps.get(ep_id)
        if ep is None:
            return None
        swap_id = self.swap_of.get(ep_id)
        if swap_id is None:
            self._destroy(ep)
            return "decohere", ep.label()
        # decoherence during an in-flight swap aborts it as a failure
        sw = self.swaps.pop(swap_id)
        e1, e2 = self.eps[sw.e1], self.eps[sw.e2]
        del self.swap_of[e1.id], self.swap_of[e2.id]
        self._destroy(e1)
        self._destroy(e2)
        return "swap_abort", f"{e1.label()}+{e2.label()}"

    # policy ----------------------------------------------------------------------

    def _trigger(self) -> tuple[str, str]:
        evaluated: list | None = [] if self.record_estimates else None
        decisions = self.policy.decide(self.net, self.snapshot(), evaluated)
        taken = []
        for dec in decisions:
            a, b = dec.swap
            e1, e2 = self.eps.get(a), self.eps.get(b)
            problem = self._swap_problem(e1, e2)
            if problem:
                self.violations.append(f"{self.now:.9e} rejected swap {a}+{b}: {problem}")
                continue
            mid = (set((e1.node_a, e1.node_b)) & set((e2.node_a, e2.node_b))).pop()
            sw = _Swap(self.next_swap, e1.id, e2.id, mid, self.now + self.bt)
            self.next_swap += 1
            e1.locked = e2.locked = True
            self.swaps[sw.id] = sw
            self.swap_of[e1.id] = self.swap_of[e2.id] = sw.id
            self._push(sw.end, SWAP, sw.id, sw.id)
            self.swaps_started += 1
            taken.append(f"swap {e1.label()}+{e2.label()}")
        est = ""
        if evaluated:
            est = " ".join(f"[{lo},{hi}]={L:.6e}" for lo, hi, L in evaluated)
        return ("; ".join(taken) if taken else "wait"), est

    def _swap_problem(self, e1: Ep | None, e2: Ep | None) -> str | None:
        if e1 is None or e2 is None or e1 is e2:
            return "not live"
        if e1.locked or e2.locked:
            return "locked"
        if len({e1.node_a, e1.node_b} & {e2.node_a, e2.node_b}) != 1:
            return "not adjacent"
        if not (self._fresh(e1) and self._fresh(e2)):
            return "qubit age reached tau"
        return None

    # invariants --------------------------------------------------------------

    def _check_state(self) -> None:
        owners: dict[LinkKey, int] = {}
        for ep in self.eps.values():
            for key in ep.links:
                owners[key] = owners.get(key, 0) + 1
        for key, link in self.links.items():
            n = owners.get(key, 0)
            if link.active and n:
                self.violations.append(f"{self.now:.9e} link {key} active while covered by an EP")
            elif not link.active and not link.deferred and n != 1:
                self.violations.append(f"{self.now:.9e} inactive link {key} covered by {n} EPs")
        qubits: dict[int, int] = {}
        for ep in self.eps.values():
            qubits[ep.node_a] = qubits.get(ep.node_a, 0) + 1
            qubits[ep.node_b] = qubits.get(ep.node_b, 0) + 1
        for node, q in qubits.items():
            if q > self.incident.get(node, 0):
                self.violations.append(f"{self.now:.9e} node {node} holds {q} qubits")

    # main loop -----------------------------------------------------------------

    def run(self) -> EpisodeResult:
        for key in self.links:
            self._activate(key)
        self._push(self.sufficient_time, TIMEOUT, 0, self.timeout_token)
        while self.heap:
            time, kind, _, _, payload = heapq.heappop(self.heap)
            if time > self.max_time:
                break
            self.now = time
            if kind == LINK:
                who = self._on_link(payload)
                if who is None:
                    continue
                name = "link"
            elif kind == SWAP:
                out = self._on_swap(payload)
                if out is None:
                    continue
                name, who = out
            elif kind == DECOHERE:
                out = self._on_decohere(payload)
                if out is None:
                    continue
                name, who = out
            else:
                if payload != self.timeout_token:
                    continue
                name, who = "timeout", ""
            if self.delivered is not None:
                ep = self.delivered
                if self.check and not self._fresh(ep):
                    self.violations.append(f"{self.now:.9e} delivered EP past tau")
                self.trace.append(TraceRecord(self.now, name, who, "deliver"))
                break
            if self.check:
                self._check_state()
            decision, est = self._trigger()
            self.trace.append(TraceRecord(self.now, name, who, decision, est))
            self.timeout_token += 1
            self._push(self.now + self.sufficient_time, TIMEOUT, 0, self.timeout_token)
        delivered = self.delivered is not None
        return EpisodeResult(delivered, self.now if delivered else math.nan, self.trace, self.seed,
                             self.violations, self.swaps_started, self.swaps_succeeded)


def run_episode(net: QuantumNetwork, policy: PolicyConfig | Policy, s: int, d: int, seed: int,
                max_time: float | None = None, **options) -> EpisodeResult:
    """Simulate until the first (s, d) EP or ``max_time`` (default 100 * tau)."""
    if isinstance(policy, PolicyConfig):
        policy = build_policy(net, policy, s, d)
    if (policy.s, policy.d) != (s, d):
        raise ValueError("policy was prepared for a different (s, d) pair")
    return Simulation(net, policy, s, d, seed, max_time, **options).run()


def apply_swap(sim: Simulation, e1_id: int, e2_id: int, success: bool,
               clock: float | None = None) -> Ep | None:
    """Resolve a swap of two live, unlocked EPs immediately, outside the event loop.

    On success returns the merged EP (outer births kept); on failure both EPs
    are destroyed and their links restart generation at ``clock``.
    """
    if clock is not None:
        sim.now = clock
    e1, e2 = sim.eps.get(e1_id), sim.eps.get(e2_id)
    problem = sim._swap_problem(e1, e2)
    if problem:
        raise ValueError(f"cannot swap {e1_id} and {e2_id}: {problem}")
    mid = ({e1.node_a, e1.node_b} & {e2.node_a, e2.node_b}).pop()
    return sim._resolve(e1, e2, mid, success)
