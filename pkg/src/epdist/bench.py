"""Parameter sweeps over random topologies with paired policy comparisons."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .network import PhysicalParams, QuantumNetwork, line_network, waxman_generate
from .policies import KINDS, PolicyConfig, build_policy
from .simulator import run_episode

PARAMS = ("nodes", "bp", "gp", "tau", "dist")
_PHYS = {"bp": "atomic_bsm_bp", "gp": "gen_success_gp", "tau": "decoherence_tau"}
STATIC_OF = {"greedy-sp": "static-tree", "greedy-mp": "static-multi-tree"}
MAX_RESAMPLES = 100


def _band(value) -> tuple[float, float]:
    if isinstance(value, str):
        lo, hi = value.split("-")
        return float(lo), float(hi)
    lo, hi = value
    return float(lo), float(hi)


def format_value(param: str, value) -> str:
    if param == "dist":
        lo, hi = _band(value)
        return f"{lo:g}-{hi:g}"
    if param == "nodes":
        return str(int(value))
    return f"{float(value):.9g}"


@dataclass
class ExperimentSpec:
    """One sweep: a parameter, its values, and everything held fixed.

    ``reps`` topologies are drawn per sweep value and each is simulated for
    ``episodes`` seeds, so a row aggregates ``reps * episodes`` episodes.
    """

    param: str = "gp"
    values: list = field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    policies: list[str] = field(default_factory=lambda: ["greedy-sp", "static-tree", "swap-asap"])
    reps: int = 10
    episodes: int = 1
    master_seed: int = 0
    nodes: int = 40
    topology: str = "waxman"  # or "line": s and d are the two ends
    area: tuple[float, float] = (100.0, 100.0)
    band: tuple[float, float] = (20.0, 50.0)
    k: int = 3
    params: PhysicalParams = field(default_factory=PhysicalParams)
    max_time: float | None = None

    def validate(self) -> None:
        if self.param not in PARAMS:
            raise ValueError(f"param must be one of {PARAMS}, got {self.param!r}")
        if not self.values:
            raise ValueError("values must not be empty")
        if self.reps < 1 or self.episodes < 1:
            raise ValueError("reps and episodes must be >= 1")
        if self.topology not in ("waxman", "line"):
            raise ValueError("topology must be 'waxman' or 'line'")
        for kind in self.policies:
            if kind not in KINDS:
                raise ValueError(f"unknown policy {kind!r}")
        for v in self.values:
            self.point(v)

    def point(self, value) -> tuple[int, tuple[float, float], PhysicalParams]:
        """(node count, distance band, physical params) at one sweep value, validated."""
        nodes, band, params = self.nodes, tuple(self.band), self.params
        if self.param == "nodes":
            nodes = int(value)
            if nodes < 2:
                raise ValueError("node count must be >= 2")
        elif self.param == "dist":
            band = _band(value)
            if not 0 <= band[0] <= band[1]:
                raise ValueError(f"bad distance band {value!r}")
        else:
            params = replace(params, **{_PHYS[self.param]: float(value)})
        params.validate()
        return nodes, band, params

    def to_dict(self) -> dict:
        out = asdict(self)
        out["area"], out["band"] = list(self.area), list(self.band)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        names = {f.name for f in fields(PhysicalParams)}
        if "params" in doc:
            doc["params"] = PhysicalParams(**{k: v for k, v in doc["params"].items() if k in names})
        for key in ("area", "band"):
            if key in doc:
                doc[key] = tuple(float(x) for x in doc[key])
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        spec = cls(**doc)
        spec.validate()
        return spec

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def preset(name: str) -> ExperimentSpec:
    if name == "default":
        return ExperimentSpec()
    if name == "small":
        # 5-node chain under a tight memory cutoff
        return ExperimentSpec(param="gp", values=[0.5, 0.6, 0.7, 0.8, 0.9], reps=1, episodes=200,
                              nodes=5, topology="line",
                              params=PhysicalParams(decoherence_tau=1.5e-4))
    raise ValueError(f"unknown preset {name!r}; expected 'default' or 'small'")


@dataclass(frozen=True)
class ResultRow:
    param_value: str
    policy: str
    mean: float  # over delivered episodes, seconds; nan if none delivered
    std: float
    delivered: int
    censored: int
    episodes: int
    seed: int


@dataclass(frozen=True)
class Instance:
    net: QuantumNetwork
    s: int
    d: int
    topo_seed: int
    resampled: int  # seeds skipped because no pair fell in the band


def _seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


def band_pairs(net: QuantumNetwork, band: tuple[float, float]) -> list[tuple[int, int]]:
    lo, hi = band
    return [(a, b) for a, b in itertools.combinations(net.node_ids, 2) if lo <= net.distance(a, b) <= hi]


def make_instance(spec: ExperimentSpec, value_index: int, rep: int) -> Instance:
    """Topology and (s, d) for one replication; resamples the topology seed if the band is empty."""
    nodes, band, params = spec.point(spec.values[value_index])
    for attempt in range(MAX_RESAMPLES):
        topo_seed = _seed(spec.master_seed, value_index, rep, attempt)
        if spec.topology == "line":
            net = line_network(nodes, params=params)
            return Instance(net, 0, nodes - 1, topo_seed, attempt)
        net = waxman_generate(nodes, spec.area, seed=topo_seed, params=params)
        pairs = band_pairs(net, band)
        if pairs:
            rng = np.random.default_rng(topo_seed)
            s, d = pairs[int(rng.integers(len(pairs)))]
            return Instance(net, s, d, topo_seed, attempt)
    raise ValueError(f"no node pair within {band} km after {MAX_RESAMPLES} topologies")


def episode_seed(spec: ExperimentSpec, value_index: int, rep: int, episode: int) -> int:
    """Shared by every policy on the same instance, so comparisons are paired."""
    return _seed(spec.master_seed, value_index, rep, 1_000_000 + episode)


def _run_cell(args) -> list[tuple[int, int, str, list[float]]]:
    spec, value_index, rep = args
    inst = make_instance(spec, value_index, rep)
    out = []
    for kind in spec.policies:
        policy = build_policy(inst.net, PolicyConfig(kind, k=spec.k), inst.s, inst.d)
        lat = [run_episode(inst.net, policy, inst.s, inst.d, episode_seed(spec, value_index, rep, e),
                           spec.max_time).latency for e in range(spec.episodes)]
        out.append((value_index, rep, kind, lat))
    return out


def run_instances(spec: ExperimentSpec, workers: int = 1) -> dict[tuple[int, int, str], list[float]]:
    """Episode latencies keyed by (value index, replication, policy); nan marks a censored episode."""
    spec.validate()
    cells = [(spec, v, r) for v in range(len(spec.values)) for r in range(spec.reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    return {(v, r, kind): lat for chunk in chunks for v, r, kind, lat in chunk}


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[ResultRow]:
    runs = run_instances(spec, workers)
    pooled: dict[tuple[int, str], list[float]] = {}
    for (v, _, kind), lat in sorted(runs.items()):
        pooled.setdefault((v, kind), []).extend(lat)
    rows = []
    for (v, kind), lat in pooled.items():
        arr = np.array(lat)
        ok = arr[~np.isnan(arr)]
        mean = float(ok.mean()) if ok.size else math.nan
        std = float(ok.std(ddof=1)) if ok.size > 1 else (0.0 if ok.size else math.nan)
        rows.append(ResultRow(format_value(spec.param, spec.values[v]), kind, mean, std,
                              int(ok.size), int(arr.size - ok.size), int(arr.size), spec.master_seed))
    order = {format_value(spec.param, x): i for i, x in enumerate(spec.values)}
    rows.sort(key=lambda r: (order[r.param_value], r.policy))
    return rows


# CSV ------------------------------------------------------------------------

HEADER = [f.name for f in fields(ResultRow)]


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)  # shortest exact form


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(getattr(r, name)) for name in HEADER])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [ResultRow(d["param_value"], d["policy"], float(d["mean"]), float(d["std"]), int(d["delivered"]),
                      int(d["censored"]), int(d["episodes"]), int(d["seed"])) for d in reader]


# summary ----------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    param_value: str
    adaptive: str
    static: str
    adaptive_mean: float
    static_mean: float
    reduction: float | None  # (static - adaptive) / static; None when undefined


def reduction(static: float, adaptive: float) -> float | None:
    if not (static > 0.0) or math.isnan(adaptive):
        return None
    return (static - adaptive) / static


def summarize(rows: Sequence[ResultRow]) -> list[Comparison]:
    by = {(r.param_value, r.policy): r for r in rows}
    values = list(dict.fromkeys(r.param_value for r in rows))
    out = []
    for v in values:
        for adaptive, static in STATIC_OF.items():
            a, s = by.get((v, adaptive)), by.get((v, static))
            if a is None or s is None:
                continue
            out.append(Comparison(v, adaptive, static, a.mean, s.mean, reduction(s.mean, a.mean)))
    return out


def format_summary(comparisons: Sequence[Comparison]) -> str:
    lines = [f"{'value':>10}  {'adaptive':<10} {'static':<18} {'adaptive_s':>12} {'static_s':>12} {'reduction':>10}"]
    for c in comparisons:
        red = "undefined" if c.reduction is None else f"{100 * c.reduction:.1f}%"
        lines.append(f"{c.param_value:>10}  {c.adaptive:<10} {c.static:<18} {c.adaptive_mean:>12.6g} "
                     f"{c.static_mean:>12.6g} {red:>10}")
    return "\n".join(lines) + "\n"
