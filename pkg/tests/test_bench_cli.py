import json
import math

import pytest

from epdist import bench
from epdist.bench import ExperimentSpec, ResultRow, reduction
from epdist.cli import main
from epdist.network import PhysicalParams, QuantumNetwork

TINY = dict(param="gp", values=[0.9], policies=["greedy-sp", "static-tree"], reps=10, nodes=8,
            band=(10.0, 60.0))


def test_sweep_row_shape():
    rows = bench.run_sweep(ExperimentSpec(**TINY))
    assert [(r.param_value, r.policy) for r in rows] == [("0.9", "greedy-sp"), ("0.9", "static-tree")]
    for r in rows:
        assert r.episodes == 10 and r.delivered + r.censored == 10 and r.seed == 0


def test_sweep_csv_is_byte_identical_across_runs():
    spec = ExperimentSpec(**TINY)
    assert bench.rows_to_csv(bench.run_sweep(spec)) == bench.rows_to_csv(bench.run_sweep(spec))


def test_workers_do_not_change_results():
    spec = ExperimentSpec(**{**TINY, "reps": 3})
    assert bench.rows_to_csv(bench.run_sweep(spec)) == bench.rows_to_csv(bench.run_sweep(spec, workers=2))


def test_policies_share_instances_and_seeds():
    spec = ExperimentSpec(**{**TINY, "reps": 2, "episodes": 2})
    a, b = bench.make_instance(spec, 0, 1), bench.make_instance(spec, 0, 1)
    assert (a.s, a.d, a.topo_seed) == (b.s, b.d, b.topo_seed)
    assert a.net.to_dict() == b.net.to_dict()
    lo, hi = spec.band
    assert lo <= a.net.distance(a.s, a.d) <= hi
    assert bench.episode_seed(spec, 0, 1, 0) != bench.episode_seed(spec, 0, 1, 1)


@pytest.mark.parametrize("static, adaptive, expected", [
    (1.0, 0.6, 0.4), (2.0, 2.0, 0.0), (1.0, 1.25, -0.25), (0.0, 1.0, None), (math.nan, 1.0, None),
    (1.0, math.nan, None),
])
def test_reduction(static, adaptive, expected):
    got = reduction(static, adaptive)
    assert got == (None if expected is None else pytest.approx(expected))


def test_summarize_pairs_policies():
    rows = [ResultRow("0.5", p, m, 0.0, 1, 0, 1, 0) for p, m in
            [("greedy-sp", 0.6), ("static-tree", 1.0), ("greedy-mp", 3.0), ("static-multi-tree", 0.0)]]
    comps = bench.summarize(rows)
    assert [(c.adaptive, c.static) for c in comps] == [("greedy-sp", "static-tree"), ("greedy-mp", "static-multi-tree")]
    assert comps[0].reduction == pytest.approx(0.4) and comps[1].reduction is None
    text = bench.format_summary(comps)
    assert "40.0%" in text and "undefined" in text


def test_csv_round_trip():
    rows = [ResultRow("20-50", "swap-asap", 1.234567891e-3, 2e-4, 7, 3, 10, 5),
            ResultRow("20-50", "static-tree", math.nan, math.nan, 0, 10, 10, 5)]
    back = bench.rows_from_csv(bench.rows_to_csv(rows))
    assert back[0] == rows[0]
    assert math.isnan(back[1].mean) and back[1].censored == 10
    with pytest.raises(ValueError):
        bench.rows_from_csv("a,b\n1,2\n")


def test_spec_round_trip_and_validation(tmp_path):
    spec = ExperimentSpec(param="dist", values=["10-30", "30-60"], params=PhysicalParams(atomic_bsm_bp=0.7))
    path = tmp_path / "spec.json"
    path.write_text(spec.dumps())
    assert ExperimentSpec.load(path) == spec
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({**spec.to_dict(), "color": "red"})
    for bad in ({"param": "beta"}, {"values": []}, {"policies": ["magic"]}, {"reps": 0},
                {"param": "gp", "values": [1.5]}, {"param": "nodes", "values": [1]},
                {"param": "dist", "values": ["50-10"]}, {"topology": "ring"}):
        with pytest.raises(ValueError):
            ExperimentSpec(**bad).validate()


def test_point_applies_sweep_value():
    spec = ExperimentSpec(param="tau", values=[1e-3])
    nodes, band, params = spec.point(1e-3)
    assert nodes == 40 and band == (20.0, 50.0) and params.decoherence_tau == 1e-3
    assert ExperimentSpec(param="nodes", values=[12]).point(12)[0] == 12


def test_impossible_band_raises():
    spec = ExperimentSpec(param="dist", values=["500-600"], reps=1, nodes=6)
    with pytest.raises(ValueError, match="no node pair"):
        bench.make_instance(spec, 0, 0)


def test_presets():
    small = bench.preset("small")
    assert small.nodes == 5 and small.params.decoherence_tau == 1.5e-4
    assert small.values == [0.5, 0.6, 0.7, 0.8, 0.9]
    assert bench.preset("default") == ExperimentSpec()
    with pytest.raises(ValueError):
        bench.preset("huge")


# CLI --------------------------------------------------------------------------


def test_cli_gen_writes_loadable_network(tmp_path):
    out = tmp_path / "net.json"
    assert main(["gen", "--nodes", "12", "--seed", "3", "--out", str(out)]) == 0
    net = QuantumNetwork.load(out)
    assert len(net.nodes) == 12 and net.is_connected()


def test_cli_run_prints_trace(tmp_path, capsys):
    out = tmp_path / "net.json"
    main(["gen", "--nodes", "6", "--out", str(out)])
    assert main(["run", "--network", str(out), "--s", "0", "--d", "5", "--seed", "2", "--estimates"]) == 0
    captured = capsys.readouterr()
    assert "\t" in captured.out and "s=0 d=5" in captured.err
    assert main(["run", "--network", str(out), "--s", "0"]) == 2


def test_cli_sweep_and_summarize(tmp_path, capsys):
    csv_path = tmp_path / "rows.csv"
    argv = ["sweep", "--preset", "small", "--values", "0.9", "--reps", "1", "--episodes", "3",
            "--policy", "greedy-sp", "--policy", "static-tree", "--out", str(csv_path)]
    assert main(argv) == 0
    rows = bench.rows_from_csv(csv_path.read_text())
    assert len(rows) == 2 and all(r.episodes == 3 for r in rows)
    assert main(["summarize", str(csv_path)]) == 0
    assert "greedy-sp" in capsys.readouterr().out


def test_cli_sweep_reads_spec_file(tmp_path):
    spec = ExperimentSpec(**{**TINY, "reps": 1})
    spec_path, csv_path = tmp_path / "spec.json", tmp_path / "out.csv"
    spec_path.write_text(json.dumps(spec.to_dict()))
    assert main(["sweep", str(spec_path), "--out", str(csv_path)]) == 0
    assert csv_path.read_text() == bench.rows_to_csv(bench.run_sweep(spec))


def test_cli_sweep_rejects_bad_values(capsys):
    assert main(["sweep", "--param", "gp", "--values", "2.0"]) == 2
    assert main(["sweep", "--param", "gp"]) == 2
    assert "error" in capsys.readouterr().err
