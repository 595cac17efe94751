import json
import os
from pathlib import Path

import numpy as np
import pytest

from mpga import cli
from mpga.compare import compare, migration_window_mask, relative_error, within_tolerance
from mpga.errors import ConfigError
from mpga.io import (
    empirical_csv,
    fmt,
    format_topology,
    parse_snapshot,
    parse_topology,
    read_cumulant_csv,
    read_topology,
    snapshot_text,
    theory_csv,
)
from mpga.sim import RunConfig, run_experiment
from mpga.theory import Topology, gaussian_background, predict_trajectory

DATA = Path(__file__).parent / "data"


def test_fmt():
    assert fmt(0.1234567891234) == "0.123456789"
    assert fmt(20) == "20"
    assert fmt(float("nan")) == "nan"
    assert fmt(-float("inf")) == "-inf"
    assert fmt(1e-12) == "1e-12"


def test_parse_matrix_and_edges():
    m = parse_topology("# ring\n0 1 0\n0 0 1\n1 0 0\n")
    np.testing.assert_array_equal(m.adjacency, Topology.ring(3).adjacency)
    e = parse_topology("0 1\n1 2\n2 0\n")
    np.testing.assert_array_equal(e.adjacency, Topology.ring(3).adjacency)
    forced = parse_topology("# format: edges\n0 1\n1 0\n")
    np.testing.assert_array_equal(forced.adjacency, [[0, 1], [1, 0]])
    sized = parse_topology("# islands: 4\n0 1\n")
    assert sized.n_islands == 4


def test_parse_topology_errors():
    with pytest.raises(ConfigError, match="topology"):
        parse_topology("# nothing\n")
    with pytest.raises(ConfigError, match="topology"):
        parse_topology("0 x\n1 0\n")
    with pytest.raises(ConfigError, match="topology"):
        parse_topology("0 1 2\n")
    with pytest.raises(ConfigError, match="topology"):
        parse_topology("# islands: 2\n0 5\n")
    with pytest.raises(ConfigError, match="topology"):
        parse_topology("# format: matrix\n0 1\n1\n")


def test_topology_roundtrip(tmp_path):
    t = Topology([[0, 1, 1], [0, 0, 0], [1, 0, 0]])
    p = tmp_path / "t.txt"
    p.write_text(format_topology(t))
    np.testing.assert_array_equal(read_topology(p).adjacency, t.adjacency)


def test_scale_free_fixture():
    t = read_topology(DATA / "scale_free_20.txt")
    assert t.n_islands == 20
    assert t.adjacency.sum() == 25
    assert np.all(np.diag(t.adjacency) == 0)
    assert t.in_degree().max() == 13


def test_snapshot_roundtrip():
    g = np.array([[1, -1, 1], [-1, -1, -1]], dtype=np.int8)
    text = snapshot_text(g)
    assert text == "+-+\n---\n"
    np.testing.assert_array_equal(parse_snapshot(text), g)


def test_cumulant_csv_roundtrip(tmp_path):
    bg = gaussian_background(0.0, 20.0, 3)
    traj = predict_trajectory(bg, Topology.ring(2), 0.005, 100, 25, 10, 0.2, bg)
    p = tmp_path / "theory.csv"
    p.write_text(theory_csv(traj))
    kap, se, flags = read_cumulant_csv(p)
    assert se is None
    np.testing.assert_allclose(kap, traj.cumulants, rtol=1e-8)
    np.testing.assert_array_equal(flags, traj.migrated)
    emp = run_experiment(RunConfig(n_islands=2, n_gen=12, migration_period=5, replications=3))
    q = tmp_path / "emp.csv"
    q.write_text(empirical_csv(emp))
    kap, se, flags = read_cumulant_csv(q)
    np.testing.assert_allclose(kap, emp.mean, rtol=1e-8)
    np.testing.assert_allclose(se, emp.stderr, rtol=1e-8)
    lines = q.read_text().splitlines()
    assert lines[0] == "# mpga-empirical v1"
    assert lines[1] == ("generation,island,k1,k2,k3,k4,k1_stderr,k2_stderr,k3_stderr,k4_stderr,"
                        "migrated")


def test_relative_error_and_mask():
    np.testing.assert_allclose(relative_error([1, 2, 0, 0], [1.1, 1.8, 0, 1]), [0.1, 0.1, 0, np.inf])
    mask = migration_window_mask(np.isin(np.arange(30), [10, 20]), 2)
    assert list(np.flatnonzero(~mask)) == [8, 9, 10, 11, 12, 18, 19, 20, 21, 22]
    assert within_tolerance([10.0], [11.5], [0.6], 0.1)[0]
    assert not within_tolerance([10.0], [11.5], [0.1], 0.1)[0]
    assert within_tolerance([0.0], [0.2], [0.1], 0.1)[0]


def test_compare_examples():
    kap = np.random.default_rng(0).uniform(1, 2, size=(30, 3, 3))
    flags = np.zeros(30, dtype=bool)
    flags[[10, 20]] = True
    same = compare(kap, kap, flags)
    assert np.all(same.rel_error == 0)
    scaled = compare(kap, 1.1 * kap, flags)
    np.testing.assert_allclose(scaled.rel_error, 0.1, rtol=1e-12)
    assert scaled.summary()["k2"]["max"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        compare(kap, kap[:, :2], flags)


def _run(argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("name", ["fig2", "single", "beta0"])
def test_theory_golden(tmp_path, name):
    assert _run(["theory", "--config", DATA / "configs" / f"{name}.json", "--out", tmp_path]) == 0
    for f in ("theory.csv", "theory_pre.csv"):
        assert (tmp_path / f).read_bytes() == (DATA / "golden" / name / f).read_bytes()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "theory"
    assert set(manifest["outputs"]) == {"theory.csv", "theory_pre.csv"}
    assert manifest["version"] and "total_s" in manifest["timings"]


def test_beta0_golden_matches_closed_form():
    kap, _, _ = read_cumulant_csv(DATA / "golden" / "beta0" / "theory.csv")
    n = np.arange(kap.shape[0])
    np.testing.assert_allclose(kap[:, 0, 1], 20 * (1 - 1 / 50) ** n, rtol=1e-8)


def test_simulate_and_replay(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_islands": 3, "n_gen": 12, "migration_period": 5,
                               "replications": 4, "snapshot_generations": [10]}))
    out = tmp_path / "run"
    assert _run(["simulate", "--config", cfg, "--out", out, "--seed", 7]) == 0
    names = sorted(os.listdir(out / "snapshots"))
    assert names == [f"gen00010_island{l:03d}.txt" for l in range(3)]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["config"]["seed"] == 7
    assert _run(["replay", out / "manifest.json", "--out", tmp_path / "again"]) == 0
    # tamper with a recorded hash: replay reports a mismatch
    manifest["outputs"]["empirical.csv"]["sha256"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(manifest))
    assert _run(["replay", out / "manifest.json", "--out", tmp_path / "third"]) == 1


def test_simulate_workers_byte_identical(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_islands": 2, "n_gen": 10, "migration_period": 5,
                               "replications": 5}))
    for w in (1, 3):
        assert _run(["simulate", "--config", cfg, "--out", tmp_path / f"w{w}", "--workers", w]) == 0
    for f in ("empirical.csv", "empirical_pre.csv", "topology.txt"):
        assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w3" / f).read_bytes()


def test_klgraph_from_csv_and_snapshots(tmp_path):
    theory = DATA / "golden" / "fig2" / "theory.csv"
    out = tmp_path / "kg"
    assert _run(["klgraph", "--input", theory, "--generation", 0, "--topology", "ring",
                 "--out", out]) == 0
    rows = (out / "klgraph_theoretical_g0.csv").read_text().splitlines()
    assert rows[0] == "# mpga-klgraph v1"
    # identical islands at generation 0 give the zero graph
    assert all(r.split(",")[2] == "0" for r in rows[2:])
    assert (out / "klgraph_theoretical_g0_gaussian.dot").exists()

    snap = tmp_path / "snap"
    (snap / "snapshots").mkdir(parents=True)
    (snap / "snapshots" / "gen00003_island000.txt").write_text("+\n-\n" * 10)
    (snap / "snapshots" / "gen00003_island001.txt").write_text("++\n--\n" * 10)
    assert _run(["klgraph", "--snapshots", snap / "snapshots", "--generation", 3,
                 "--mode", "empirical", "--out", tmp_path / "kg2"]) == 0
    dot = (tmp_path / "kg2" / "klgraph_empirical_g3.dot").read_text()
    assert dot.startswith("digraph kl_generation_3")
    assert _run(["replay", tmp_path / "kg2" / "manifest.json", "--out", tmp_path / "kg3"]) == 0


def test_compare_command(tmp_path):
    th = DATA / "golden" / "fig2" / "theory.csv"
    assert _run(["compare", "--theory", th, "--empirical", th, "--out", tmp_path]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["window"] == 2
    assert summary["summary"]["k2"]["max"] == 0.0
    other = DATA / "golden" / "single" / "theory.csv"
    assert _run(["compare", "--theory", th, "--empirical", other, "--out", tmp_path / "x"]) == 2


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"r_mig": 3}))
    assert _run(["theory", "--config", bad, "--out", tmp_path / "a"]) == 2
    bad.write_text("{not json")
    assert _run(["theory", "--config", bad, "--out", tmp_path / "b"]) == 2
    assert _run(["theory", "--config", tmp_path / "missing.json", "--out", tmp_path / "c"]) == 4
    num = tmp_path / "num.json"
    num.write_text(json.dumps({"n_islands": 1, "topology": "isolated", "n_pop": 2, "beta": 50.0,
                               "genome_length": 1, "n_gen": 5, "r_mig": 0.0}))
    assert _run(["theory", "--config", num, "--out", tmp_path / "d"]) == 3
    assert _run(["simulate", "--out", tmp_path / "e", "--workers", 0]) == 2
    assert _run(["klgraph", "--generation", 0, "--out", tmp_path / "f"]) == 2
    assert _run(["klgraph", "--input", tmp_path / "nope.csv", "--generation", 0,
                 "--out", tmp_path / "g"]) == 4
    assert _run(["klgraph", "--input", DATA / "golden" / "single" / "theory.csv",
                 "--generation", 999, "--out", tmp_path / "h"]) == 2


def test_ising_command_small(tmp_path):
    cfg = tmp_path / "i.json"
    cfg.write_text(json.dumps({"L": 4, "temperatures": [2.0, 3.0], "n_islands": 2, "n_pop": 4,
                               "n_gen": 16, "therm_cutoff": 8, "budgets": [12, 16],
                               "reference_sweeps": 500, "reference_therm": 100}))
    assert _run(["ising", "--config", cfg, "--out", tmp_path / "o"]) == 0
    out = tmp_path / "o"
    thermo = (out / "thermo_mpga.csv").read_text().splitlines()
    assert thermo[0] == "# mpga-thermo v1"
    assert thermo[1].startswith("T,E_mean,E_stderr,C_H,m_mean,m_stderr,chi,n_gen,therm_cutoff,"
                                "mh_steps")
    assert len(thermo) == 4
    budget = (out / "budget.csv").read_text().splitlines()
    assert budget[:2] == ["# mpga-budget v1", "N_g,MAE_CH,MAE_chi,method"]
    assert [r.split(",")[0] + r.split(",")[3] for r in budget[2:]] == ["12mpga", "12mh", "16mpga",
                                                                       "16mh"]
    assert _run(["replay", out / "manifest.json", "--out", tmp_path / "r"]) == 0
