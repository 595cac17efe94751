"""Command-line entry point: ``mpga {theory,simulate,klgraph,ising,compare,replay}``.

Exit codes: 0 success, 1 replay mismatch, 2 configuration error,
3 numerical failure, 4 I/O error.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .compare import compare
from .errors import ConfigError, NumericalError
from .io import (
    empirical_csv,
    fmt,
    format_topology,
    parse_snapshot,
    read_cumulant_csv,
    snapshot_text,
    theory_csv,
)
from .klgraph import build_kl_graph, graph_to_csv, graph_to_dot
from .sim import RunConfig, resolve_topology, run_experiment
from .stats import sample_cumulants_axis
from .theory import predict_trajectory

log = logging.getLogger("mpga")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Outputs:
    """Writes files under one directory and remembers their hashes."""

    def __init__(self, root):
        self.root = root
        self.files = {}
        os.makedirs(root, exist_ok=True)

    def write(self, name, text):
        path = os.path.join(self.root, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files[name] = sha256_file(path)
        return path

    def manifest(self, command, config, seed, timings, extra=None):
        data = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config,
            "outputs": {k: {"sha256": v} for k, v in sorted(self.files.items())},
            "timings": timings,
        }
        if extra:
            data.update(extra)
        path = os.path.join(self.root, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None


def _run_config(args):
    data = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    return RunConfig.from_dict(data)


def cmd_theory(args):
    t0 = time.perf_counter()
    cfg = _run_config(args)
    topo = resolve_topology(cfg.topology, cfg.n_islands)
    background = cfg.background()
    traj = predict_trajectory(background, topo, cfg.beta, cfg.n_pop, cfg.n_gen,
                              cfg.migration_period, cfg.r_mig, background)
    out = Outputs(args.out)
    out.write("theory.csv", theory_csv(traj))
    out.write("theory_pre.csv", theory_csv(traj, pre=True))
    echo = cfg.to_dict()
    echo["topology"] = topo.adjacency.tolist()
    out.manifest("theory", echo, cfg.seed, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_simulate(args):
    t0 = time.perf_counter()
    cfg = _run_config(args)
    topo = resolve_topology(cfg.topology, cfg.n_islands)
    cfg.topology = topo.adjacency.tolist()
    emp = run_experiment(cfg, workers=args.workers)
    out = Outputs(args.out)
    out.write("empirical.csv", empirical_csv(emp))
    out.write("empirical_pre.csv", empirical_csv(emp, pre=True))
    out.write("topology.txt", format_topology(topo))
    for g, pops in sorted(emp.snapshots.items()):
        for l, genomes in enumerate(pops):
            out.write(f"snapshots/gen{g:05d}_island{l:03d}.txt", snapshot_text(genomes))
    out.manifest("simulate", cfg.to_dict(), cfg.seed, {"total_s": time.perf_counter() - t0},
                 {"workers": args.workers})
    return EXIT_OK


def _snapshot_cumulants(directory, generation, fitness, order):
    prefix = f"gen{generation:05d}_island"
    names = sorted(n for n in os.listdir(directory) if n.startswith(prefix))
    if not names:
        raise FileNotFoundError(f"no snapshots for generation {generation} in {directory}")
    fits = []
    for name in names:
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            fits.append(fitness(parse_snapshot(fh.read())))
    return np.array([sample_cumulants_axis(f, order) for f in fits])


def cmd_klgraph(args):
    t0 = time.perf_counter()
    if (args.input is None) == (args.snapshots is None):
        raise ConfigError("input", "give exactly one of --input or --snapshots")
    if args.input is not None:
        kap, _, _ = read_cumulant_csv(args.input)
        if not 0 <= args.generation < kap.shape[0]:
            raise ConfigError("generation", f"{args.generation} outside 0..{kap.shape[0] - 1}")
        kappas = kap[args.generation]
    else:
        from .sim import paramagnet_fitness
        kappas = _snapshot_cumulants(args.snapshots, args.generation, paramagnet_fitness, 4)
    topo = None
    if args.topology:
        topo = resolve_topology(args.topology, kappas.shape[0])
    graph = build_kl_graph(kappas, topo, generation=args.generation, source=args.mode)
    out = Outputs(args.out)
    stem = f"klgraph_{args.mode}_g{args.generation}"
    out.write(stem + ".dot", graph_to_dot(graph))
    out.write(stem + ".csv", graph_to_csv(graph))
    out.write(stem + "_gaussian.dot", graph_to_dot(graph, gaussian=True))
    out.write(stem + "_gaussian.csv", graph_to_csv(graph, gaussian=True))
    if graph.has_negative:
        log.warning("corrected divergences contain negative entries")
    out.manifest("klgraph", {"input": args.input, "snapshots": args.snapshots,
                             "generation": args.generation, "mode": args.mode,
                             "topology": args.topology},
                 None, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def _thermo_csv(records):
    cols = ["T", "E_mean", "E_stderr", "C_H", "m_mean", "m_stderr", "chi", "n_gen",
            "therm_cutoff", "mh_steps", "C_H_stderr", "chi_stderr", "m_abs", "m_abs_stderr"]
    lines = ["# mpga-thermo v1", ",".join(cols)]
    for r in records:
        o = r.obs
        vals = [r.T, o.energy, o.energy_se, o.specific_heat, o.magnetization, o.magnetization_se,
                o.susceptibility]
        tail = [o.specific_heat_se, o.susceptibility_se, o.abs_magnetization,
                o.abs_magnetization_se]
        lines.append(",".join([fmt(v) for v in vals]
                              + [str(r.n_gen), str(r.therm_cutoff), str(r.mh_steps)]
                              + [fmt(v) for v in tail]))
    return "\n".join(lines) + "\n"


def _budget_csv(rows, temperatures):
    lines = ["# mpga-budget v1", "N_g,MAE_CH,MAE_chi,method"]
    for r in rows:
        lines.append(f"{r.n_gen},{fmt(r.mae_ch)},{fmt(r.mae_chi)},{r.method}")
    detail = ["# mpga-budget-detail v1", "N_g,method,T,AE_CH,AE_chi"]
    for r in rows:
        for T, a, b in zip(temperatures, r.per_t_ch, r.per_t_chi):
            detail.append(f"{r.n_gen},{r.method},{fmt(T)},{fmt(a)},{fmt(b)}")
    return "\n".join(lines) + "\n", "\n".join(detail) + "\n"


def cmd_ising(args):
    from .ising.mpga import IsingConfig, ThermoRecord, budget_sweep, reference_thermo, thermo_series

    t0 = time.perf_counter()
    data = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = IsingConfig.from_dict(data)
    topo = resolve_topology(cfg.topology, cfg.n_islands)
    cfg.topology = topo.adjacency.tolist()
    out = Outputs(args.out)
    timings = {}
    if not args.skip_series:
        for method in ("mpga", "mh"):
            recs = thermo_series(cfg, method, workers=args.workers)
            out.write(f"thermo_{method}.csv", _thermo_csv(recs))
        timings["series_s"] = time.perf_counter() - t0
    if cfg.budgets and not args.skip_budget:
        t1 = time.perf_counter()
        ref = reference_thermo(cfg, workers=args.workers)
        ref_recs = [ThermoRecord(T, o, cfg.reference_sweeps, cfg.reference_therm,
                                 cfg.reference_sweeps + cfg.reference_therm)
                    for T, o in zip(cfg.temperatures, ref)]
        out.write("reference.csv", _thermo_csv(ref_recs))
        rows = budget_sweep(cfg, ref, workers=args.workers)
        summary, detail = _budget_csv(rows, cfg.temperatures)
        out.write("budget.csv", summary)
        out.write("budget_detail.csv", detail)
        timings["budget_s"] = time.perf_counter() - t1
    timings["total_s"] = time.perf_counter() - t0
    out.manifest("ising", cfg.to_dict(), cfg.seed, timings, {"workers": args.workers})
    return EXIT_OK


def cmd_compare(args):
    th, _, flags_t = read_cumulant_csv(args.theory)
    em, _, flags_e = read_cumulant_csv(args.empirical)
    k = min(th.shape[2], em.shape[2])
    if th.shape[:2] != em.shape[:2]:
        raise ConfigError("empirical", f"shape {em.shape[:2]} does not match theory {th.shape[:2]}")
    report = compare(th[..., :k], em[..., :k], flags_t | flags_e, window=args.window)
    out = Outputs(args.out)
    cols = ["generation", "island"] + [f"rel_k{i + 1}" for i in range(k)] + ["scored"]
    lines = ["# mpga-compare v1", ",".join(cols)]
    for n in range(report.rel_error.shape[0]):
        for l in range(report.rel_error.shape[1]):
            vals = ",".join(fmt(v) for v in report.rel_error[n, l])
            lines.append(f"{n},{l},{vals},{int(report.mask[n])}")
    out.write("relative_error.csv", "\n".join(lines) + "\n")
    summary = {"window": args.window, "summary": report.summary()}
    out.write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary["summary"], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args):
    """Re-run a manifest's command with its recorded config and compare hashes."""
    manifest = _load_json(args.manifest)
    command = manifest.get("command")
    config = manifest.get("config")
    os.makedirs(args.out, exist_ok=True)
    argv = [command, "--out", args.out]
    if command in ("theory", "simulate", "ising"):
        cfg_path = os.path.join(args.out, "replay_config.json")
        with open(cfg_path, "w", encoding="utf-8") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
        argv += ["--config", cfg_path]
        if command != "theory":
            argv += ["--workers", str(manifest.get("workers", 1))]
    elif command == "klgraph":
        for key in ("input", "snapshots", "topology"):
            if config.get(key):
                argv += [f"--{key}", config[key]]
        argv += ["--generation", str(config["generation"]), "--mode", config["mode"]]
    else:
        raise ConfigError("command", f"cannot replay {command!r}")
    code = main(argv)
    if code != EXIT_OK:
        return code
    fresh = _load_json(os.path.join(args.out, "manifest.json"))["outputs"]
    bad = [k for k, v in manifest["outputs"].items() if fresh.get(k, {}).get("sha256") != v["sha256"]]
    for k in bad:
        print(f"hash mismatch: {k}", file=sys.stderr)
    if not bad:
        print(f"replay reproduced {len(manifest['outputs'])} outputs")
    return EXIT_MISMATCH if bad else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mpga", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", required=True, help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, default=1, help="worker processes")

    common(sub.add_parser("theory", help="predict cumulant trajectories"), workers=False)
    common(sub.add_parser("simulate", help="run the MPGA and record sample cumulants"))

    kg = sub.add_parser("klgraph", help="Kullback-Leibler island graph at one generation")
    kg.add_argument("--input", help="theory or empirical cumulant CSV")
    kg.add_argument("--snapshots", help="directory of population snapshots")
    kg.add_argument("--generation", type=int, required=True)
    kg.add_argument("--mode", choices=["theoretical", "empirical"], default="theoretical")
    kg.add_argument("--topology", help="topology file or name used as the edge mask")
    kg.add_argument("--out", required=True)

    ising = sub.add_parser("ising", help="Ising thermalisation: MPGA versus Metropolis")
    common(ising)
    ising.add_argument("--skip-series", action="store_true", help="only run the budget sweep")
    ising.add_argument("--skip-budget", action="store_true", help="only write thermo series")

    cmp_ = sub.add_parser("compare", help="relative errors of empirical versus theory")
    cmp_.add_argument("--theory", required=True)
    cmp_.add_argument("--empirical", required=True)
    cmp_.add_argument("--window", type=int, default=2, help="generations masked around migrations")
    cmp_.add_argument("--out", required=True)

    rp = sub.add_parser("replay", help="re-run a manifest and verify output hashes")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    return p


COMMANDS = {"theory": cmd_theory, "simulate": cmd_simulate, "klgraph": cmd_klgraph,
            "ising": cmd_ising, "compare": cmd_compare, "replay": cmd_replay}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: workers: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
