"""MPGA-accelerated thermalisation of the Ising model and its plain
Metropolis baseline.

A run has two phases.  During generations 1..therm_cutoff every island
applies accept-reject selection at temperature T, patch crossover, one
Metropolis sweep as mutation, and migration every ``migration_period``
generations.  Generations therm_cutoff+1..n_gen are one Metropolis sweep
per individual and are the ones measured.  With ``evolve=False`` phase 1
is plain sweeps, which is the equal-budget Metropolis baseline.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..errors import ConfigError
from ..sim import IslandState, accept_reject_select, migrate, resolve_topology
from .lattice import crossover_spins, ising_energy, magnetization, sweep_batch, sweep_record
from .observables import observables

METHODS = ("mpga", "mh")
_TAG = {"mpga": 0, "mh": 1, "reference": 2}


def default_temperatures():
    return [round(1.0 + 0.1 * k, 1) for k in range(30)]


@dataclass
class IsingConfig:
    L: int = 8
    temperatures: list = field(default_factory=default_temperatures)
    n_islands: int = 4
    n_pop: int = 20
    n_gen: int = 200
    therm_cutoff: int = 50
    migration_period: int = 2
    r_mig: float = 0.2
    r_cross: float = 0.6
    topology: object = "ring"
    crossover_mode: str = "patch"
    seed: int = 0
    experiments: int = 1
    budgets: list = field(default_factory=lambda: [60, 80, 100])
    reference_sweeps: int = 100_000
    reference_therm: int = 10_000

    def __post_init__(self):
        self.validate()

    def validate(self):
        ints = ("L", "n_islands", "n_pop", "n_gen", "therm_cutoff", "migration_period", "seed",
                "experiments", "reference_sweeps", "reference_therm")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {v!r}")
        for name in ("r_mig", "r_cross"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0 <= v <= 1:
                raise ConfigError(name, f"must lie in [0, 1], got {v!r}")
        if self.L < 2:
            raise ConfigError("L", "lattice side must be >= 2")
        if self.n_pop < 2:
            raise ConfigError("n_pop", "population size must be >= 2")
        if self.n_islands < 1:
            raise ConfigError("n_islands", "need at least one island")
        if self.migration_period < 1:
            raise ConfigError("migration_period", "must be >= 1")
        if not 0 <= self.therm_cutoff < self.n_gen:
            raise ConfigError("therm_cutoff", "must satisfy 0 <= therm_cutoff < n_gen")
        if not self.temperatures or any(not t > 0 for t in self.temperatures):
            raise ConfigError("temperatures", "need a non-empty list of positive temperatures")
        if any(not self.therm_cutoff < b for b in self.budgets):
            raise ConfigError("budgets", "every budget must exceed therm_cutoff")
        if self.crossover_mode not in ("patch", "uniform"):
            raise ConfigError("crossover_mode", f"unknown mode {self.crossover_mode!r}")
        if self.experiments < 1:
            raise ConfigError("experiments", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if self.reference_sweeps < 2 or self.reference_therm < 0:
            raise ConfigError("reference_sweeps", "need at least two measured sweeps")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown configuration key")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        if isinstance(d["topology"], np.ndarray):
            d["topology"] = d["topology"].tolist()
        return d


def run_streams(seed, tag, experiment, t_index, n_gen, n_streams):
    root = np.random.SeedSequence(seed, spawn_key=(_TAG[tag], experiment, t_index, n_gen))
    return [np.random.default_rng(s) for s in root.spawn(n_streams)]


def _select_and_cross(spins, energy, T, rng, r_cross, mode):
    """Accept-reject selection with p = exp(-(E - E_min)/T), then crossover of
    each selected individual with a random partner at rate ``r_cross``."""
    n = spins.shape[0]
    p = np.exp(-(energy - energy.min()) / T)
    parents = spins[accept_reject_select(p, n, rng)]
    out = parents.copy()
    if r_cross > 0:
        do = rng.random(n) < r_cross
        partners = rng.integers(0, n, size=n)
        for k in np.flatnonzero(do):
            out[k] = crossover_spins(parents[k], parents[partners[k]], rng, mode)
    return out


def mpga_mh_run(config, T, n_gen=None, experiment=0, t_index=0, evolve=True):
    """One run at temperature ``T``; returns (E, M) samples of shape
    (n_gen - therm_cutoff, n_islands * n_pop)."""
    n_gen = config.n_gen if n_gen is None else n_gen
    if not config.therm_cutoff < n_gen:
        raise ConfigError("n_gen", "must exceed therm_cutoff")
    L, NI, NP = config.L, config.n_islands, config.n_pop
    topo = resolve_topology(config.topology, NI)
    rngs = run_streams(config.seed, "mpga" if evolve else "mh", experiment, t_index, n_gen, NI)
    spins = [(2 * rng.integers(0, 2, size=(NP, L, L)) - 1).astype(np.int8) for rng in rngs]
    energy = [ising_energy(s) for s in spins]
    mag = [magnetization(s) for s in spins]
    beta = 1.0 / T

    def flat_energy(g):
        return ising_energy(g.reshape(-1, L, L)).astype(float)

    E_rec, M_rec = [], []
    for n in range(1, n_gen + 1):
        evolving = evolve and n <= config.therm_cutoff
        for l in range(NI):
            if evolving:
                spins[l] = _select_and_cross(spins[l], energy[l], T, rngs[l], config.r_cross,
                                             config.crossover_mode)
                energy[l] = ising_energy(spins[l])
                mag[l] = magnetization(spins[l])
            sweep_batch(spins[l], energy[l], mag[l], T, rngs[l])
        if evolving and n % config.migration_period == 0 and config.r_mig > 0 and NI > 1:
            islands = [IslandState(l, spins[l].reshape(NP, L * L), energy[l].astype(float), rngs[l])
                       for l in range(NI)]
            islands = migrate(islands, topo, config.r_mig, beta, flat_energy)
            spins = [isl.genomes.reshape(NP, L, L).copy() for isl in islands]
            energy = [ising_energy(s) for s in spins]
            mag = [magnetization(s) for s in spins]
        if n > config.therm_cutoff:
            E_rec.append(np.concatenate(energy))
            M_rec.append(np.concatenate(mag))
    return np.array(E_rec), np.array(M_rec)


def reference_run(L, T, sweeps, therm, rng, block=1000):
    """Long single-chain Metropolis run from the all-up state."""
    s = np.ones((1, L, L), dtype=np.int8)
    e = ising_energy(s).astype(np.int64)
    m = magnetization(s).astype(np.int64)
    left = therm
    while left > 0:
        k = min(block, left)
        sweep_batch(s, e, m, T, rng, k)
        left -= k
    E, M = [], []
    done = 0
    while done < sweeps:
        k = min(block, sweeps - done)
        be, bm = sweep_record(s, e, m, T, rng, k)
        E.append(be[:, 0])
        M.append(bm[:, 0])
        done += k
    return np.concatenate(E), np.concatenate(M)


def _reference_task(args):
    L, T, sweeps, therm, seed, t_index = args
    rng = run_streams(seed, "reference", 0, t_index, sweeps, 1)[0]
    E, M = reference_run(L, T, sweeps, therm, rng)
    return observables(E, M, L, T)


def _run_task(args):
    cfg_dict, method, T, n_gen, experiment, t_index = args
    cfg = IsingConfig.from_dict(cfg_dict)
    E, M = mpga_mh_run(cfg, T, n_gen, experiment, t_index, evolve=(method == "mpga"))
    return observables(E, M, cfg.L, T)


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def reference_thermo(config, workers=1):
    tasks = [(config.L, T, config.reference_sweeps, config.reference_therm, config.seed, i)
             for i, T in enumerate(config.temperatures)]
    return _map(_reference_task, tasks, workers)


@dataclass
class ThermoRecord:
    T: float
    obs: object  # Observables averaged over experiments
    n_gen: int
    therm_cutoff: int
    mh_steps: int


def _average(obs_list):
    """Mean over experiments; the error is the spread over experiments when
    there are several, the jackknife error otherwise."""
    cls = type(obs_list[0])
    keys = ["energy", "specific_heat", "magnetization", "abs_magnetization", "susceptibility"]
    vals = {k: float(np.mean([getattr(o, k) for o in obs_list])) for k in keys}
    n = len(obs_list)
    for k in keys:
        if n > 1:
            vals[k + "_se"] = float(np.std([getattr(o, k) for o in obs_list], ddof=1) / np.sqrt(n))
        else:
            vals[k + "_se"] = getattr(obs_list[0], k + "_se")
    return cls(**vals, n_samples=sum(o.n_samples for o in obs_list))


def thermo_series(config, method="mpga", n_gen=None, workers=1):
    n_gen = config.n_gen if n_gen is None else n_gen
    cfg = config.to_dict()
    tasks = [(cfg, method, T, n_gen, e, i)
             for i, T in enumerate(config.temperatures) for e in range(config.experiments)]
    res = _map(_run_task, tasks, workers)
    ne = config.experiments
    return [ThermoRecord(T, _average(res[i * ne:(i + 1) * ne]), n_gen, config.therm_cutoff, n_gen)
            for i, T in enumerate(config.temperatures)]


@dataclass
class BudgetRow:
    n_gen: int
    method: str
    mae_ch: float
    mae_chi: float
    per_t_ch: np.ndarray
    per_t_chi: np.ndarray


def budget_sweep(config, reference, workers=1, methods=METHODS):
    """Mean absolute error of C_H and chi against ``reference`` for every
    budget in ``config.budgets``, averaged over temperatures and experiments."""
    cfg = config.to_dict()
    ref_ch = np.array([r.specific_heat for r in reference])
    ref_chi = np.array([r.susceptibility for r in reference])
    tasks = [(cfg, method, T, ng, e, i)
             for ng in config.budgets for method in methods
             for i, T in enumerate(config.temperatures) for e in range(config.experiments)]
    res = iter(_map(_run_task, tasks, workers))
    rows = []
    nt, ne = len(config.temperatures), config.experiments
    for ng in config.budgets:
        for method in methods:
            ch = np.empty((nt, ne))
            chi = np.empty((nt, ne))
            for i in range(nt):
                for e in range(ne):
                    o = next(res)
                    ch[i, e] = abs(o.specific_heat - ref_ch[i])
                    chi[i, e] = abs(o.susceptibility - ref_chi[i])
            rows.append(BudgetRow(ng, method, float(ch.mean()), float(chi.mean()),
                                  ch.mean(axis=1), chi.mean(axis=1)))
    return rows
