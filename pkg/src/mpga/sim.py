"""Island-model genetic algorithm on spin genomes.

Populations are stored as arrays: an island holds an ``(N_P, L)`` int8
genome matrix of +-1 spins and the matching fitness vector, recomputed
whenever genomes change.  Every island draws from its own random stream
derived from (master seed, replication, island), so a replication's
result does not depend on how replications are spread over workers.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from math import floor

import numpy as np

from .errors import ConfigError, NumericalError
from .stats import sample_cumulants_axis
from .theory import Topology, gaussian_background, is_migration_generation

# Algorithm-1 attempt budget per requested individual.
ACCEPT_BUDGET_PER_SLOT = 10_000


def paramagnet_fitness(genomes):
    """Energy of an ideal paramagnet in unit field, f = sum_i s_i.

    Works on a single genome or on the last axis of a stack of genomes.
    """
    return np.asarray(genomes).sum(axis=-1).astype(float)


def paramagnet_background(length, order=4):
    """Fitness cumulants of uniformly random genomes: mean 0, variance L."""
    return gaussian_background(0.0, float(length), order)


PROBLEMS = {"paramagnet": (paramagnet_fitness, paramagnet_background)}


def random_genomes(rng, n, length):
    return (2 * rng.integers(0, 2, size=(n, length), dtype=np.int8) - 1).astype(np.int8)


@dataclass
class RunConfig:
    n_islands: int = 4
    n_pop: int = 100
    n_gen: int = 200
    migration_period: int = 20
    r_mig: float = 0.2
    r_cross: float = 0.0
    r_mut: float = 0.0
    beta: float = 0.005
    topology: object = "ring"
    problem: str = "paramagnet"
    genome_length: int = 20
    seed: int = 0
    replications: int = 1
    order: int = 4
    snapshot_generations: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n_islands", "n_pop", "n_gen", "migration_period", "genome_length",
                     "replications", "order", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {v!r}")
        for name in ("r_mig", "r_cross", "r_mut"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0 <= v <= 1:
                raise ConfigError(name, f"must lie in [0, 1], got {v!r}")
        if not isinstance(self.beta, (int, float)) or not np.isfinite(self.beta):
            raise ConfigError("beta", f"must be a finite number, got {self.beta!r}")
        if self.n_pop < 2:
            raise ConfigError("n_pop", "population size must be >= 2")
        if self.migration_period < 1:
            raise ConfigError("migration_period", "must be >= 1")
        if self.n_islands < 1:
            raise ConfigError("n_islands", "need at least one island")
        if self.n_gen < 0:
            raise ConfigError("n_gen", "must be >= 0")
        if self.genome_length < 1:
            raise ConfigError("genome_length", "must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if not 2 <= self.order <= 6:
            raise ConfigError("order", "cumulant order must lie in 2..6")
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}")
        for g in self.snapshot_generations:
            if not isinstance(g, int) or not 0 <= g <= self.n_gen:
                raise ConfigError("snapshot_generations", f"generation {g!r} out of range")

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

    def fitness(self):
        return PROBLEMS[self.problem][0]

    def background(self):
        return PROBLEMS[self.problem][1](self.genome_length, self.order)


def resolve_topology(spec, n_islands):
    """Build a Topology from a name, a matrix, or a Topology instance."""
    if isinstance(spec, Topology):
        topo = spec
    elif isinstance(spec, str):
        builders = {"ring": Topology.ring, "isolated": Topology.isolated,
                    "complete": Topology.complete}
        if spec in builders:
            topo = builders[spec](n_islands)
        else:
            from .io import read_topology
            topo = read_topology(spec)
    else:
        topo = Topology(np.asarray(spec))
    if topo.n_islands != n_islands:
        raise ConfigError("topology", f"has {topo.n_islands} islands, config asks for {n_islands}")
    return topo


def island_streams(seed, replication, n_islands):
    """Independent generators keyed by (seed, replication, island)."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication, l)))
            for l in range(n_islands)]


@dataclass
class IslandState:
    id: int
    genomes: np.ndarray
    fitness: np.ndarray
    rng: np.random.Generator
    generation: int = 0

    @property
    def size(self):
        return self.genomes.shape[0]


def boltzmann_weights(fitness, beta):
    """Normalised exp(-beta f), shifted by the largest exponent."""
    logw = -beta * np.asarray(fitness, dtype=float)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def boltzmann_indices(fitness, beta, size, rng, replace=True):
    """Indices of ``size`` Boltzmann-selected individuals.

    Without replacement this is successive weighted sampling, done with
    Gumbel top-k keys in log space so tiny weights cannot underflow.
    """
    fitness = np.asarray(fitness, dtype=float)
    if replace:
        return rng.choice(fitness.size, size=size, p=boltzmann_weights(fitness, beta))
    if size > fitness.size:
        raise ValueError("cannot draw more individuals than the population holds")
    keys = -beta * fitness + rng.gumbel(size=fitness.size)
    return np.sort(np.argsort(-keys, kind="stable")[:size])


def boltzmann_select(island, beta):
    """One Boltzmann-selected individual index of ``island``."""
    return int(boltzmann_indices(island.fitness, beta, 1, island.rng)[0])


def step_generation(island, config, fitness_fn=paramagnet_fitness):
    """Selection, then optional uniform crossover of consecutive pairs, then
    per-gene mutation flips.  Returns a new IslandState."""
    rng = island.rng
    n = island.size
    idx = boltzmann_indices(island.fitness, config.beta, n, rng)
    genomes = island.genomes[idx].copy()
    if config.r_cross > 0:
        n_pairs = n // 2
        do = rng.random(n_pairs) < config.r_cross
        swap = rng.random((n_pairs, genomes.shape[1])) < 0.5
        for p in np.flatnonzero(do):
            a, b = 2 * p, 2 * p + 1
            m = swap[p]
            genomes[a, m], genomes[b, m] = genomes[b, m].copy(), genomes[a, m].copy()
    if config.r_mut > 0:
        flip = rng.random(genomes.shape) < config.r_mut
        genomes[flip] *= -1
    return IslandState(island.id, genomes, fitness_fn(genomes), rng, island.generation + 1)


def migrant_count(r_mig, n_pop, rng):
    """floor(r_mig N_P) plus a Bernoulli extra for the fractional part."""
    exact = r_mig * n_pop
    m = floor(exact)
    frac = exact - m
    if frac > 1e-12 and rng.random() < frac:
        m += 1
    return m


def migrate(islands, topology, r_mig, beta, fitness_fn=paramagnet_fitness):
    """Move Boltzmann-selected emigrants along the topology edges.

    Each island keeps N_P - m Boltzmann-selected residents.  Islands with
    out-edges pick m emigrants (again by selection, independently of the
    resident draw) and route each one to a destination drawn from its row
    of the normalised adjacency.  Receivers with a deficit are topped up
    with random genomes; a surplus is cut back by a uniform subset.
    """
    if r_mig == 0:
        return islands
    n_isl = len(islands)
    a_norm = topology.normalized
    out_deg = topology.out_degree()
    residents, incoming = [], [[] for _ in range(n_isl)]
    for l, isl in enumerate(islands):
        rng = isl.rng
        n_pop = isl.size
        m = migrant_count(r_mig, n_pop, rng)
        keep = boltzmann_indices(isl.fitness, beta, n_pop - m, rng, replace=False)
        residents.append(isl.genomes[keep])
        if out_deg[l] > 0 and m > 0:
            em = boltzmann_indices(isl.fitness, beta, m, rng, replace=False)
            dest = rng.choice(n_isl, size=m, p=a_norm[l])
            for d in range(n_isl):
                sel = em[dest == d]
                if sel.size:
                    incoming[d].append(isl.genomes[sel])
    out = []
    for l, isl in enumerate(islands):
        n_pop = isl.size
        pool = np.concatenate([residents[l]] + incoming[l], axis=0)
        if pool.shape[0] < n_pop:
            fill = random_genomes(isl.rng, n_pop - pool.shape[0], pool.shape[1])
            pool = np.concatenate([pool, fill], axis=0)
        elif pool.shape[0] > n_pop:
            pool = pool[np.sort(isl.rng.choice(pool.shape[0], n_pop, replace=False))]
        if pool.shape[0] != n_pop:
            raise NumericalError("population size changed during migration", island=l)
        out.append(IslandState(isl.id, pool, fitness_fn(pool), isl.rng, isl.generation))
    return out


def accept_reject_select(probabilities, n_select, rng, batch=None):
    """Algorithm-1 selection: draw uniform candidates, accept each copy with
    probability p, until ``n_select`` are accepted.  Returns indices.

    Raises NumericalError once ``n_select * 10**4`` draws are exhausted.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a non-empty probability vector")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("acceptance probabilities must lie in [0, 1]")
    budget = n_select * ACCEPT_BUDGET_PER_SLOT
    batch = batch or max(2 * n_select, 64)
    chosen = []
    used = 0
    while len(chosen) < n_select:
        if used >= budget:
            raise NumericalError(f"accept-reject selection exhausted {budget} draws")
        k = min(batch, budget - used)
        cand = rng.integers(0, p.size, size=k)
        u = rng.random(k)
        used += k
        chosen.extend(cand[u < p[cand]][: n_select - len(chosen)].tolist())
    return np.asarray(chosen, dtype=np.int64)


@dataclass
class EmpiricalTrajectory:
    """Replication-averaged sample cumulants.

    ``mean[n, l, :]`` is recorded after migration on migration generations;
    ``pre_mean`` holds the values just before migration.  Standard errors
    are over replications (NaN for a single replication).
    """

    mean: np.ndarray
    stderr: np.ndarray
    pre_mean: np.ndarray
    pre_stderr: np.ndarray
    migrated: np.ndarray
    replications: int
    snapshots: dict = field(default_factory=dict)

    @property
    def cumulants(self):
        return self.mean


def run_replication(config, topology, replication):
    """One MPGA execution; returns (post, pre, snapshots)."""
    fit = config.fitness()
    rngs = island_streams(config.seed, replication, config.n_islands)
    islands = []
    for l, rng in enumerate(rngs):
        g = random_genomes(rng, config.n_pop, config.genome_length)
        islands.append(IslandState(l, g, fit(g), rng))
    shape = (config.n_gen + 1, config.n_islands, config.order)
    post, pre = np.empty(shape), np.empty(shape)
    wanted = set(config.snapshot_generations)
    snaps = {}

    def stats():
        return sample_cumulants_axis(np.stack([isl.fitness for isl in islands]), config.order)

    for n in range(config.n_gen + 1):
        pre[n] = stats()
        if is_migration_generation(n, config.migration_period) and config.r_mig > 0:
            islands = migrate(islands, topology, config.r_mig, config.beta, fit)
            post[n] = stats()
        else:
            post[n] = pre[n]
        if n in wanted:
            snaps[n] = [isl.genomes.copy() for isl in islands]
        if n == config.n_gen:
            break
        islands = [step_generation(isl, config, fit) for isl in islands]
    return post, pre, snaps


def _run_chunk(config_dict, adjacency, reps, snapshot_rep):
    config = RunConfig.from_dict(config_dict)
    topo = Topology(adjacency)
    out = []
    for r in reps:
        post, pre, snaps = run_replication(config, topo, r)
        out.append((post, pre, snaps if r == snapshot_rep else {}))
    return out


def _chunks(n, workers):
    size = max(1, -(-n // (workers * 4)))
    return [list(range(i, min(n, i + size))) for i in range(0, n, size)]


def run_experiment(config, workers=1, snapshot_replication=0):
    """Run every replication and reduce in replication order.

    The reduction order is fixed, so the output is bit-identical for any
    ``workers`` value.
    """
    topology = resolve_topology(config.topology, config.n_islands)
    cfg = config.to_dict()
    cfg["topology"] = topology.adjacency.tolist()
    chunks = _chunks(config.replications, workers)
    if workers <= 1:
        results = [_run_chunk(cfg, topology.adjacency, c, snapshot_replication) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_chunk, cfg, topology.adjacency, c, snapshot_replication)
                    for c in chunks]
            results = [f.result() for f in futs]
    flat = [item for chunk in results for item in chunk]
    post = np.stack([p for p, _, _ in flat])
    pre = np.stack([q for _, q, _ in flat])
    snaps = {}
    for _, _, s in flat:
        snaps.update(s)
    r = config.replications

    def se(x):
        if r < 2:
            return np.full(x.shape[1:], np.nan)
        return x.std(axis=0, ddof=1) / np.sqrt(r)

    migrated = np.array([is_migration_generation(n, config.migration_period)
                         for n in range(config.n_gen + 1)])
    return EmpiricalTrajectory(mean=post.mean(axis=0), stderr=se(post), pre_mean=pre.mean(axis=0),
                               pre_stderr=se(pre), migrated=migrated, replications=r,
                               snapshots=snaps)
