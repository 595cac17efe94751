"""Analytic propagation of island cumulants: Boltzmann selection in a finite
population and topology-constrained migration mixing."""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import ConfigError, NumericalError
from .stats import (
    TruncatedSeries,
    check_cumulants,
    cumulants_from_moments,
    moments_from_cumulants,
)


def normalize_adjacency(adjacency):
    """Row-normalise a 0/1 adjacency matrix; empty rows stay zero.

    ``A[i, j] = 1`` is an edge i -> j.  Self-loops are kept only if present.
    """
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError("topology", f"adjacency must be square, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ConfigError("topology", "adjacency entries must be 0 or 1")
    rows = a.sum(axis=1, keepdims=True)
    return np.divide(a, rows, out=np.zeros_like(a), where=rows > 0)


@dataclass(frozen=True)
class Topology:
    adjacency: np.ndarray
    normalized: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        object.__setattr__(self, "normalized", normalize_adjacency(a))
        object.__setattr__(self, "adjacency", a.astype(np.int8))

    @property
    def n_islands(self):
        return self.adjacency.shape[0]

    def out_degree(self):
        return self.adjacency.sum(axis=1)

    def in_degree(self):
        return self.adjacency.sum(axis=0)

    @classmethod
    def ring(cls, n):
        """Directed ring i -> i+1 (mod n)."""
        a = np.zeros((n, n), dtype=int)
        if n > 1:
            a[np.arange(n), (np.arange(n) + 1) % n] = 1
        return cls(a)

    @classmethod
    def isolated(cls, n):
        return cls(np.zeros((n, n), dtype=int))

    @classmethod
    def complete(cls, n):
        return cls(np.ones((n, n), dtype=int) - np.eye(n, dtype=int))


@dataclass(frozen=True)
class MigrationRates:
    """Per-island mixing weights of a migration event.

    inflow[l] = r_mig * sum_j Ã[j, l]; stay = 1 - r_mig;
    fill[l] = r_mig - inflow[l], weighted only where it is > 0.
    """

    r_mig: float
    inflow: np.ndarray
    stay: float
    fill: np.ndarray

    @property
    def fill_weight(self):
        # step function at 0 is 0: no fill, no weight
        return np.where(self.fill > 0, self.fill, 0.0)

    @property
    def denominator(self):
        return self.stay + self.inflow + self.fill_weight


def migration_rates(topology, r_mig):
    if not 0 <= r_mig <= 1:
        raise ConfigError("r_mig", f"must lie in [0, 1], got {r_mig}")
    inflow = r_mig * topology.normalized.sum(axis=0)
    rates = MigrationRates(r_mig=float(r_mig), inflow=inflow, stay=1.0 - r_mig,
                           fill=r_mig - inflow)
    if np.any(rates.denominator <= 0):
        raise NumericalError("migration denominator is not positive")
    return rates


def gaussian_background(mean, variance, order=4):
    bg = np.zeros(order)
    bg[0], bg[1] = mean, variance
    return bg


def selection_update_boltzmann(kappa, beta, n_pop):
    """One generation of Boltzmann selection (weight exp(-beta f)) in a
    population of ``n_pop`` individuals.

    k_i' = d^i/du^i [ K(u) - exp(K(2u) - 2K(u)) / (2 n_pop) ] at u = -beta,
    where K is the cumulant generating function truncated at the order of
    ``kappa`` (higher cumulants are taken as zero).
    """
    kappa = check_cumulants(kappa)
    if n_pop < 2:
        raise ConfigError("n_pop", "population size must be >= 2")
    order = kappa.size
    m = order + 2
    cgf = [0.0] + [kappa[j - 1] / factorial(j) for j in range(1, order + 1)]
    excess = [0.0] + [(2**j - 2) * kappa[j - 1] / factorial(j) for j in range(1, order + 1)]
    k_series = TruncatedSeries.polynomial(cgf, -beta, m)
    g_series = TruncatedSeries.polynomial(excess, -beta, m)
    with np.errstate(over="ignore", invalid="ignore"):
        total = k_series - g_series.exp() * (1.0 / (2 * n_pop))
        out = np.array([total.derivative_at_center(i) for i in range(1, order + 1)])
    if not np.all(np.isfinite(out)):
        raise NumericalError("selection update overflowed; beta is too large for these cumulants")
    if out[1] < 0:
        raise NumericalError(
            f"selection produced negative variance k2={out[1]:.6g}; "
            "selection is too strong for the cumulant truncation"
        )
    return out


def migration_update(kappas, topology, r_mig, background):
    """Cumulants of each island after a migration event.

    Island l becomes the mixture of its stayers (weight 1 - r_mig), the
    migrants from every j (weight r_mig * Ã[j, l]) and random fills
    (weight n_r when positive), normalised by the sum of weights.  Raw
    moments of a mixture are the weighted moments of the components, so the
    result is exact for the given component cumulants.
    """
    kappas = np.asarray(kappas, dtype=float)
    if kappas.ndim != 2 or kappas.shape[0] != topology.n_islands:
        raise ValueError("need one cumulant vector per island")
    background = np.asarray(background, dtype=float)
    if background.size < kappas.shape[1]:
        background = np.concatenate([background, np.zeros(kappas.shape[1] - background.size)])
    background = check_cumulants(background[: kappas.shape[1]])
    rates = migration_rates(topology, r_mig)
    moments = np.array([moments_from_cumulants(k) for k in kappas])
    bg_moments = moments_from_cumulants(background)
    mixed = (
        rates.stay * moments
        + r_mig * topology.normalized.T @ moments
        + rates.fill_weight[:, None] * bg_moments[None, :]
    ) / rates.denominator[:, None]
    out = np.empty_like(kappas)
    for l in range(kappas.shape[0]):
        try:
            out[l] = cumulants_from_moments(mixed[l])
        except NumericalError as exc:
            raise NumericalError(exc.detail, island=l) from None
    return out


@dataclass
class TheoryTrajectory:
    """cumulants[n, l, :] is island l at generation n (after migration when
    generation n is a migration event); pre_migration holds the values before
    migration and equals cumulants elsewhere."""

    cumulants: np.ndarray
    pre_migration: np.ndarray
    migrated: np.ndarray

    @property
    def n_generations(self):
        return self.cumulants.shape[0] - 1

    @property
    def n_islands(self):
        return self.cumulants.shape[1]

    @property
    def order(self):
        return self.cumulants.shape[2]


def is_migration_generation(n, period):
    return n > 0 and n % period == 0


def predict_trajectory(initial, topology, beta, n_pop, n_gen, migration_period,
                       r_mig, background):
    """Alternate migration and selection for ``n_gen`` generations.

    At generation n > 0 with n divisible by ``migration_period`` the islands
    first mix; selection then takes generation n to n + 1.
    """
    if migration_period < 1:
        raise ConfigError("migration_period", "must be >= 1")
    initial = np.asarray(initial, dtype=float)
    if initial.ndim == 1:
        initial = np.tile(initial, (topology.n_islands, 1))
    cur = np.array([check_cumulants(k) for k in initial])
    shape = (n_gen + 1,) + cur.shape
    post = np.empty(shape)
    pre = np.empty(shape)
    flags = np.zeros(n_gen + 1, dtype=bool)
    for n in range(n_gen + 1):
        pre[n] = cur
        if is_migration_generation(n, migration_period):
            flags[n] = True
            if r_mig > 0:
                try:
                    cur = migration_update(cur, topology, r_mig, background)
                except NumericalError as exc:
                    raise NumericalError(exc.detail, generation=n, island=exc.island) from None
        post[n] = cur
        if n == n_gen:
            break
        nxt = np.empty_like(cur)
        for l in range(cur.shape[0]):
            try:
                nxt[l] = selection_update_boltzmann(cur[l], beta, n_pop)
            except NumericalError as exc:
                raise NumericalError(exc.detail, generation=n + 1, island=l) from None
        cur = nxt
    return TheoryTrajectory(cumulants=post, pre_migration=pre, migrated=flags)
