"""Periodic L x L Ising lattices (J = 1, zero field), single-spin-flip
Metropolis sweeps and spin-configuration crossover."""

import numba
import numpy as np


def ising_energy(spins):
    """E = -sum over the 2 L^2 periodic nearest-neighbour bonds.

    Accepts one lattice or a stack with the lattice in the last two axes.
    """
    s = np.asarray(spins, dtype=np.int64)
    right = s * np.roll(s, -1, axis=-1)
    down = s * np.roll(s, -1, axis=-2)
    return -(right.sum(axis=(-1, -2)) + down.sum(axis=(-1, -2)))


def magnetization(spins):
    return np.asarray(spins, dtype=np.int64).sum(axis=(-1, -2))


@numba.njit(cache=True)
def _metropolis(spins, energy, mag, sites, uniforms, acc4, acc8):
    # spins (n, L, L) int8; sites/uniforms (n, steps); ΔE only takes 0, ±4, ±8
    n, L, _ = spins.shape
    steps = sites.shape[1]
    accepted = 0
    for a in range(n):
        for t in range(steps):
            k = sites[a, t]
            i = k // L
            j = k - i * L
            s = spins[a, i, j]
            nb = (spins[a, (i + 1) % L, j] + spins[a, (i - 1) % L, j]
                  + spins[a, i, (j + 1) % L] + spins[a, i, (j - 1) % L])
            d = 2 * s * nb
            ok = d <= 0
            if not ok:
                if d == 4:
                    ok = uniforms[a, t] < acc4
                else:
                    ok = uniforms[a, t] < acc8
            if ok:
                spins[a, i, j] = -s
                energy[a] += d
                mag[a] -= 2 * s
                accepted += 1
    return accepted


@numba.njit(cache=True)
def _metropolis_record(spins, energy, mag, sites, uniforms, acc4, acc8, out_e, out_m):
    n, L, _ = spins.shape
    N = L * L
    for a in range(n):
        for t in range(sites.shape[1]):
            k = sites[a, t]
            i = k // L
            j = k - i * L
            s = spins[a, i, j]
            nb = (spins[a, (i + 1) % L, j] + spins[a, (i - 1) % L, j]
                  + spins[a, i, (j + 1) % L] + spins[a, i, (j - 1) % L])
            d = 2 * s * nb
            ok = d <= 0
            if not ok:
                if d == 4:
                    ok = uniforms[a, t] < acc4
                else:
                    ok = uniforms[a, t] < acc8
            if ok:
                spins[a, i, j] = -s
                energy[a] += d
                mag[a] -= 2 * s
            if t % N == N - 1:
                out_e[t // N, a] = energy[a]
                out_m[t // N, a] = mag[a]


def acceptance_table(T):
    """Metropolis acceptance for the two uphill moves, e^{-4/T} and e^{-8/T}."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return np.exp(-4.0 / T), np.exp(-8.0 / T)


def sweep_batch(spins, energy, mag, T, rng, n_sweeps=1):
    """Run ``n_sweeps`` sweeps of L^2 attempts on every lattice in place.

    Random sites and uniforms are drawn from ``rng`` up front, so the result
    depends only on the generator state.  Returns the accepted-flip count.
    """
    n, L, _ = spins.shape
    steps = n_sweeps * L * L
    sites = rng.integers(0, L * L, size=(n, steps))
    uniforms = rng.random((n, steps))
    acc4, acc8 = acceptance_table(T)
    return _metropolis(spins, energy, mag, sites, uniforms, acc4, acc8)


def sweep_record(spins, energy, mag, T, rng, n_sweeps):
    """Like :func:`sweep_batch` but returns (E, M) after every sweep as
    arrays of shape (n_sweeps, n_lattices)."""
    n, L, _ = spins.shape
    steps = n_sweeps * L * L
    sites = rng.integers(0, L * L, size=(n, steps))
    uniforms = rng.random((n, steps))
    acc4, acc8 = acceptance_table(T)
    out_e = np.empty((n_sweeps, n), dtype=np.int64)
    out_m = np.empty((n_sweeps, n), dtype=np.int64)
    _metropolis_record(spins, energy, mag, sites, uniforms, acc4, acc8, out_e, out_m)
    return out_e, out_m


class SpinLattice:
    """One configuration with cached energy and magnetisation."""

    __slots__ = ("spins", "energy", "magnetization")

    def __init__(self, spins):
        s = np.asarray(spins)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("lattice must be square")
        if not np.all(np.abs(s) == 1):
            raise ValueError("spins must be +-1")
        self.spins = s.astype(np.int8).copy()
        self.energy = int(ising_energy(self.spins))
        self.magnetization = int(self.spins.sum())

    @property
    def L(self):
        return self.spins.shape[0]

    @classmethod
    def random(cls, L, rng):
        return cls(2 * rng.integers(0, 2, size=(L, L)) - 1)

    @classmethod
    def uniform(cls, L, value=1):
        return cls(np.full((L, L), value))

    def copy(self):
        return SpinLattice(self.spins)

    def is_consistent(self):
        return (self.energy == int(ising_energy(self.spins))
                and self.magnetization == int(self.spins.sum()))


def mh_sweep(lattice, T, rng, n_sweeps=1):
    """Metropolis sweeps on one SpinLattice; caches are updated in place."""
    s = lattice.spins[None]
    e = np.array([lattice.energy], dtype=np.int64)
    m = np.array([lattice.magnetization], dtype=np.int64)
    sweep_batch(s, e, m, T, rng, n_sweeps)
    lattice.spins = s[0]
    lattice.energy = int(e[0])
    lattice.magnetization = int(m[0])
    return lattice


def crossover_spins(a, b, rng, mode="patch"):
    """Child spins: a with a region copied from b.

    ``patch`` copies a periodic rectangle whose width and height are each
    uniform on 1..L and whose corner is uniform; ``uniform`` takes every
    site from b with probability 1/2.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("parents must have the same shape")
    child = a.copy()
    if mode == "uniform":
        take = rng.random(a.shape) < 0.5
        child[take] = b[take]
        return child
    if mode != "patch":
        raise ValueError(f"unknown crossover mode {mode!r}")
    L0, L1 = a.shape
    h = rng.integers(1, L0 + 1)
    w = rng.integers(1, L1 + 1)
    i0 = rng.integers(L0)
    j0 = rng.integers(L1)
    rows = (i0 + np.arange(h)) % L0
    cols = (j0 + np.arange(w)) % L1
    child[np.ix_(rows, cols)] = b[np.ix_(rows, cols)]
    return child


def spin_crossover(a, b, rng, mode="patch"):
    if a.L != b.L:
        raise ValueError("lattices have different sizes")
    return SpinLattice(crossover_spins(a.spins, b.spins, rng, mode))
