"""Thermodynamic estimators from recorded energy and magnetisation samples.

Samples are arrays of shape (n_sweeps, n_chains): one row per recorded
generation, one column per individual (all islands concatenated).
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_BLOCKS = 20


@dataclass(frozen=True)
class Observables:
    energy: float  # <E> per spin, averaged over generations and individuals
    specific_heat: float
    magnetization: float  # |time-averaged m| per individual, then averaged
    abs_magnetization: float  # per-sample <|m|>
    susceptibility: float
    energy_se: float
    specific_heat_se: float
    magnetization_se: float
    abs_magnetization_se: float
    susceptibility_se: float
    n_samples: int


def _estimates(E, M, L, T):
    n = L * L
    m_abs = np.abs(M) / n
    return np.array([
        E.mean() / n,
        E.var() / (n * T * T),
        np.mean(np.abs(M.mean(axis=0))) / n,
        m_abs.mean(),
        n * m_abs.var() / T,
    ])


def observables(E, M, L, T, blocks=DEFAULT_BLOCKS):
    """Energy per spin, specific heat, magnetisation and susceptibility.

    C_H = (<E^2> - <E>^2) / (L^2 T^2) and chi = L^2 (<m^2> - <m>^2) / T with
    m = |M| / L^2 per sample, moments taken over every recorded sample.
    Standard errors are delete-one-block jackknife over the time axis.
    """
    E = np.asarray(E, dtype=float)
    M = np.asarray(M, dtype=float)
    if E.ndim == 1:
        E, M = E[:, None], M[:, None]
    if E.shape != M.shape:
        raise ValueError("energy and magnetisation samples differ in shape")
    if E.size < 2:
        raise ValueError("need at least two samples")
    full = _estimates(E, M, L, T)
    nb = min(blocks, E.shape[0])
    if nb >= 2:
        edges = np.linspace(0, E.shape[0], nb + 1).astype(int)
        jk = []
        for b in range(nb):
            keep = np.r_[0:edges[b], edges[b + 1]:E.shape[0]]
            jk.append(_estimates(E[keep], M[keep], L, T))
        jk = np.array(jk)
        se = np.sqrt((nb - 1) / nb * ((jk - jk.mean(axis=0)) ** 2).sum(axis=0))
    else:
        se = np.full(full.size, np.nan)
    return Observables(*full, *se, n_samples=int(E.size))
