"""Kullback-Leibler divergences between Gram-Charlier island distributions
and the weighted directed dissimilarity graph built from them.

The correction to the Gaussian divergence is second order in the Hermite
coefficients a_3, a_4 of both islands.  Gaussian expectations of Hermite
polynomials of the shifted, rescaled variable y = (x - q1~)/sqrt(q2~) are
evaluated with :func:`mpga.stats.scaled_hermite`, which is polynomial in
mu = 1 - 1/q2~ and b = -q1~/sqrt(q2~) and therefore regular at q2~ = 1.
"""

from dataclasses import dataclass, field
from math import comb, factorial, log, pi, e, sqrt
from typing import NamedTuple

import numpy as np

from .errors import NumericalError
from .stats import check_cumulants, scaled_hermite


def _as_order4(kappa):
    k = check_cumulants(kappa)
    if k.size < 4:
        k = np.concatenate([k, np.zeros(4 - k.size)])
    if k[1] <= 0:
        raise NumericalError("divergence needs strictly positive variances")
    return k


def _a34(k):
    return {3: k[2] / (6.0 * k[1] ** 1.5), 4: k[3] / (24.0 * k[1] ** 2)}


def gaussian_kl(k1, k2, q1, q2):
    """KL(N(k1, k2) || N(q1, q2)) in closed form."""
    if k2 <= 0 or q2 <= 0:
        raise NumericalError("Gaussian divergence needs positive variances")
    return 0.5 * log(q2 / k2) + (k2 + (k1 - q1) ** 2) / (2.0 * q2) - 0.5


class EntropyTerms(NamedTuple):
    gaussian: float
    second_order: float
    third_order: float

    @property
    def total(self):
        """Entropy through second order (the value :func:`entropy_gc` returns)."""
        return self.gaussian + self.second_order


def entropy_terms(kappa):
    """Gaussian, second-order and third-order parts of the Gram-Charlier
    entropy with ln(1 + Psi) ~ Psi - Psi**2/2.

    The third-order part is what the truncated logarithm contributes at
    O(a**3); it is reported for inspection but not included in the total.
    """
    k = _as_order4(kappa)
    k2, k3, k4 = k[1], k[2], k[3]
    return EntropyTerms(
        gaussian=0.5 * log(2 * pi * e * k2),
        second_order=-(k3**2) / (12 * k2**3) - k4**2 / (48 * k2**4),
        third_order=k4**3 / (16 * k2**6) + 3 * k3**2 * k4 / (8 * k2**5),
    )


def entropy_gc(kappa):
    return entropy_terms(kappa).total


@dataclass(frozen=True)
class StandardizedPair:
    """Island q expressed in the standardised coordinate of island l."""

    q1: float  # (q_1 - k_1) / sqrt(k_2)
    q2: float  # q_2 / k_2

    @classmethod
    def from_cumulants(cls, k, q):
        return cls(q1=(q[0] - k[0]) / sqrt(k[1]), q2=q[1] / k[1])

    @property
    def mu(self):
        return 1.0 - 1.0 / self.q2

    @property
    def m_q(self):
        """-q1~/sqrt(q2~ - 1); only informative when q2~ > 1."""
        if self.q2 == 1.0:
            return float("inf") if self.q1 < 0 else float("-inf") if self.q1 > 0 else float("nan")
        if self.q2 < 1.0:
            return float("nan")
        return -self.q1 / sqrt(self.q2 - 1.0)

    @property
    def shift(self):
        """b = sqrt(mu) * m_q = -q1~/sqrt(q2~), finite for every q2~ > 0."""
        return -self.q1 / sqrt(self.q2)

    def expect_he(self, n):
        """E[He_n(y)] for x ~ N(0, 1), i.e. mu**(n/2) He_n(m_q)."""
        return scaled_hermite(n, self.mu, self.shift)

    def expect_he_product(self, i, j):
        """E[He_i(y) He_j(y)] via the Hermite linearisation formula."""
        return sum(
            factorial(k) * comb(i, k) * comb(j, k) * self.expect_he(i + j - 2 * k)
            for k in range(min(i, j) + 1)
        )

    def expect_mixed(self, i, j):
        """E[He_i(x) He_j(y)] = i! C(j, i) q2~**(-i/2) E[He_{j-i}(y)], zero for i > j."""
        if i > j:
            return 0.0
        return factorial(i) * comb(j, i) * self.q2 ** (-i / 2.0) * self.expect_he(j - i)


def kl_correction(kappa_l, kappa_q):
    """Second-order Gram-Charlier correction to the Gaussian divergence.

    KL - KL_gauss = 3 a3^2 + 12 a4^2                 (entropy of l)
                    - sum_j c_j E[He_j(y)]            (first order in q)
                    - sum_ij a_i c_j E[He_i(x) He_j(y)]
                    + 1/2 sum_ij c_i c_j E[He_i(y) He_j(y)]
    with a the coefficients of island l and c those of island q.
    """
    k = _as_order4(kappa_l)
    q = _as_order4(kappa_q)
    a, c = _a34(k), _a34(q)
    pair = StandardizedPair.from_cumulants(k, q)
    own = 3.0 * a[3] ** 2 + 12.0 * a[4] ** 2
    first = sum(c[j] * pair.expect_he(j) for j in (3, 4))
    mixed = sum(a[i] * c[j] * pair.expect_mixed(i, j) for i in (3, 4) for j in (3, 4))
    square = 0.5 * sum(c[i] * c[j] * pair.expect_he_product(i, j) for i in (3, 4) for j in (3, 4))
    return own - first - mixed + square


def kl_total(kappa_l, kappa_q):
    k = _as_order4(kappa_l)
    q = _as_order4(kappa_q)
    return gaussian_kl(k[0], k[1], q[0], q[1]) + kl_correction(k, q)


def histogram_kl(values_l, values_q, bins=30, pseudocount=0.5):
    """Plug-in KL estimate from two samples on shared histogram bins.

    A cross-check estimator only; the graph uses the cumulant path.
    """
    values_l = np.asarray(values_l, dtype=float)
    values_q = np.asarray(values_q, dtype=float)
    lo = min(values_l.min(), values_q.min())
    hi = max(values_l.max(), values_q.max())
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    p = np.histogram(values_l, edges)[0] + pseudocount
    r = np.histogram(values_q, edges)[0] + pseudocount
    p = p / p.sum()
    r = r / r.sum()
    return float(np.sum(p * np.log(p / r)))


@dataclass
class KLGraph:
    """Dense divergence matrix W[l, q] = KL(p_l || p_q) at one generation.

    ``undefined`` marks islands whose variance is not positive; their rows
    and columns are NaN.  ``mask`` carries the topology edges for rendering.
    """

    weights: np.ndarray
    gaussian_weights: np.ndarray
    mask: np.ndarray
    generation: int
    source: str
    undefined: np.ndarray = field(default=None)

    @property
    def n_islands(self):
        return self.weights.shape[0]

    @property
    def has_negative(self):
        off = ~np.eye(self.n_islands, dtype=bool)
        w = self.weights[off]
        return bool(np.any(w[np.isfinite(w)] < 0))


def build_kl_graph(kappas, topology=None, generation=0, source="theoretical"):
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.shape[0]
    bad = ~(np.isfinite(kappas).all(axis=1) & (kappas[:, 1] > 0))
    w = np.full((n, n), np.nan)
    wg = np.full((n, n), np.nan)
    for l in range(n):
        if bad[l]:
            continue
        for q in range(n):
            if bad[q]:
                continue
            if l == q:
                w[l, q] = wg[l, q] = 0.0
                continue
            k, r = kappas[l], kappas[q]
            wg[l, q] = gaussian_kl(k[0], k[1], r[0], r[1])
            w[l, q] = wg[l, q] + kl_correction(k, r)
    if topology is None:
        mask = np.zeros((n, n), dtype=bool)
    else:
        mask = np.asarray(topology.adjacency if hasattr(topology, "adjacency") else topology) != 0
    return KLGraph(weights=w, gaussian_weights=wg, mask=mask, generation=int(generation),
                   source=source, undefined=bad)


def _fmt(x):
    return "nan" if not np.isfinite(x) else f"{x:.9g}"


def graph_to_dot(graph, gaussian=False):
    w = graph.gaussian_weights if gaussian else graph.weights
    kind = "gaussian" if gaussian else "corrected"
    lines = [
        f"digraph kl_generation_{graph.generation} {{",
        f'  graph [source="{graph.source}", generation={graph.generation}, divergence="{kind}"];',
    ]
    for l in range(graph.n_islands):
        lines.append(f'  {l} [label="{l}"{", undefined=true" if graph.undefined[l] else ""}];')
    for l in range(graph.n_islands):
        for q in range(graph.n_islands):
            if l == q:
                continue
            style = "solid" if graph.mask[l, q] else "dashed"
            lines.append(f"  {l} -> {q} [weight={_fmt(w[l, q])}, style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_csv(graph, gaussian=False):
    w = graph.gaussian_weights if gaussian else graph.weights
    rows = ["# mpga-klgraph v1", "src,dst,weight,generation,source"]
    for l in range(graph.n_islands):
        for q in range(graph.n_islands):
            if l != q:
                rows.append(f"{l},{q},{_fmt(w[l, q])},{graph.generation},{graph.source}")
    return "\n".join(rows) + "\n"
