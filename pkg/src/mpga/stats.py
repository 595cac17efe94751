"""Numerical primitives: Hermite polynomials, cumulant/moment conversion,
sample cumulants, Gram-Charlier densities and truncated power series.

Cumulant and moment vectors are plain 1-D float arrays ordered from order 1
upward, ``kappa[0]`` being the mean and ``kappa[1]`` the variance.
"""

from math import comb, factorial, pi, sqrt

import numpy as np

from .errors import NumericalError

# Relative size below which a negative variance is treated as round-off.
_VARIANCE_ROUNDOFF = 1e-12


def hermite(n, x):
    """Probabilists' Hermite polynomial He_n evaluated at ``x``.

    Uses the three-term recurrence He_{n+1} = x He_n - n He_{n-1}; works
    elementwise on arrays.
    """
    if n < 0:
        raise ValueError("Hermite order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def scaled_hermite(n, t, b):
    """Return t**(n/2) * He_n(b / sqrt(t)) as a polynomial in (t, b).

    The product form stays real and finite for any sign of ``t`` and is
    continuous through t = 0, which is why Gaussian expectations of Hermite
    polynomials are evaluated with it instead of He_n alone.  Recurrence:
    G_{n+1} = b G_n - n t G_{n-1}.
    """
    if n < 0:
        raise ValueError("Hermite order must be >= 0")
    prev, cur = 1.0, b
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, b * cur - k * t * prev
    return cur


def check_cumulants(kappa):
    """Validate and return ``kappa`` as a float array (order >= 2, k2 >= 0)."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim != 1 or kappa.size < 2:
        raise ValueError("a cumulant vector needs at least two entries")
    if not np.all(np.isfinite(kappa)):
        raise NumericalError("non-finite cumulant")
    if kappa[1] < 0:
        raise NumericalError(f"negative variance k2={kappa[1]:.6g}")
    return kappa


def moments_from_cumulants(kappa):
    """Raw moments mu_1..mu_K from cumulants k_1..k_K.

    mu_n = sum_{k=0}^{n-1} C(n-1, k) k_{k+1} mu_{n-1-k}, with mu_0 = 1.
    """
    kappa = np.asarray(kappa, dtype=float)
    order = kappa.size
    mu = np.zeros(order + 1)
    mu[0] = 1.0
    for n in range(1, order + 1):
        mu[n] = sum(comb(n - 1, k) * kappa[k] * mu[n - 1 - k] for k in range(n))
    return mu[1:]


def cumulants_from_moments(mu):
    """Inverse of :func:`moments_from_cumulants`.

    Raises NumericalError if the implied variance is negative beyond
    round-off; a round-off-level negative variance is returned as 0.
    """
    mu = np.asarray(mu, dtype=float)
    order = mu.size
    m = np.concatenate(([1.0], mu))
    kappa = np.zeros(order + 1)
    for n in range(1, order + 1):
        kappa[n] = m[n] - sum(
            comb(n - 1, k - 1) * kappa[k] * m[n - k] for k in range(1, n)
        )
    kappa = kappa[1:]
    if order >= 2 and kappa[1] < 0:
        if kappa[1] >= -_VARIANCE_ROUNDOFF * max(1.0, abs(m[2])):
            kappa[1] = 0.0
        else:
            raise NumericalError(f"implied variance k2={kappa[1]:.6g} is negative")
    return kappa


def sample_cumulants(values, order=4):
    """Plain (biased, divide-by-n) sample cumulants up to ``order``.

    Raw moments of the centred sample are converted with
    :func:`cumulants_from_moments` and the mean is added back; centring keeps
    the variance nonnegative for degenerate samples.  Not k-statistics: the
    bias is O(1/n) and is dominated by replication noise in our use.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("sample cumulants need at least 2 values")
    if order < 2:
        raise ValueError("order must be >= 2")
    mean = x.mean()
    d = x - mean
    mu = np.array([np.mean(d**j) for j in range(1, order + 1)])
    mu[0] = 0.0
    kappa = cumulants_from_moments(mu)
    kappa[0] = mean
    return kappa


def sample_cumulants_axis(values, order=4):
    """Vectorised :func:`sample_cumulants` over the last axis of an array."""
    x = np.asarray(values, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("sample cumulants need at least 2 values")
    mean = x.mean(axis=-1)
    d = x - mean[..., None]
    c = [np.zeros_like(mean), np.mean(d**2, axis=-1)]
    for j in range(3, order + 1):
        c.append(np.mean(d**j, axis=-1))
    m = [np.ones_like(mean)] + c
    kappa = [None] * (order + 1)
    for n in range(1, order + 1):
        kappa[n] = m[n] - sum(
            comb(n - 1, k - 1) * kappa[k] * m[n - k] for k in range(1, n)
        )
    kappa[1] = mean
    return np.stack(kappa[1:], axis=-1)


def gram_charlier_coefficients(kappa):
    """Hermite coefficients a_i = k_i / (i! k2^{i/2}) for i = 3..K."""
    kappa = check_cumulants(kappa)
    if kappa[1] <= 0:
        raise NumericalError("Gram-Charlier expansion needs k2 > 0")
    return {
        i: kappa[i - 1] / (factorial(i) * kappa[1] ** (i / 2))
        for i in range(3, kappa.size + 1)
    }


def gram_charlier_pdf(kappa, f):
    """Gram-Charlier density (1 + Psi(x)) N(x) / sqrt(k2), x = (f - k1)/sqrt(k2).

    Returned as computed, including negative values where the truncated
    expansion is not a proper density; see :func:`gram_charlier_is_valid`.
    """
    kappa = check_cumulants(kappa)
    coeffs = gram_charlier_coefficients(kappa)
    sd = sqrt(kappa[1])
    x = (np.asarray(f, dtype=float) - kappa[0]) / sd
    psi = np.zeros_like(x)
    for i, a in coeffs.items():
        psi = psi + a * hermite(i, x)
    out = (1.0 + psi) * np.exp(-0.5 * x * x) / sqrt(2 * pi) / sd
    return out if out.ndim else float(out)


def gram_charlier_is_valid(kappa, width=6.0, points=2001):
    """True when the density is nonnegative on a +-``width`` sigma grid."""
    kappa = check_cumulants(kappa)
    sd = sqrt(kappa[1])
    f = kappa[0] + sd * np.linspace(-width, width, points)
    return bool(np.all(gram_charlier_pdf(kappa, f) >= 0))


class TruncatedSeries:
    """Taylor polynomial about ``center`` truncated at ``order``.

    Coefficient c_k multiplies (u - center)**k.  Products and the exponential
    are exact through ``order``; higher terms are dropped.
    """

    __slots__ = ("center", "coefficients")

    def __init__(self, center, coefficients):
        self.center = float(center)
        self.coefficients = np.asarray(coefficients, dtype=float).copy()
        if self.coefficients.ndim != 1 or self.coefficients.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")

    @classmethod
    def constant(cls, value, center, order):
        c = np.zeros(order + 1)
        c[0] = value
        return cls(center, c)

    @classmethod
    def variable(cls, center, order):
        """The identity function u expanded about ``center``."""
        c = np.zeros(order + 1)
        c[0] = center
        if order >= 1:
            c[1] = 1.0
        return cls(center, c)

    @classmethod
    def polynomial(cls, coefficients, center, order):
        """Re-expand sum_j p_j u**j about ``center`` (Horner in series form)."""
        u = cls.variable(center, order)
        out = cls.constant(0.0, center, order)
        for p in reversed(list(coefficients)):
            out = out * u + p
        return out

    @property
    def order(self):
        return self.coefficients.size - 1

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.center != self.center or other.order != self.order:
                raise ValueError("series have different centres or orders")
            return other
        return TruncatedSeries.constant(float(other), self.center, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return TruncatedSeries(self.center, self.coefficients + other.coefficients)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.center, -self.coefficients)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.center, self.coefficients * float(other))
        other = self._coerce(other)
        a, b = self.coefficients, other.coefficients
        m = a.size
        c = np.zeros(m)
        for i in range(m):
            c[i:] += a[i] * b[: m - i]
        return TruncatedSeries(self.center, c)

    __rmul__ = __mul__

    def exp(self):
        # e = exp(s) solves e' = s' e, giving n e_n = sum_k k s_k e_{n-k}
        s = self.coefficients
        m = s.size
        e = np.zeros(m)
        e[0] = np.exp(s[0])
        for n in range(1, m):
            e[n] = sum(k * s[k] * e[n - k] for k in range(1, n + 1)) / n
        return TruncatedSeries(self.center, e)

    def derivative_at_center(self, i):
        """i-th derivative at the centre, i! * c_i."""
        if i < 0 or i > self.order:
            raise ValueError(f"derivative order {i} exceeds series order {self.order}")
        return factorial(i) * self.coefficients[i]

    def __repr__(self):
        return f"TruncatedSeries(center={self.center!r}, coefficients={self.coefficients!r})"
