"""Convolution quadrature (CQ) for Riemann-Liouville operators on a uniform grid.

The weights of J^alpha are the Maclaurin coefficients of
(gamma_p(z)/h)^(-alpha), where gamma_p is the generating function of the
order-p BDF method.  Negative alpha gives fractional derivatives.

The plain convolutions are exact discrete operators (semigroup, summation
by parts).  :func:`starting_quadrature` adds Lubich-type correction
weights which restore exactness on low-degree monomials at the price of
the convolution structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, DegeneracyError, DimensionError, InvalidOrderError
from .fracops import rgamma

MAX_BDF_ORDER = 6


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BdfGeneratingPolynomial:
    """gamma_p(z) = sum_{k=1..p} (1-z)^k / k, stored by powers of z."""

    order_p: int
    exact: tuple  # Fractions, coefficient of z^k
    coefficients: np.ndarray = field(repr=False)

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coefficients)


def bdf_generating_polynomial(p: int) -> BdfGeneratingPolynomial:
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_BDF_ORDER:
        raise InvalidOrderError(f"BDF order must be an integer in 1..{MAX_BDF_ORDER}, got {p!r}")
    p = int(p)
    coef = [Fraction(0)] * (p + 1)
    for k in range(1, p + 1):
        for j in range(k + 1):
            coef[j] += Fraction((-1) ** j * math.comb(k, j), k)
    return BdfGeneratingPolynomial(p, tuple(coef), _frozen([float(c) for c in coef]))


@dataclass(frozen=True)
class CqWeights:
    alpha: float
    bdf_order: int
    step_h: float
    weights: np.ndarray = field(repr=False)

    @property
    def length_N(self) -> int:
        return self.weights.shape[0] - 1

    def __len__(self):
        return self.weights.shape[0]


def series_power(a, exponent: float, n_terms: int) -> np.ndarray:
    """First ``n_terms`` coefficients of (sum_k a_k z^k)^exponent, a_0 > 0.

    J.C.P. Miller's recurrence: c_0 = a_0^e,
    c_n = 1/(n a_0) sum_{k=1..n} ((e+1)k - n) a_k c_{n-k}.
    O(len(a) * n_terms).
    """
    a = np.asarray(a, dtype=float)
    if not a[0] > 0:
        raise ConfigurationError("leading coefficient must be positive")
    m = a.shape[0] - 1
    c = np.zeros(n_terms)
    c[0] = a[0] ** exponent
    for n in range(1, n_terms):
        kmax = min(n, m)
        k = np.arange(1, kmax + 1)
        c[n] = np.dot(((exponent + 1.0) * k - n) * a[1 : kmax + 1], c[n - k]) / (n * a[0])
    return c


def cq_weights(alpha: float, p: int, h: float, N: int) -> CqWeights:
    """Weights omega_0..omega_N of the BDF-p convolution quadrature for J^alpha."""
    poly = bdf_generating_polynomial(p)
    if not h > 0:
        raise ConfigurationError(f"step h must be positive, got {h}")
    if N < 0:
        raise ConfigurationError(f"N must be >= 0, got {N}")
    if not poly.coefficients[0] > 0:
        raise ConfigurationError("gamma_p(0) must be positive")
    w = series_power(poly.coefficients / h, -float(alpha), int(N) + 1)
    if not np.all(np.isfinite(w)):
        raise ConfigurationError("non-finite CQ weights")
    return CqWeights(float(alpha), int(p), float(h), _frozen(w))


@dataclass(frozen=True)
class GridSeries:
    """Samples f_0..f_N on t_k = t0 + k h.  ``values`` may be (N+1,) or (N+1, d)."""

    values: np.ndarray
    step_h: float
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim == 0 or self.values.shape[0] < 1:
            raise DimensionError("a grid series needs at least one sample")

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.step_h * np.arange(self.N + 1)

    @classmethod
    def sample(cls, fn, h, N, start_time=0.0):
        t = start_time + h * np.arange(N + 1)
        return cls(np.asarray(fn(t), dtype=float), h, start_time)


def _as_values(f):
    if isinstance(f, GridSeries):
        return f.values, f.step_h, f.start_time
    return np.asarray(f, dtype=float), None, 0.0


def _lower_toeplitz_apply(w, f):
    # direct summation; np.convolve does not switch to FFT
    n = f.shape[0]
    if f.ndim == 1:
        return np.convolve(w[:n], f)[:n]
    return np.column_stack([np.convolve(w[:n], f[:, j])[:n] for j in range(f.shape[1])])


def _check(w: CqWeights, vals):
    if w.length_N < vals.shape[0] - 1:
        raise DimensionError(
            f"{len(w)} weights cannot act on a series of length {vals.shape[0]}"
        )


def conv_left(w: CqWeights, f) -> GridSeries:
    """(J_-^alpha f)_k = sum_{n=0..k} omega_n f_{k-n}."""
    vals, h, t0 = _as_values(f)
    _check(w, vals)
    return GridSeries(_lower_toeplitz_apply(w.weights, vals), h or w.step_h, t0)


def conv_right(w: CqWeights, f) -> GridSeries:
    """(J_+^alpha f)_k = sum_{n=0..N-k} omega_n f_{k+n}."""
    vals, h, t0 = _as_values(f)
    _check(w, vals)
    return GridSeries(_lower_toeplitz_apply(w.weights, vals[::-1])[::-1], h or w.step_h, t0)


@dataclass(frozen=True)
class StartingQuadrature:
    """Correction weights varpi[k, n], k = 0..N, n = 0..s.

    Stored h-independent: the correction term is h**alpha * varpi[k] @ f[:s+1].
    ``singular_rows`` lists rows whose exact targets are infinite (t = 0
    with a negative total exponent); those rows are zero.
    """

    alpha: float
    bdf_order: int
    correction_degree_s: int
    step_h: float
    weights: np.ndarray = field(repr=False)
    condition: float = 1.0
    singular_rows: tuple = ()

    def correction(self, f_start, k):
        """h**alpha * sum_n varpi[k, n] f_n for the first s+1 samples."""
        return self.step_h**self.alpha * np.tensordot(self.weights[k], f_start, axes=1)


def _monomial_matrix(nodes, s):
    # V[q, n] = n**q with 0**0 = 1
    return np.array([[1.0 if q == 0 else float(n) ** q for n in nodes] for q in range(s + 1)])


def starting_quadrature(alpha: float, p: int, h: float, N: int, s: int) -> StartingQuadrature:
    """Correction weights making the corrected CQ exact on t**q, q = 0..s.

    Row k solves sum_n varpi[k,n] n**q = G(q+1)/G(q+1+alpha) k**(q+alpha)
    - sum_j omegahat_j (k-j)**q, the exactness system rescaled by h.
    """
    if not isinstance(s, (int, np.integer)) or s < 0:
        raise ConfigurationError(f"correction degree must be a nonnegative integer, got {s}")
    if s > MAX_BDF_ORDER:
        raise ConfigurationError(f"correction degree must be <= {MAX_BDF_ORDER}, got {s}")
    if N < s:
        raise ConfigurationError(f"need N >= s (N={N}, s={s})")
    w = cq_weights(alpha, p, 1.0, N).weights
    V = _monomial_matrix(range(s + 1), s)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > 1e14:
        raise DegeneracyError("Vandermonde system is numerically singular", cond)

    k = np.arange(N + 1, dtype=float)
    rhs = np.zeros((s + 1, N + 1))
    singular = []
    for q in range(s + 1):
        powers = np.ones(N + 1) if q == 0 else k**q
        plain = _lower_toeplitz_apply(w, powers)
        expo = q + alpha
        coef = math.gamma(q + 1) * rgamma(q + 1 + alpha)
        with np.errstate(divide="ignore"):
            exact = coef * np.power(k, expo) if coef != 0 else np.zeros(N + 1)
        if expo == 0 and coef != 0:
            exact[0] = coef
        rhs[q] = exact - plain
    if not np.all(np.isfinite(rhs[:, 0])):
        singular.append(0)
        rhs[:, 0] = 0.0
    varpi = np.linalg.solve(V, rhs).T
    return StartingQuadrature(
        float(alpha), int(p), int(s), float(h), _frozen(varpi), cond, tuple(singular)
    )


def corrected_conv_left(w: CqWeights, sq: StartingQuadrature, f) -> GridSeries:
    """Plain left convolution plus the h**alpha-scaled starting correction."""
    vals, h, t0 = _as_values(f)
    _check(w, vals)
    if sq.weights.shape[0] < vals.shape[0]:
        raise DimensionError("starting quadrature has fewer rows than the series")
    s = sq.correction_degree_s
    if vals.shape[0] < s + 1:
        raise DimensionError("series shorter than the correction stencil")
    plain = _lower_toeplitz_apply(w.weights, vals)
    n = vals.shape[0]
    corr = sq.step_h**sq.alpha * np.tensordot(sq.weights[:n], vals[: s + 1], axes=1)
    return GridSeries(plain + corr, h or w.step_h, t0)
