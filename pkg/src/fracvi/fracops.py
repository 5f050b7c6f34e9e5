"""Continuous Riemann-Liouville operators used as reference values.

Everything here is independent of the convolution-quadrature code in
:mod:`fracvi.cq`: closed forms for power functions, a sine-power series,
and a product-trapezoid quadrature for general grid data.

Conventions: ``rl_integral_*(alpha, ...)`` evaluates J^alpha for any real
alpha; a negative alpha is the Riemann-Liouville derivative of order
-alpha.  Only the left (retarded) operator on [0, T] is provided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

gamma = math.gamma


def _is_pole(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles 0, -1, -2, ..."""
    if _is_pole(x):
        return 0.0
    return 1.0 / math.gamma(x)


@dataclass(frozen=True)
class FractionalOrder:
    """Fractional order with the convention it is read in.

    ``convention="integral"`` needs alpha > 0; ``"derivative"`` needs
    0 <= alpha <= 1.  :meth:`as_integral_index` returns the J-index, which
    is negative for derivatives.
    """

    alpha: float
    convention: str = "integral"

    def __post_init__(self):
        if self.convention == "integral":
            if not self.alpha > 0:
                raise ConfigurationError(f"integral order must be > 0, got {self.alpha}")
        elif self.convention == "derivative":
            if not 0.0 <= self.alpha <= 1.0:
                raise ConfigurationError(
                    f"derivative order must lie in [0, 1], got {self.alpha}"
                )
        else:
            raise ConfigurationError(f"unknown convention {self.convention!r}")

    def as_integral_index(self) -> float:
        return self.alpha if self.convention == "integral" else -self.alpha


@dataclass(frozen=True)
class PowerFunction:
    """f(t) = scale * t**(beta - 1)."""

    beta: float
    scale: float = 1.0

    def __post_init__(self):
        if _is_pole(self.beta):
            raise ConfigurationError(f"beta must not be 0, -1, -2, ...; got {self.beta}")

    def __call__(self, t):
        return self.scale * np.power(np.asarray(t, dtype=float), self.beta - 1.0)

    def rl_integral(self, alpha, t):
        return self.scale * rl_integral_monomial(alpha, self.beta, t)


def rl_integral_monomial(alpha: float, beta: float, t):
    """J^alpha applied to t**(beta-1), evaluated at ``t``.

    Gamma(beta)/Gamma(beta+alpha) * t**(beta+alpha-1).  Returns 0 where
    beta+alpha is a pole of Gamma.  Works elementwise on arrays.
    """
    if _is_pole(beta):
        raise ConfigurationError(f"beta must not be 0, -1, -2, ...; got {beta}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigurationError("t must be nonnegative")
    coef = math.gamma(beta) * rgamma(beta + alpha)
    expo = beta + alpha - 1.0
    if coef == 0.0:
        out = np.zeros_like(t)
    else:
        with np.errstate(divide="ignore"):
            out = coef * np.power(t, expo)
    return float(out) if out.ndim == 0 else out


def rl_integral_sine_power(alpha: float, beta: float, t, terms: int = 40):
    """J^alpha of t**(beta-1) * sin(t) by termwise integration of the sine series.

    sin t = sum_m (-1)^m t^(2m+1)/(2m+1)!, so each term is a power function.
    The series converges for all t; ``terms`` = 40 is ample on [0, 10].
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for m in range(terms):
        b = beta + 2 * m + 1  # t^(beta-1) t^(2m+1) = t^(b-1)
        out = out + (-1) ** m / math.factorial(2 * m + 1) * rl_integral_monomial(alpha, b, t)
    return float(out) if out.ndim == 0 else out


def product_trapezoid_integral(order: float, values, h: float):
    """J^order (order > 0) of piecewise-linear data on a uniform grid.

    The kernel (t-s)^(order-1)/Gamma(order) is integrated exactly against
    the linear interpolant of ``values``; second order for smooth data.
    """
    if not order > 0:
        raise ConfigurationError("product trapezoid needs a positive order")
    f = np.asarray(values, dtype=float)
    n_pts = f.shape[0]
    # weights for target n: a_0 = (n-1)^(o+1) - (n-o-1) n^o, a_n = 1,
    # a_j = (n-j+1)^(o+1) - 2(n-j)^(o+1) + (n-j-1)^(o+1) in between
    o = order
    c = h**o / math.gamma(o + 2)
    out = np.zeros_like(f)
    for n in range(1, n_pts):
        m = n - np.arange(1, n)  # n - j for j = 1..n-1
        a_mid = (m + 1) ** (o + 1) - 2 * m ** (o + 1) + (m - 1) ** (o + 1)
        a0 = (n - 1) ** (o + 1) - (n - o - 1) * n**o
        out[n] = c * (a0 * f[0] + a_mid @ f[1:n] + f[n])
    return out


def _central_diff(y, h):
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2 * h)
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    d[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h)
    return d


def rl_derivative_series(alpha: float, f, h: float, n_steps: int, refinement: int = 8):
    """Numerical D^alpha f = d/dt J^(1-alpha) f on the grid t_k = k h, k = 0..n_steps.

    ``f`` is a callable (sampled on the refined grid) or an array of the
    n_steps+1 coarse values (refined by linear interpolation).  J^(1-alpha)
    uses the product trapezoid rule, the derivative central differences.
    Meant as a fallback oracle where no closed form exists.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    if refinement < 4:
        raise ConfigurationError(f"refinement must be >= 4, got {refinement}")
    hf = h / refinement
    tf = np.arange(n_steps * refinement + 1) * hf
    if callable(f):
        ff = np.asarray(f(tf), dtype=float)
    else:
        coarse = np.asarray(f, dtype=float)
        if coarse.shape[0] != n_steps + 1:
            raise ConfigurationError("grid values must have n_steps+1 entries")
        ff = np.interp(tf, np.arange(n_steps + 1) * h, coarse)
    if alpha == 1.0:
        g = ff
    else:
        g = product_trapezoid_integral(1.0 - alpha, ff, hf)
    return _central_diff(g, hf)[::refinement]


def fractional_derivative_of_power(order: float, exponent: float, t):
    """D^order of t**exponent (Riemann-Liouville), i.e. J^(-order)."""
    return rl_integral_monomial(-order, exponent + 1.0, t)

