"""Mechanical models and their conservative discretizations.

A :class:`LagrangianModel` bundles L(t, q, qdot), its first partials and,
optionally, the second partials used for analytic Newton Jacobians.  Two
discrete Lagrangians are provided:

* :class:`MidpointLagrangian`, L_d = h L(t + h/2, (a+b)/2, (b-a)/h);
* :class:`GalerkinLagrangian`, polynomial interpolation through s+1
  control points plus a quadrature rule on each step.

Both expose the same interface (``value``, ``partials``, ``hessian``) on an
``(s+1, d)`` array of interval nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class LagrangianModel:
    """L(t, q, qdot) with partials; q and qdot are 1-d arrays of length ``dim``.

    Benchmark metadata (fractional order, damping, horizon, initial data)
    rides along so a model id is enough to set up a run.
    """

    name: str
    dim: int
    L: Callable
    dL_dq: Callable
    dL_dqdot: Callable
    d2L_dq2: Optional[Callable] = None
    d2L_dqdqdot: Optional[Callable] = None
    d2L_dqdot2: Optional[Callable] = None
    forcing: Optional[Callable] = None
    exact_solution: Optional[Callable] = None
    alpha: float = 0.5
    mu: float = 0.0
    T: float = 1.0
    x0: tuple = (0.0,)
    v0: tuple = (0.0,)
    unit_mass: bool = False
    description: str = ""

    @property
    def has_hessian(self) -> bool:
        return None not in (self.d2L_dq2, self.d2L_dqdqdot, self.d2L_dqdot2)

    @property
    def mass_regular(self) -> bool:
        """d2L/dqdot2 invertible at the origin (checked only with Hessians)."""
        if not self.has_hessian:
            return True
        z = np.zeros(self.dim)
        return bool(np.linalg.matrix_rank(self.d2L_dqdot2(0.0, z, z)) == self.dim)

    def initial_momentum(self, t=0.0):
        """dL/dqdot at the continuous initial data."""
        return np.asarray(
            self.dL_dqdot(t, np.asarray(self.x0, float), np.asarray(self.v0, float)), float
        )

    def with_params(self, **kw) -> "LagrangianModel":
        from dataclasses import replace

        return replace(self, **kw)


def forced_oscillator(
    name, forcing=None, exact=None, *, alpha, mu, T, x0=0.0, v0=0.0, description=""
):
    """L = qdot^2/2 - q^2/2 + q f(t) in one dimension."""
    f = forcing if forcing is not None else (lambda t: 0.0)
    eye = np.eye(1)

    def L(t, q, v):
        return 0.5 * float(v @ v) - 0.5 * float(q @ q) + float(q.sum()) * f(t)

    return LagrangianModel(
        name=name,
        dim=1,
        L=L,
        dL_dq=lambda t, q, v: -q + f(t),
        dL_dqdot=lambda t, q, v: v.copy(),
        d2L_dq2=lambda t, q, v: -eye,
        d2L_dqdqdot=lambda t, q, v: 0.0 * eye,
        d2L_dqdot2=lambda t, q, v: eye,
        forcing=forcing,
        exact_solution=exact,
        alpha=alpha,
        mu=mu,
        T=T,
        x0=(float(x0),),
        v0=(float(v0),),
        unit_mass=True,
        description=description,
    )


def _damped_exact(mu, x0, v0):
    # x'' + mu x' + x = 0, underdamped
    a = mu / 2.0
    w = math.sqrt(1.0 - a * a)

    def x(t):
        t = np.asarray(t, float)
        return np.exp(-a * t) * (x0 * np.cos(w * t) + (v0 + a * x0) / w * np.sin(w * t))

    return x


def _torvik14_forcing(t):
    t = np.asarray(t, float)
    return t**3 + 6.0 * t + 3.2 / math.gamma(0.5) * t**2 * np.sqrt(t)


def _torvik34_forcing(t):
    t = np.asarray(t, float)
    return 3.75 * np.sqrt(t) + 15.0 / 8.0 * math.sqrt(math.pi) * t + t**2 * np.sqrt(t)


def builtin_models() -> dict:
    """Catalog of benchmark models keyed by id."""
    return {
        "damped-osc": forced_oscillator(
            "damped-osc",
            None,
            _damped_exact(0.2, 0.0, 1.2),
            alpha=0.5,
            mu=0.2,
            T=16.0,
            x0=0.0,
            v0=1.2,
            description="x'' + 0.2 D^1 x + x = 0, x(0)=0, x'(0)=1.2",
        ),
        "torvik-14": forced_oscillator(
            "torvik-14",
            _torvik14_forcing,
            lambda t: np.asarray(t, float) ** 3,
            alpha=0.25,
            mu=1.0,
            T=1.0,
            description="Bagley-Torvik, D^(1/2), exact x = t^3",
        ),
        "torvik-34": forced_oscillator(
            "torvik-34",
            _torvik34_forcing,
            lambda t: np.asarray(t, float) ** 2.5,
            alpha=0.75,
            mu=1.0,
            T=1.0,
            description="Bagley-Torvik, D^(3/2), exact x = t^(5/2)",
        ),
    }


def get_model(model_id: str) -> LagrangianModel:
    cat = builtin_models()
    if model_id not in cat:
        raise ConfigurationError(f"unknown model {model_id!r}; choose from {sorted(cat)}")
    return cat[model_id]


def energy(model: LagrangianModel, q, qdot, t=0.0) -> float:
    """Legendre energy qdot . dL/dqdot - L; q^2/2 + qdot^2/2 for the free oscillator."""
    q = np.atleast_1d(np.asarray(q, float))
    qdot = np.atleast_1d(np.asarray(qdot, float))
    return float(qdot @ np.asarray(model.dL_dqdot(t, q, qdot)) - model.L(t, q, qdot))


# ---------------------------------------------------------------- schemes


@dataclass(frozen=True)
class GalerkinScheme:
    """Control points d_0..d_s on [0, 1] and a quadrature rule (b_i, c_i).

    ``ell[i, nu]`` = l_nu(c_i), ``dell[i, nu]`` = l_nu'(c_i) on the unit
    interval; the 1/h of the chain rule is applied by the discrete Lagrangian.
    """

    degree_s: int
    control_points: np.ndarray
    nodes_c: np.ndarray
    weights_b: np.ndarray
    ell: np.ndarray = field(init=False, repr=False)
    dell: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.control_points, float)
        c = np.asarray(self.nodes_c, float)
        b = np.asarray(self.weights_b, float)
        s = self.degree_s
        if s < 1:
            raise ConfigurationError("Galerkin degree must be >= 1")
        if d.shape != (s + 1,) or d[0] != 0.0 or d[-1] != 1.0 or np.any(np.diff(d) <= 0):
            raise ConfigurationError("control points must increase from 0 to 1, s+1 of them")
        if c.shape != b.shape or c.ndim != 1 or np.any((c < 0) | (c > 1)):
            raise ConfigurationError("quadrature nodes must lie in [0, 1] and match the weights")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ConfigurationError("quadrature weights must sum to 1")
        basis = lagrange_basis(d)
        ell = np.array([[bn(ci) for bn in basis] for ci in c])
        dell = np.array([[bn.deriv()(ci) for bn in basis] for ci in c])
        for name, val in (("control_points", d), ("nodes_c", c), ("weights_b", b),
                          ("ell", ell), ("dell", dell)):
            val = np.array(val)
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_nodes(self) -> int:
        return self.degree_s + 1

    @classmethod
    def gauss(cls, s=2, r=None, control_points=None):
        """Equispaced control points with an r-point Gauss rule (default r = s)."""
        r = s if r is None else r
        x, wts = leggauss(r)
        d = np.linspace(0.0, 1.0, s + 1) if control_points is None else control_points
        return cls(s, d, 0.5 * (x + 1.0), 0.5 * wts)

    @classmethod
    def midpoint(cls):
        """s = 1 with the one-point midpoint rule: the two-point midpoint L_d."""
        return cls(1, np.array([0.0, 1.0]), np.array([0.5]), np.array([1.0]))

    @property
    def symmetric(self) -> bool:
        d = self.control_points
        return bool(np.allclose(d + d[::-1], 1.0))


def lagrange_basis(d):
    """Lagrange polynomials l_nu with l_nu(d_i) = delta_{nu i}."""
    d = np.asarray(d, float)
    out = []
    for nu in range(d.shape[0]):
        others = np.delete(d, nu)
        poly = Polynomial.fromroots(others)
        out.append(poly / poly(d[nu]))
    return out


class DiscreteLagrangian:
    """Common interface: nodes is an (s+1, d) array for one interval [t, t+h]."""

    n_nodes: int
    model: LagrangianModel
    h: float

    def value(self, nodes, t):
        raise NotImplementedError

    def partials(self, nodes, t):
        raise NotImplementedError

    def hessian(self, nodes, t):
        raise NotImplementedError

    def _check(self, nodes):
        nodes = np.asarray(nodes, float)
        if nodes.shape != (self.n_nodes, self.model.dim):
            raise DimensionError(
                f"expected nodes of shape {(self.n_nodes, self.model.dim)}, got {nodes.shape}"
            )
        return nodes


def _quad_hessian(model, t, q, v, aq, av, h, weight):
    # H[i, :, j, :] = h w (aq_i aq_j Lqq + aq_i av_j Lqv + av_i aq_j Lvq + av_i av_j Lvv)
    Lqq = np.atleast_2d(model.d2L_dq2(t, q, v))
    Lqv = np.atleast_2d(model.d2L_dqdqdot(t, q, v))
    Lvv = np.atleast_2d(model.d2L_dqdot2(t, q, v))
    return h * weight * (
        np.einsum("i,j,ab->iajb", aq, aq, Lqq)
        + np.einsum("i,j,ab->iajb", aq, av, Lqv)
        + np.einsum("i,j,ab->iajb", av, aq, Lqv.T)
        + np.einsum("i,j,ab->iajb", av, av, Lvv)
    )


class MidpointLagrangian(DiscreteLagrangian):
    """L_d(a, b) = h L(t + h/2, (a+b)/2, (b-a)/h)."""

    n_nodes = 2

    def __init__(self, model: LagrangianModel, h: float):
        if not h > 0:
            raise ConfigurationError("step h must be positive")
        self.model = model
        self.h = float(h)

    def _mid(self, nodes, t):
        nodes = self._check(nodes)
        a, b = nodes
        return t + 0.5 * self.h, 0.5 * (a + b), (b - a) / self.h

    def value(self, nodes, t):
        tm, q, v = self._mid(nodes, t)
        return self.h * self.model.L(tm, q, v)

    def partials(self, nodes, t):
        tm, q, v = self._mid(nodes, t)
        Lq = np.asarray(self.model.dL_dq(tm, q, v), float)
        Lv = np.asarray(self.model.dL_dqdot(tm, q, v), float)
        D1 = self.h * (0.5 * Lq - Lv / self.h)
        D2 = self.h * (0.5 * Lq + Lv / self.h)
        return np.stack([D1, D2])

    def hessian(self, nodes, t):
        tm, q, v = self._mid(nodes, t)
        aq = np.array([0.5, 0.5])
        av = np.array([-1.0, 1.0]) / self.h
        return _quad_hessian(self.model, tm, q, v, aq, av, self.h, 1.0)


class GalerkinLagrangian(DiscreteLagrangian):
    """L_d(x^0..x^s) = h sum_i b_i L(t + c_i h, x_d(c_i h), xdot_d(c_i h))."""

    def __init__(self, model: LagrangianModel, h: float, scheme: GalerkinScheme):
        if not h > 0:
            raise ConfigurationError("step h must be positive")
        self.model = model
        self.h = float(h)
        self.scheme = scheme
        self.n_nodes = scheme.n_nodes

    def _stages(self, nodes, t):
        nodes = self._check(nodes)
        sc = self.scheme
        q = sc.ell @ nodes
        v = sc.dell @ nodes / self.h
        return t + sc.nodes_c * self.h, q, v

    def value(self, nodes, t):
        ts, q, v = self._stages(nodes, t)
        b = self.scheme.weights_b
        return self.h * sum(b[i] * self.model.L(ts[i], q[i], v[i]) for i in range(b.shape[0]))

    def partials(self, nodes, t):
        ts, q, v = self._stages(nodes, t)
        sc = self.scheme
        out = np.zeros((self.n_nodes, self.model.dim))
        for i in range(sc.weights_b.shape[0]):
            Lq = np.asarray(self.model.dL_dq(ts[i], q[i], v[i]), float)
            Lv = np.asarray(self.model.dL_dqdot(ts[i], q[i], v[i]), float)
            out += self.h * sc.weights_b[i] * (
                np.outer(sc.ell[i], Lq) + np.outer(sc.dell[i], Lv) / self.h
            )
        return out

    def hessian(self, nodes, t):
        ts, q, v = self._stages(nodes, t)
        sc = self.scheme
        n, d = self.n_nodes, self.model.dim
        H = np.zeros((n, d, n, d))
        for i in range(sc.weights_b.shape[0]):
            H += _quad_hessian(
                self.model, ts[i], q[i], v[i], sc.ell[i], sc.dell[i] / self.h,
                self.h, sc.weights_b[i],
            )
        return H


def midpoint_Ld(model, h, q_a, q_b, t_k):
    """Value and (D1, D2) of the midpoint discrete Lagrangian."""
    ld = MidpointLagrangian(model, h)
    nodes = np.stack([np.atleast_1d(q_a), np.atleast_1d(q_b)]).astype(float)
    return ld.value(nodes, t_k), ld.partials(nodes, t_k)


def galerkin_Ld(model, h, scheme, nodes, t_k):
    """Value and partials D_1..D_{s+1} of the Galerkin discrete Lagrangian."""
    ld = GalerkinLagrangian(model, h, scheme)
    nodes = np.asarray(nodes, float).reshape(scheme.n_nodes, model.dim)
    return ld.value(nodes, t_k), ld.partials(nodes, t_k)


def discrete_lagrangian(model, h, scheme=None) -> DiscreteLagrangian:
    """Midpoint L_d when ``scheme`` is None or "midpoint", Galerkin otherwise."""
    if scheme is None or scheme == "midpoint":
        return MidpointLagrangian(model, h)
    if isinstance(scheme, GalerkinScheme):
        return GalerkinLagrangian(model, h, scheme)
    raise ConfigurationError(f"unknown scheme {scheme!r}")
