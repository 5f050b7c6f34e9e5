"""Fractional variational integrators (FVI) with BDF convolution quadrature.

The x-equations of the restricted discrete Euler-Lagrange system are
stepped forward in k:

    D_{s+1} L_d(X_{k-1}) + D_1 L_d(X_k) - mu h (J^{-(alpha+beta)} x)_k = 0
    D_i L_d(X_k) = 0,  i = 2..s

where X_k = (x_k^0, ..., x_k^s) are the nodes of interval k and
x_k^s = x_{k+1}^0.  The fractional term only sees main nodes.  The
midpoint FVI is the case s = 1 with the two-point midpoint L_d.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .cq import MAX_BDF_ORDER, conv_right, cq_weights, starting_quadrature
from .errors import (
    ConfigurationError,
    DegeneracyError,
    DimensionError,
    InvalidOrderError,
    NewtonError,
    StepFailure,
)
from .models import (
    DiscreteLagrangian,
    GalerkinScheme,
    LagrangianModel,
    discrete_lagrangian,
    get_model,
)
from .newton import NewtonConfig, fd_jacobian, newton_solve


@dataclass(frozen=True)
class FviProblem:
    """Everything one run needs.  ``frac_order`` = alpha + beta."""

    model: LagrangianModel
    mu: float
    alpha: float
    beta: float
    bdf_order: int
    N: int
    h: float
    x0: np.ndarray
    p_x0: np.ndarray
    use_starting_correction: bool = False
    correction_degree: Optional[int] = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not isinstance(self.bdf_order, (int, np.integer)) or not 1 <= self.bdf_order <= MAX_BDF_ORDER:
            raise InvalidOrderError(f"BDF order must be in 1..{MAX_BDF_ORDER}, got {self.bdf_order}")
        if not self.mu >= 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigurationError("alpha and beta must be >= 0")
        if not self.alpha + self.beta < 2:
            raise ConfigurationError(f"alpha + beta must be < 2, got {self.alpha + self.beta}")
        if not self.h > 0 or self.N < 1:
            raise ConfigurationError("need h > 0 and N >= 1")
        x0 = np.atleast_1d(np.asarray(self.x0, float))
        p0 = np.atleast_1d(np.asarray(self.p_x0, float))
        if x0.shape != (self.model.dim,) or p0.shape != (self.model.dim,):
            raise DimensionError("x0 and p_x0 must have the model dimension")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "p_x0", p0)
        if self.correction_degree is not None and self.correction_degree < 0:
            raise ConfigurationError("correction degree must be >= 0")
        if self.use_starting_correction and self.N < self.corr_degree:
            raise ConfigurationError("grid too short for the starting correction")

    @property
    def T(self) -> float:
        return self.N * self.h

    @property
    def frac_order(self) -> float:
        return self.alpha + self.beta

    @property
    def corr_degree(self) -> int:
        if self.correction_degree is not None:
            return int(self.correction_degree)
        return self.bdf_order - 1

    @classmethod
    def from_model(
        cls,
        model: Union[str, LagrangianModel],
        bdf_order: int,
        *,
        h: Optional[float] = None,
        N: Optional[int] = None,
        T: Optional[float] = None,
        mu: Optional[float] = None,
        alpha: Optional[float] = None,
        **kw,
    ) -> "FviProblem":
        """Problem from a catalog model: alpha = beta = model alpha, p_x0 = dL/dqdot(0)."""
        if isinstance(model, str):
            model = get_model(model)
        T = model.T if T is None else float(T)
        if (h is None) == (N is None):
            raise ConfigurationError("give exactly one of h or N")
        if N is None:
            N = int(round(T / h))
            if N < 1 or abs(N * h - T) > 1e-12 * max(1.0, T):
                raise ConfigurationError(f"T = {T} is not a multiple of h = {h}")
        else:
            h = T / N
        a = model.alpha if alpha is None else float(alpha)
        return cls(
            model=model,
            mu=model.mu if mu is None else float(mu),
            alpha=a,
            beta=a,
            bdf_order=bdf_order,
            N=int(N),
            h=float(h),
            x0=np.asarray(model.x0, float),
            p_x0=model.initial_momentum(),
            **kw,
        )


@dataclass(frozen=True)
class Trajectory:
    """Main nodes x_0..x_N, inner nodes per interval, per-step solver diagnostics.

    Interval k consists of main[k], inner[k, :], main[k+1]; the transition
    condition holds because the end of one interval *is* the start of the
    next in storage.  ``iterations[0]``/``residuals[0]`` belong to the
    initialization solve, index k >= 1 to the step producing x_{k+1}.
    """

    main: np.ndarray
    inner: np.ndarray
    h: float
    iterations: np.ndarray
    residuals: np.ndarray
    t0: float = 0.0

    @property
    def N(self) -> int:
        return self.main.shape[0] - 1

    @property
    def degree_s(self) -> int:
        return self.inner.shape[1] + 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.N + 1)

    def interval(self, k) -> np.ndarray:
        return np.concatenate([self.main[k : k + 1], self.inner[k], self.main[k + 1 : k + 2]])

    @classmethod
    def from_main(cls, main, h, inner=None):
        main = np.asarray(main, float)
        if main.ndim == 1:
            main = main[:, None]
        n = main.shape[0] - 1
        if inner is None:
            inner = np.zeros((n, 0, main.shape[1]))
        return cls(main, np.asarray(inner, float), float(h), np.zeros(n, int), np.zeros(n))


class FviStepper:
    """Assembles and solves the per-step systems of one problem.

    Only the history main[:k+1], inner[:k] is read when solving step k.
    """

    def __init__(self, problem: FviProblem, ld: DiscreteLagrangian):
        self.problem = problem
        self.ld = ld
        self.s = ld.n_nodes - 1
        self.d = problem.model.dim
        self.order = -problem.frac_order
        self.weights = cq_weights(self.order, problem.bdf_order, problem.h, problem.N).weights
        self.sq = None
        if problem.use_starting_correction:
            self.sq = starting_quadrature(
                self.order, problem.bdf_order, problem.h, problem.N, problem.corr_degree
            )
        self.analytic = problem.model.has_hessian and problem.newton.jacobian == "analytic"
        self.muh = problem.mu * problem.h

    # -- pieces of the equations
    def t(self, k):
        return k * self.problem.h

    def frac(self, main, k):
        """(J^{-(alpha+beta)} x)_k from main[0..k] (plus correction nodes)."""
        val = self.weights[: k + 1] @ main[k::-1]
        if self.sq is not None:
            sc = self.sq.correction_degree_s
            val = val + self.sq.correction(main[: sc + 1], k)
        return val

    def _nodes(self, start, u):
        return np.vstack([start[None, :], u.reshape(self.s, self.d)])

    def init_residual(self, u):
        nodes = self._nodes(self.problem.x0, u)
        D = self.ld.partials(nodes, 0.0)
        r = D[: self.s].copy()
        r[0] += self.problem.p_x0
        return r.ravel()

    def init_jacobian(self, u):
        nodes = self._nodes(self.problem.x0, u)
        H = self.ld.hessian(nodes, 0.0)
        n = self.s * self.d
        return H[: self.s, :, 1:, :].reshape(n, n)

    def step_residual(self, main, prev_nodes, k, u):
        """Residual of step k (k >= 1) for unknowns u = (x_k^1..x_k^s)."""
        nodes = self._nodes(main[k], u)
        D = self.ld.partials(nodes, self.t(k))
        Dprev = self.ld.partials(prev_nodes, self.t(k - 1))[-1]
        r = D[: self.s].copy()
        if self.sq is not None and k + 1 <= self.sq.correction_degree_s:
            main = main.copy()
            main[k + 1] = nodes[-1]
        r[0] += Dprev - self.muh * self.frac(main, k)
        return r.ravel()

    def step_jacobian(self, main, k, u):
        nodes = self._nodes(main[k], u)
        H = self.ld.hessian(nodes, self.t(k))
        n = self.s * self.d
        J = H[: self.s, :, 1:, :].reshape(n, n).copy()
        if self.sq is not None and k + 1 <= self.sq.correction_degree_s:
            c = self.muh * self.problem.h**self.order * self.sq.weights[k, k + 1]
            J[: self.d, n - self.d :] -= c * np.eye(self.d)
        return J

    # -- solves
    def _newton(self, res, jac, guess, k, block):
        try:
            return newton_solve(res, jac if self.analytic else None, guess, self.problem.newton)
        except NewtonError as exc:
            r = res(guess)
            which = block
            if block == "main" and self.s > 1 and r.size:
                which = "main" if np.argmax(np.abs(r)) < self.d else "inner"
            raise StepFailure(k, exc.residual, which, exc) from exc
        except DegeneracyError as exc:
            raise DegeneracyError(f"step {k}: {exc} (D_12 L_d singular?)") from exc

    def solve_init(self):
        guess = np.tile(self.problem.x0, self.s)
        sol = self._newton(self.init_residual, self.init_jacobian, guess, 0, "init")
        return sol.x.reshape(self.s, self.d), sol

    def solve_step(self, main, inner, k):
        """Nodes x_k^1..x_k^s of interval k from the history."""
        prev = np.vstack([main[k - 1 : k], inner[k - 1], main[k : k + 1]])
        guess = (prev[1:] + (main[k] - main[k - 1])).ravel()
        sol = self._newton(
            lambda u: self.step_residual(main, prev, k, u),
            lambda u: self.step_jacobian(main, k, u),
            guess,
            k,
            "main",
        )
        return sol.x.reshape(self.s, self.d), sol

    def solve_joint_start(self, main, inner, k_last):
        """Steps 1..k_last solved together (correction stencil reaches ahead)."""
        s, d = self.s, self.d
        m = k_last

        def unpack(U):
            mm, ii = main.copy(), inner.copy()
            blocks = U.reshape(m, s, d)
            for j, k in enumerate(range(1, m + 1)):
                ii[k] = blocks[j, :-1]
                mm[k + 1] = blocks[j, -1]
            return mm, ii

        def res(U):
            mm, ii = unpack(U)
            out = []
            for k in range(1, m + 1):
                prev = np.vstack([mm[k - 1 : k], ii[k - 1], mm[k : k + 1]])
                nodes = np.vstack([mm[k : k + 1], ii[k], mm[k + 1 : k + 2]])
                D = self.ld.partials(nodes, self.t(k))
                Dprev = self.ld.partials(prev, self.t(k - 1))[-1]
                r = D[:s].copy()
                r[0] += Dprev - self.muh * self.frac(mm, k)
                out.append(r.ravel())
            return np.concatenate(out)

        guess = np.tile(main[1], m * s)
        try:
            sol = newton_solve(res, None, guess, self.problem.newton)
        except NewtonError as exc:
            raise StepFailure(1, exc.residual, "start", exc) from exc
        mm, ii = unpack(sol.x)
        return mm, ii, sol

    def run(self) -> Trajectory:
        p = self.problem
        N, s, d = p.N, self.s, self.d
        main = np.zeros((N + 1, d))
        inner = np.zeros((N, s - 1, d))
        iters = np.zeros(N, int)
        resid = np.zeros(N)
        main[0] = p.x0
        nodes, sol = self.solve_init()
        inner[0], main[1] = nodes[:-1], nodes[-1]
        iters[0], resid[0] = sol.iterations, sol.residual
        k = 1
        if self.sq is not None and self.sq.correction_degree_s > 2:
            k_last = min(self.sq.correction_degree_s - 1, N - 1)
            main, inner, sol = self.solve_joint_start(main, inner, k_last)
            iters[1 : k_last + 1], resid[1 : k_last + 1] = sol.iterations, sol.residual
            k = k_last + 1
        for k in range(k, N):
            nodes, sol = self.solve_step(main, inner, k)
            inner[k], main[k + 1] = nodes[:-1], nodes[-1]
            iters[k], resid[k] = sol.iterations, sol.residual
        for a in (main, inner, iters, resid):
            a.setflags(write=False)
        return Trajectory(main, inner, p.h, iters, resid)

    def residuals(self, traj: Trajectory) -> np.ndarray:
        """Max-norm residual of every equation block along a trajectory."""
        out = np.zeros(traj.N)
        out[0] = np.max(np.abs(self.init_residual(traj.interval(0)[1:].ravel())))
        main = np.array(traj.main)
        for k in range(1, traj.N):
            u = traj.interval(k)[1:].ravel()
            out[k] = np.max(np.abs(self.step_residual(main, traj.interval(k - 1), k, u)))
        return out


def _scheme_ld(problem, scheme):
    return discrete_lagrangian(problem.model, problem.h, scheme)


def fvi_midpoint_run(problem: FviProblem) -> Trajectory:
    """Midpoint FVI: two-point midpoint L_d, x_1 from p_x0 = -D_1 L_d(x_0, x_1)."""
    return FviStepper(problem, _scheme_ld(problem, "midpoint")).run()


def fvi_galerkin_run(problem: FviProblem, scheme: GalerkinScheme) -> Trajectory:
    """Galerkin FVI: s unknowns per step, damping on main nodes only."""
    return FviStepper(problem, _scheme_ld(problem, scheme)).run()


def fvi_run(problem: FviProblem, scheme=None) -> Trajectory:
    if scheme is None or scheme == "midpoint":
        return fvi_midpoint_run(problem)
    return fvi_galerkin_run(problem, scheme)


def el_residuals(problem: FviProblem, traj: Trajectory, scheme=None) -> np.ndarray:
    """Re-evaluate all discrete Euler-Lagrange residuals along ``traj``."""
    return FviStepper(problem, _scheme_ld(problem, scheme)).residuals(traj)


@dataclass(frozen=True)
class ReversalReport:
    max_residual: float
    residuals: np.ndarray


def fvi_reversed_check(problem: FviProblem, traj: Trajectory, scheme=None) -> ReversalReport:
    """Residual of the y-equations for y_k = x_{N-k}.

    Uses the right convolution (J_+) with the plain CQ weights.  Requires a
    Lagrangian even in the velocity and symmetric control points; the
    interval of y starting at t_k is evaluated at the time of its mirror
    interval in x.
    """
    ld = _scheme_ld(problem, scheme)
    s = ld.n_nodes - 1
    if s != traj.degree_s:
        raise DimensionError("trajectory and scheme disagree on the number of nodes")
    if scheme not in (None, "midpoint") and not scheme.symmetric:
        raise ConfigurationError("time reversal needs symmetric control points")
    N, h = traj.N, traj.h
    T = N * h
    y_main = traj.main[::-1]
    w = cq_weights(-problem.frac_order, problem.bdf_order, h, N)
    jy = conv_right(w, y_main).values

    def y_interval(k):
        return traj.interval(N - 1 - k)[::-1]

    def t_of(k):
        return T - (k + 1) * h

    res = []
    D_prev = ld.partials(y_interval(0), t_of(0))
    for k in range(N):
        D = ld.partials(y_interval(k), t_of(k)) if k > 0 else D_prev
        parts = []
        if k >= 1:
            parts.append(np.abs(D_prev[-1] + D[0] - problem.mu * h * jy[k]))
        if s > 1:
            parts.append(np.abs(D[1:s]).ravel())
        if parts:
            res.append(float(np.max(np.concatenate([np.ravel(p) for p in parts]))))
        D_prev = D
    res = np.array(res)
    return ReversalReport(float(res.max()) if res.size else 0.0, res)
