"""Convergence studies and diagnostics.

Orders are least-squares slopes of log(error) against log(h).  Everything
is deterministic; study cells run in order of decreasing h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cq import GridSeries, conv_left, corrected_conv_left, cq_weights, starting_quadrature
from .errors import ConfigurationError, StepFailure
from .fracops import rl_integral_monomial, rl_integral_sine_power
from .integrators import FviProblem, Trajectory, fvi_run
from .models import GalerkinScheme, LagrangianModel, energy, get_model
from .newton import NewtonConfig, newton_solve


@dataclass(frozen=True)
class OrderReport:
    slope: float
    local_slopes: np.ndarray
    r_squared: float
    hs: np.ndarray
    errors: np.ndarray
    tail: Optional[int] = None

    def summary(self) -> str:
        loc = " ".join(f"{s:.2f}" for s in self.local_slopes)
        return f"order {self.slope:.3f} (R^2 {self.r_squared:.4f}; pairwise {loc})"


def fit_order(hs, errors, tail: Optional[int] = None) -> OrderReport:
    """Slope of log(err) vs log(h); ``tail`` keeps only the last (smallest-h) points."""
    hs = np.asarray(hs, float)
    errors = np.asarray(errors, float)
    if hs.shape != errors.shape or hs.size < 2:
        raise ConfigurationError("need matching arrays of at least two step sizes")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ConfigurationError("errors must be finite and positive")
    x, y = np.log(hs), np.log(errors)
    loc = np.diff(y) / np.diff(x)
    if tail is not None:
        x, y = x[-tail:], y[-tail:]
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return OrderReport(float(slope), loc, r2, hs, errors, tail)


def global_error(traj: Trajectory, exact_fn) -> float:
    """max_k |x(t_k) - x_k| over main nodes."""
    ex = np.asarray(exact_fn(traj.times), float).reshape(traj.main.shape[0], -1)
    return float(np.max(np.abs(traj.main - ex)))


def benchmark_step_sizes(model_id: str) -> list:
    """h = 16/2^i, i=4..11 for the oscillator; h = 1/2^i, i=1..8 otherwise."""
    if model_id == "damped-osc":
        return [16.0 / 2**i for i in range(4, 12)]
    return [1.0 / 2**i for i in range(1, 9)]


def scheme_from_name(name: str):
    """"midpoint" or "galerkin" / "galerkin:s=2" (equispaced nodes, s-point Gauss)."""
    if name == "midpoint":
        return "midpoint"
    if name.startswith("galerkin"):
        s = 2
        if ":" in name:
            key, _, val = name.partition(":")[2].partition("=")
            if key != "s":
                raise ConfigurationError(f"bad scheme option {name!r}")
            s = int(val)
        return GalerkinScheme.gauss(s)
    raise ConfigurationError(f"unknown scheme {name!r}; use midpoint or galerkin[:s=N]")


@dataclass(frozen=True)
class ConvergenceStudy:
    model: str | LagrangianModel
    bdf_order: int
    step_sizes: Sequence[float]
    scheme: object = "midpoint"
    use_starting_correction: bool = False
    correction_degree: Optional[int] = None
    mu: Optional[float] = None
    tail: Optional[int] = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if len(self.step_sizes) < 4:
            raise ConfigurationError("a convergence study needs at least 4 step sizes")

    def problem(self, h) -> FviProblem:
        return FviProblem.from_model(
            self.model,
            self.bdf_order,
            h=h,
            mu=self.mu,
            use_starting_correction=self.use_starting_correction,
            correction_degree=self.correction_degree,
            newton=self.newton,
        )


def _model_obj(m):
    return get_model(m) if isinstance(m, str) else m


def run_convergence(study: ConvergenceStudy) -> OrderReport:
    model = _model_obj(study.model)
    if model.exact_solution is None:
        raise ConfigurationError(f"model {model.name!r} has no exact solution")
    hs = sorted((float(h) for h in study.step_sizes), reverse=True)
    errs = []
    for h in hs:
        try:
            traj = fvi_run(study.problem(h), study.scheme)
        except StepFailure as exc:
            raise StepFailure(exc.step, exc.residual, f"{exc.block} at h={h}", exc) from exc
        errs.append(global_error(traj, model.exact_solution))
    return fit_order(hs, errs, study.tail)


# ------------------------------------------------------------- CQ studies


def cq_error(fn_values, exact_values, alpha, p, h, corrected=False, s=None, norm="max"):
    """Error of (corrected) CQ for J^alpha on one grid.

    ``norm="max"`` is the max over all grid points, ``"final"`` the error
    at the last grid point.
    """
    f = np.asarray(fn_values, float)
    N = f.shape[0] - 1
    w = cq_weights(alpha, p, h, N)
    if corrected:
        sq = starting_quadrature(alpha, p, h, N, p - 1 if s is None else s)
        approx = corrected_conv_left(w, sq, GridSeries(f, h)).values
    else:
        approx = conv_left(w, GridSeries(f, h)).values
    err = np.abs(approx - exact_values)
    if norm == "max":
        return float(np.max(err))
    if norm == "final":
        return float(err[-1])
    raise ConfigurationError(f"unknown norm {norm!r}")


def cq_saturation_study(
    beta: float,
    p: int,
    alpha: float = -0.5,
    step_sizes: Optional[Sequence[float]] = None,
    T: float = 1.0,
    norm: str = "final",
    tail: Optional[int] = None,
) -> OrderReport:
    """Convergence of plain CQ for f(t) = t^(beta-1) sin t on [0, T].

    The reference is the termwise closed form of J^alpha applied to the
    sine series.  ``norm="final"`` measures at t = T, where the error
    behaves like h^min(beta+1, p); the grid max norm is dominated by t = h.
    """
    hs = [2.0**-i for i in range(3, 11)] if step_sizes is None else list(step_sizes)
    errs = []
    for h in hs:
        N = int(round(T / h))
        t = h * np.arange(N + 1)
        f = t ** (beta - 1.0) * np.sin(t)
        errs.append(cq_error(f, rl_integral_sine_power(alpha, beta, t), alpha, p, h, norm=norm))
    return fit_order(hs, errs, tail)


def cq_monomial_study(alpha, beta, p, step_sizes, corrected=False, s=None, norm="max", T=1.0):
    """Convergence of (corrected) CQ for t^(beta-1), exact reference by the Gamma formula."""
    errs = []
    for h in step_sizes:
        N = int(round(T / h))
        t = h * np.arange(N + 1)
        errs.append(
            cq_error(t ** (beta - 1.0), rl_integral_monomial(alpha, beta, t), alpha, p, h,
                     corrected, s, norm)
        )
    return fit_order(step_sizes, errs)


# ------------------------------------------------------------ energy


def interval_energies(traj: Trajectory, model: LagrangianModel) -> np.ndarray:
    """Energy on each interval from the midpoint position and (x_{k+1}-x_k)/h."""
    x = traj.main
    q = 0.5 * (x[1:] + x[:-1])
    v = (x[1:] - x[:-1]) / traj.h
    tm = traj.times[:-1] + 0.5 * traj.h
    return np.array([energy(model, q[k], v[k], tm[k]) for k in range(traj.N)])


def energy_trace(traj: Trajectory, model: LagrangianModel) -> GridSeries:
    """Per-node energy: mean of the two adjacent interval energies (one at the ends)."""
    e = interval_energies(traj, model)
    node = np.empty(traj.N + 1)
    node[0], node[-1] = e[0], e[-1]
    node[1:-1] = 0.5 * (e[1:] + e[:-1])
    return GridSeries(node, traj.h, traj.t0)


def window_means(values, times, window: float) -> np.ndarray:
    """Means over consecutive complete windows [j w, (j+1) w)."""
    values = np.asarray(values, float)
    times = np.asarray(times, float)
    n_win = int(math.floor((times[-1] - times[0]) / window + 1e-12))
    out = []
    for j in range(n_win):
        lo, hi = times[0] + j * window, times[0] + (j + 1) * window
        sel = (times >= lo) & (times < hi)
        out.append(values[sel].mean())
    return np.array(out)


# -------------------------------------------------------- Euler baselines


def _euler_setup(problem: FviProblem):
    if not problem.model.unit_mass:
        raise ConfigurationError("Euler baselines need a unit-mass Lagrangian (dL/dqdot = qdot)")
    w = cq_weights(-problem.frac_order, 1, problem.h, problem.N).weights
    return w


def euler_explicit_run(problem: FviProblem) -> Trajectory:
    """x' = v, v' = dL/dq - mu J^{-(alpha+beta)} x with BDF1-CQ damping, explicit."""
    w = _euler_setup(problem)
    m, h, N = problem.model, problem.h, problem.N
    x = np.zeros((N + 1, m.dim))
    v = np.zeros((N + 1, m.dim))
    x[0], v[0] = problem.x0, problem.p_x0
    for k in range(N):
        t = k * h
        force = m.dL_dq(t, x[k], v[k]) - problem.mu * (w[: k + 1] @ x[k::-1])
        x[k + 1] = x[k] + h * v[k]
        v[k + 1] = v[k] + h * force
    return Trajectory.from_main(x, h)


def euler_implicit_run(problem: FviProblem) -> Trajectory:
    """Implicit Euler on the same first-order system."""
    w = _euler_setup(problem)
    m, h, N = problem.model, problem.h, problem.N
    d = m.dim
    x = np.zeros((N + 1, d))
    v = np.zeros((N + 1, d))
    x[0], v[0] = problem.x0, problem.p_x0
    for k in range(N):
        t1 = (k + 1) * h
        hist = w[1 : k + 2] @ x[k::-1]  # sum_{n>=1} w_n x_{k+1-n}

        def res(z, k=k, t1=t1, hist=hist):
            xn, vn = z[:d], z[d:]
            force = m.dL_dq(t1, xn, vn) - problem.mu * (w[0] * xn + hist)
            return np.concatenate([xn - x[k] - h * vn, vn - v[k] - h * force])

        sol = newton_solve(res, None, np.concatenate([x[k], v[k]]), problem.newton)
        x[k + 1], v[k + 1] = sol.x[:d], sol.x[d:]
    return Trajectory.from_main(x, h)
