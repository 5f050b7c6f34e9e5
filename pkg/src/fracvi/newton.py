"""Damped Newton iteration for the small per-step systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegeneracyError, NewtonError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 50
    jacobian: str = "analytic"  # or "finite-difference"
    fd_step: float = 1e-7
    max_halvings: int = 20

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("Newton tolerance must be positive")
        if self.jacobian not in ("analytic", "finite-difference"):
            raise ConfigurationError(f"unknown Jacobian mode {self.jacobian!r}")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged_by: str  # "residual" or "stagnation"


def fd_jacobian(residual_fn, x, r0=None, step=1e-7):
    """Forward-difference Jacobian."""
    x = np.asarray(x, float)
    r0 = residual_fn(x) if r0 is None else r0
    J = np.empty((r0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        dx = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += dx
        J[:, j] = (residual_fn(xp) - r0) / dx
    return J


def newton_solve(residual_fn, jacobian_fn, guess, config: NewtonConfig = NewtonConfig()):
    """Solve residual_fn(x) = 0 from ``guess``.

    Converged when ||r||_inf < tol.  A full step whose size is at round-off
    level relative to x is also accepted ("stagnation"): the residual then
    cannot be reduced further in floating point.  Each step is halved up to
    ``max_halvings`` times until the residual norm decreases.
    """
    x = np.array(guess, dtype=float, copy=True)
    r = np.asarray(residual_fn(x), float)
    if r.shape != x.shape:
        raise ConfigurationError(f"residual size {r.shape} != unknown size {x.shape}")
    norm = np.max(np.abs(r)) if r.size else 0.0
    if not np.isfinite(norm):
        raise NewtonError("non-finite residual at the initial guess", 0, norm)
    for it in range(config.max_iter + 1):
        if norm < config.tol:
            return NewtonResult(x, it, float(norm), "residual")
        if it == config.max_iter:
            break
        if jacobian_fn is None or config.jacobian == "finite-difference":
            J = fd_jacobian(residual_fn, x, r, config.fd_step)
        else:
            J = np.asarray(jacobian_fn(x), float)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError(f"singular Jacobian: {exc}") from exc
        lam = 1.0
        for _ in range(config.max_halvings + 1):
            x_new = x + lam * dx
            r_new = np.asarray(residual_fn(x_new), float)
            norm_new = np.max(np.abs(r_new))
            if np.isfinite(norm_new) and norm_new < norm:
                break
            lam *= 0.5
        else:
            if np.max(np.abs(dx)) <= 8 * _EPS * (1.0 + np.max(np.abs(x))):
                return NewtonResult(x, it, float(norm), "stagnation")
            raise NewtonError("line search failed to reduce the residual", it, norm)
        small_step = lam == 1.0 and np.max(np.abs(dx)) <= 8 * _EPS * (1.0 + np.max(np.abs(x)))
        x, r, norm = x_new, r_new, norm_new
        if small_step and norm >= config.tol:
            return NewtonResult(x, it + 1, float(norm), "stagnation")
    raise NewtonError(
        f"no convergence in {config.max_iter} iterations (residual {norm:.3e})",
        config.max_iter,
        norm,
    )
