"""Implicit Euler-Maruyama stepping with a nodally interpolated drift.

One step finds ``U`` with

    (M + tau K) U - tau M f(U) = M u_n + L_g(u_n) dW

where ``f(U)`` acts entrywise on nodal values (the coefficient form of
``I_h f(U)``) and ``L_g`` is the noise load.  The nonlinear system is
solved by Newton's method with BiCGSTAB inner solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import FESpace, composed_load
from .model import ModelSpec
from .paths import WienerPath
from .sparse import SparseMatrix, bicgstab_solve, cg_solve, norm2

__all__ = [
    "SchemeConfig",
    "StepDiagnostics",
    "Trajectory",
    "NewtonError",
    "PathFailure",
    "step",
    "newton_solve",
    "residual",
    "jacobian",
    "solve_path",
    "DIAGNOSTIC_KEYS",
]

DIAGNOSTIC_KEYS = ("l2_sq", "h1_sq", "lqp1", "linf", "newton_iters")


class NewtonError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PathFailure(RuntimeError):
    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    n_steps: int
    newton_tol: float | None = None  # None: 1e-10 * sqrt(domain area)
    newton_maxit: int = 30
    linear_tol: float = 1e-10
    linear_maxit: int = 5000
    noise_load: str = "interpolated"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.newton_tol is not None and not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if not self.linear_tol > 0 or self.newton_maxit < 1:
            raise ValueError("linear_tol and newton_maxit must be positive")
        if self.noise_load not in ("interpolated", "quadrature"):
            raise ValueError(f"noise_load must be 'interpolated' or 'quadrature', got {self.noise_load!r}")

    @property
    def final_time(self) -> float:
        return self.tau * self.n_steps

    def tolerance(self, area: float) -> float:
        return 1e-10 * math.sqrt(area) if self.newton_tol is None else self.newton_tol


@dataclass
class StepDiagnostics:
    newton_iters: int
    residual: float
    residual_history: list[float] = field(default_factory=list)
    linear_iters: int = 0


@dataclass
class Trajectory:
    """Per-step diagnostics for ``n = 0..N`` and the requested snapshots."""

    tau: float
    snapshots: dict[int, np.ndarray]
    diagnostics: dict[str, np.ndarray]

    @property
    def n_steps(self) -> int:
        return self.diagnostics["l2_sq"].shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)


def _system_matrix(space: FESpace, tau: float) -> SparseMatrix:
    cache = space.__dict__.setdefault("_system_cache", {})
    if tau not in cache:
        cache[tau] = space.mass.with_values(space.mass.values + tau * space.stiffness.values)
    return cache[tau]


def residual(U, rhs, model: ModelSpec, tau: float, space: FESpace) -> np.ndarray:
    """``R(U) = (M + tau K) U - tau M f(U) - rhs``."""
    A = _system_matrix(space, tau)
    return A @ U - tau * (space.mass @ model.f(U)) - rhs


def jacobian(U, model: ModelSpec, tau: float, space: FESpace) -> SparseMatrix:
    """``J = M + tau K - tau M diag(f'(U))``."""
    M = space.mass
    A = _system_matrix(space, tau)
    d = model.df(U)
    return A.with_values(A.values - tau * M.values * d[M.column_indices])


def newton_solve(rhs, u_init, model: ModelSpec, cfg: SchemeConfig, space: FESpace):
    """Newton iteration for one implicit step.

    Returns ``(U, StepDiagnostics)``.  Raises :class:`NewtonError` when
    the residual grows three iterations in a row or the iteration budget
    runs out.
    """
    tol = cfg.tolerance(space.area)
    U = np.array(u_init, dtype=float)
    R = residual(U, rhs, model, cfg.tau, space)
    r = norm2(R)
    history = [r]
    growth = 0
    lin_iters = 0
    it = 0
    while r > tol:
        if it >= cfg.newton_maxit:
            raise NewtonError(f"Newton did not converge in {it} iterations (residual {r:.3e})", r, it)
        J = jacobian(U, model, cfg.tau, space)
        dU, rep = bicgstab_solve(J, R, tol=cfg.linear_tol, maxit=cfg.linear_maxit)
        lin_iters += rep.iterations
        if not rep.converged:
            raise NewtonError(
                f"inner BiCGSTAB failed at Newton iteration {it + 1} "
                f"(relative residual {rep.final_residual_norm / max(rep.initial_residual_norm, 1e-300):.3e})",
                r,
                it,
            )
        U -= dU
        it += 1
        R = residual(U, rhs, model, cfg.tau, space)
        r_new = norm2(R)
        if not np.isfinite(r_new):
            raise NewtonError(f"Newton residual became non-finite at iteration {it}", r_new, it)
        growth = growth + 1 if r_new > r else 0
        r = r_new
        history.append(r)
        if growth >= 3:
            raise NewtonError(f"Newton diverging: residual grew 3 iterations in a row ({r:.3e})", r, it)
    return U, StepDiagnostics(it, r, history, lin_iters)


def noise_load(u_n, model: ModelSpec, cfg: SchemeConfig, space: FESpace) -> np.ndarray:
    if cfg.noise_load == "interpolated":
        return space.mass @ model.g(u_n)
    return composed_load(space.mesh, u_n, model.g)


def step(u_n, dW: float, model: ModelSpec, cfg: SchemeConfig, space: FESpace):
    """Advance one step; returns ``(U, StepDiagnostics)``."""
    u_n = np.asarray(u_n, dtype=float)
    rhs = space.mass @ u_n
    if dW != 0.0 and model.diffusion.delta != 0.0:
        rhs = rhs + dW * noise_load(u_n, model, cfg, space)
    A = _system_matrix(space, cfg.tau)
    U0, rep = cg_solve(A, rhs, tol=cfg.linear_tol, maxit=cfg.linear_maxit, x0=u_n)
    if not rep.converged:
        raise NewtonError("CG failed on the Newton initial guess", rep.final_residual_norm, 0)
    U, diag = newton_solve(rhs, U0, model, cfg, space)
    diag.linear_iters += rep.iterations
    return U, diag


def _lqp1_exponent(model: ModelSpec) -> int:
    return max(model.q, 1) + 1


def solve_path(
    u0,
    path: WienerPath,
    model: ModelSpec,
    cfg: SchemeConfig,
    space: FESpace,
    snapshot_steps=(),
) -> Trajectory:
    """Run ``cfg.n_steps`` steps driven by ``path`` and record diagnostics."""
    if path.n_steps < cfg.n_steps:
        raise ValueError(f"path has {path.n_steps} increments, need {cfg.n_steps}")
    if not math.isclose(path.tau, cfg.tau, rel_tol=1e-12):
        raise ValueError(f"path step {path.tau} does not match scheme step {cfg.tau}")
    snaps = sorted(set(int(s) for s in snapshot_steps))
    if snaps and (snaps[0] < 0 or snaps[-1] > cfg.n_steps):
        raise ValueError(f"snapshot steps must lie in [0, {cfg.n_steps}]")
    p = _lqp1_exponent(model)
    n = cfg.n_steps
    diag = {k: np.zeros(n + 1) for k in DIAGNOSTIC_KEYS}
    snapshots: dict[int, np.ndarray] = {}

    def record(k, u, iters):
        diag["l2_sq"][k] = space.l2_sq(u)
        diag["h1_sq"][k] = space.h1_sq(u)
        diag["lqp1"][k] = space.lp_integral(u, p)
        diag["linf"][k] = np.max(np.abs(u))
        diag["newton_iters"][k] = iters
        if k in snaps:
            snapshots[k] = u.copy()

    u = np.array(u0, dtype=float)
    record(0, u, 0)
    for k in range(n):
        try:
            u, sd = step(u, float(path.increments[k]), model, cfg, space)
        except (NewtonError, FloatingPointError) as exc:
            raise PathFailure(f"step {k + 1} failed: {exc}", k + 1) from exc
        record(k + 1, u, sd.newton_iters)
    return Trajectory(cfg.tau, snapshots, diag)
