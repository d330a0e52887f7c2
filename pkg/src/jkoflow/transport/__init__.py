"""Mobility-weighted transport distances from the dynamic formulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError
from ..mobility import MobilitySpec
from ..spectral import ScalarField
from .interior_point import DynamicProblem, feasible_momentum, solve_barrier
from .path import (TransportPath, action, continuity_residual, face_average,
                   static_path)
from .pdhg import operator_norm, solve_pdhg
from .prox import prox_action, prox_action_batch

METHODS = ("barrier", "pdhg")
POSITIVITY_MIX = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    """Inner solver settings.

    ``method`` selects the barrier Newton solver (default) or the
    first-order primal-dual iteration. ``max_iters`` counts Newton steps
    for the former and primal-dual sweeps for the latter; ``None`` picks a
    per-method default. Step sizes are used by the primal-dual method only
    and default to ``0.9 / |K|``.
    """

    max_iters: int | None = None
    tol_residual: float = 1e-6
    tol_gap: float = 1e-7
    step_primal: float | None = None
    step_dual: float | None = None
    newton_tol: float = 1e-12
    newton_max: int = 50
    method: str = "barrier"
    face_average: str = "arithmetic"
    start_gap: float = 1e-3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown solver method {self.method!r}")
        if self.face_average != "arithmetic":
            raise ConfigError("only arithmetic face averaging is implemented")
        for name in ("tol_residual", "tol_gap", "newton_tol", "start_gap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def iteration_cap(self) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return 500 if self.method == "barrier" else 20000


@dataclass(frozen=True, eq=False)
class W2mResult:
    distance_sq: float
    path: TransportPath
    iterations: int
    primal_dual_gap: float
    residual_inf: float
    potential: np.ndarray | None = None


def run_solver(problem: DynamicProblem, x0, opts: SolverOptions):
    if opts.method == "barrier":
        return solve_barrier(problem, x0, opts.tol_gap, opts.tol_residual,
                             opts.iteration_cap(), opts.start_gap)
    return solve_pdhg(problem, x0, opts.tol_gap, opts.tol_residual,
                      opts.iteration_cap(), opts.step_primal, opts.step_dual,
                      opts.newton_tol, opts.newton_max)


def positive_interpolation(rho0, rho1, n_time):
    """Linear interpolation in time with a tiny uniform admixture on the
    interior slices so that the barrier start is strictly positive."""
    t = np.linspace(0.0, 1.0, n_time + 1).reshape((-1,) + (1,) * rho0.ndim)
    path = (1.0 - t) * rho0 + t * rho1
    mean = rho0.mean()
    path[1:-1] = (1.0 - POSITIVITY_MIX) * path[1:-1] + POSITIVITY_MIX * mean
    return path


def solve_w2m(rho0: ScalarField, rho1: ScalarField, spec: MobilitySpec,
              n_time: int = 32, opts: SolverOptions | None = None) -> W2mResult:
    """Squared mobility-weighted distance between two densities."""
    opts = opts or SolverOptions()
    if rho0.grid != rho1.grid:
        raise DomainError("densities live on different grids")
    if n_time < 2:
        raise ConfigError("n_time must be at least 2")
    for r in (rho0, rho1):
        if np.any(r.values < 0):
            raise DomainError("densities must be nonnegative")
    m0, m1 = rho0.integral(), rho1.integral()
    if abs(m0 - m1) > 1e-12 * max(abs(m0), abs(m1)):
        raise DomainError(f"mass mismatch: {m0!r} vs {m1!r}")
    grid = rho0.grid
    if np.array_equal(rho0.values, rho1.values):
        path = static_path(rho0, n_time)
        return W2mResult(0.0, path, 0, 0.0, 0.0)
    rho_path = positive_interpolation(rho0.values, rho1.values, n_time)
    if opts.method == "barrier":
        w0 = feasible_momentum(grid, rho_path, spec)
    else:
        w0 = np.zeros((n_time, grid.dim) + grid.shape)
    problem = DynamicProblem(grid, n_time, spec, rho0.values, rho1=rho1.values)
    res = run_solver(problem, problem.pack(rho_path, w0), opts)
    rho, w = problem.unpack(res.x)
    path = TransportPath(grid, rho, w)
    resid, _ = continuity_residual(path)
    return W2mResult(action(path, spec), path, res.iterations, res.gap, resid,
                     problem.potential_field(res.potential))


__all__ = [
    "SolverOptions", "TransportPath", "W2mResult", "action", "continuity_residual",
    "face_average", "feasible_momentum", "operator_norm", "prox_action",
    "prox_action_batch", "solve_w2m", "static_path", "DynamicProblem", "run_solver",
]
