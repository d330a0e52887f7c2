"""Minimizing-movement scheme for the Riesz-energy gradient flow.

Each step solves

    u_k = argmin_u  W_m(u, u_{k-1})^2 / (2 tau) + 1/2 ||u||^2_{H^-s}

as one dynamic transport problem whose final slice is free and carries
the quadratic Riesz energy. Energies use the mean-zero convention: the
``k = 0`` mode carries no ``H^-s`` weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import (ConfigError, DomainError, InvariantViolation, JkoFlowError,
                     StepError)
from .mobility import MobilitySpec, u_functional
from .spectral import ScalarField, TorusGrid, check_order, sobolev_norm_sq
from .transport import (DynamicProblem, SolverOptions, TransportPath, action,
                        continuity_residual, feasible_momentum, run_solver)
from .transport import POSITIVITY_MIX

SHIFT_EXPONENT = 0.1
MAX_DENSE_CELLS = 4096


@dataclass(frozen=True)
class JkoConfig:
    """Outer-scheme parameters.

    With ``auto_shift`` the mobility's tau-dependent parameter (``epsilon``
    or ``beta``) is overwritten by ``shift_constant * tau**0.1``.
    """

    tau: float
    n_steps: int
    s: float
    mobility: MobilitySpec
    inner: SolverOptions = field(default_factory=SolverOptions)
    n_time: int = 8
    auto_shift: bool = False
    shift_constant: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ConfigError(f"n_steps must be a nonnegative integer, got {self.n_steps}")
        if self.n_time < 1:
            raise ConfigError("n_time must be at least 1")
        if not (0.0 < self.s < 1.0):
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if self.auto_shift:
            object.__setattr__(self, "mobility", self.mobility.with_shift(
                self.shift_constant * self.tau ** SHIFT_EXPONENT))


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    distance_sq: float
    energy: float
    objective: float
    iterations: int
    gap: float
    residual: float
    warm_started: bool
    path: TransportPath | None = None


@dataclass(eq=False)
class JkoTrajectory:
    """States ``u_0 .. u_K`` with per-state bookkeeping.

    ``distances_sq[k]`` is the squared distance between ``u_k`` and
    ``u_{k-1}``; entry 0 is 0 by convention.
    """

    tau: float
    s: float
    mobility: MobilitySpec
    states: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    distances_sq: list = field(default_factory=list)
    u_functionals: list = field(default_factory=list)
    h1ms_norms: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.tau

    def record(self, u: ScalarField, distance_sq: float, iterations: int = 0):
        self.states.append(u)
        self.energies.append(riesz_energy(u, self.s))
        self.distances_sq.append(float(distance_sq))
        try:
            self.u_functionals.append(u_functional(self.mobility, u))
        except DomainError:
            self.u_functionals.append(float("nan"))
        self.h1ms_norms.append(sobolev_norm_sq(u, 1.0 - self.s))
        self.iterations.append(int(iterations))


def riesz_energy(u: ScalarField, s: float) -> float:
    return 0.5 * sobolev_norm_sq(u, -s)


@lru_cache(maxsize=8)
def riesz_matrix(grid: TorusGrid, s: float) -> np.ndarray:
    """Dense matrix ``M`` with ``1/2 u' M u = 1/2 ||u||^2_{H^-s}``."""
    n = grid.size
    eye = np.eye(n).reshape((n,) + grid.shape)
    axes = tuple(range(1, grid.dim + 1))
    sym = grid.symbol(-s)
    cols = np.fft.ifftn(np.fft.fftn(eye, axes=axes) * sym, axes=axes).real
    mat = cols.reshape(n, n) * grid.cell_volume
    mat = 0.5 * (mat + mat.T)
    mat.flags.writeable = False
    return mat


def _warm_path(warm: TransportPath, u_prev: np.ndarray, n_time: int):
    """Previous path shifted so that it starts at ``u_prev``; keeps the
    continuity equation because slice increments are unchanged."""
    if warm is None or warm.n_time != n_time:
        return None
    rho = u_prev[None] + (warm.rho - warm.rho[0][None])
    if np.any(rho[1:] <= 0):
        return None
    return rho, np.array(warm.w)


def jko_step(u_prev: ScalarField, cfg: JkoConfig, warm: TransportPath | None = None):
    """One minimizing-movement step; returns ``(u_next, StepDiagnostics)``."""
    grid = u_prev.grid
    check_order(cfg.s, grid.dim)
    if np.any(u_prev.values < 0):
        raise DomainError("previous state has negative values")
    if grid.size > MAX_DENSE_CELLS:
        raise ConfigError(f"JKO steps support at most {MAX_DENSE_CELLS} cells")
    e_prev = riesz_energy(u_prev, cfg.s)
    if e_prev == 0.0:
        return u_prev, StepDiagnostics(0.0, 0.0, 0.0, 0, 0.0, 0.0, False, None)

    n_time = cfg.n_time
    coef = grid.cell_volume / (n_time * 2.0 * cfg.tau)
    problem = DynamicProblem(grid, n_time, cfg.mobility, u_prev.values,
                             terminal=riesz_matrix(grid, cfg.s), coef=coef)
    start = _warm_path(warm, u_prev.values, n_time)
    warm_started = start is not None
    if start is None:
        u = u_prev.values
        rho = np.broadcast_to(u, (n_time + 1,) + grid.shape).copy()
        rho[1:] = (1.0 - POSITIVITY_MIX) * u + POSITIVITY_MIX * u.mean()
        w = (feasible_momentum(grid, rho, cfg.mobility) if cfg.inner.method == "barrier"
             else np.zeros((n_time, grid.dim) + grid.shape))
        start = (rho, w)
    opts = cfg.inner
    if warm_started and opts.method == "barrier":
        opts = replace(opts, start_gap=min(opts.start_gap, 1e-5))
    res = run_solver(problem, problem.pack(*start), opts)
    rho, w = problem.unpack(res.x)
    path = TransportPath(grid, rho, w)
    u_next = ScalarField(grid, rho[-1])
    dist = action(path, cfg.mobility)
    energy = riesz_energy(u_next, cfg.s)
    objective = dist / (2.0 * cfg.tau) + energy
    slack = 10.0 * cfg.inner.tol_gap * e_prev + 1e-14
    if objective > e_prev + slack:
        raise InvariantViolation(
            f"step objective {objective!r} exceeds previous energy {e_prev!r}")
    resid, _ = continuity_residual(path)
    return u_next, StepDiagnostics(dist, energy, objective, res.iterations, res.gap,
                                   resid, warm_started, path)


def run_scheme(u0: ScalarField, cfg: JkoConfig, callback=None) -> JkoTrajectory:
    """Chain ``cfg.n_steps`` steps from ``u0`` with full bookkeeping.

    ``callback(k, u_k, diagnostics)`` is called after every step.
    """
    if np.any(u0.values < 0):
        raise DomainError("initial density has negative values")
    check_order(cfg.s, u0.grid.dim)
    traj = JkoTrajectory(cfg.tau, cfg.s, cfg.mobility)
    traj.record(u0, 0.0)
    u, warm = u0, None
    for k in range(1, cfg.n_steps + 1):
        try:
            u, diag = jko_step(u, cfg, warm)
        except StepError:
            raise
        except InvariantViolation as exc:
            raise InvariantViolation(f"step {k}: {exc}") from exc
        except JkoFlowError as exc:
            raise StepError(str(exc), step=k) from exc
        warm = diag.path
        traj.record(u, diag.distance_sq, diag.iterations)
        if callback is not None:
            callback(k, u, diag)
    return traj


def interpolant_at(traj: JkoTrajectory, t: float, tau: float | None = None) -> ScalarField:
    """Piecewise-constant interpolant: ``u_k`` on ``((k-1) tau, k tau]``."""
    tau = traj.tau if tau is None else tau
    K = traj.n_steps
    q = t / tau
    if not (t >= 0) or q > K * (1 + 1e-12):
        raise DomainError(f"time {t} outside [0, {K * tau}]")
    k = round(q)
    if abs(q - k) > 1e-9 * max(1.0, q):
        k = math.ceil(q)
    return traj.states[min(int(k), K)]
