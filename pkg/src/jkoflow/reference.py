"""Independent oracles: exact fractional heat flow, an explicit upwind
scheme for the nonlocal-pressure porous medium equation, and exact 1-D
quadratic optimal transport."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CflError, DomainError, NumericalError
from .spectral import (ScalarField, apply_symbol, check_order, riesz_potential,
                       spectral_face_gradient)

CFL_SAFETY = 0.4


def exact_fractional_heat(u0: ScalarField, t: float, s: float) -> ScalarField:
    """Solve ``du/dt + (-Δ)^(1-s) u = 0`` exactly in Fourier space."""
    check_order(s, u0.grid.dim)
    if t < 0:
        raise DomainError("time must be nonnegative")
    if t == 0:
        return u0
    decay = np.exp(-u0.grid.wavenumber ** (2.0 * (1.0 - s)) * t)
    return apply_symbol(u0, decay)


@dataclass(frozen=True)
class CflReport:
    max_dt: float
    max_speed: float
    max_pressure_gradient: float


@dataclass(frozen=True)
class PmeStepReport:
    clipped_mass: float
    cfl: CflReport


def _face_densities(u, grad_p, upwind):
    """Density on each face, upwinded along the velocity ``-grad p``."""
    out = np.empty_like(grad_p)
    for a in range(u.ndim):
        right = np.roll(u, -1, axis=a)
        if upwind:
            out[a] = np.where(grad_p[a] < 0, u, right)
        else:
            out[a] = 0.5 * (u + right)
    return out


def _pressure_terms(u: ScalarField, s):
    grad_p = spectral_face_gradient(riesz_potential(u, s))
    return grad_p


def cfl_report(u: ScalarField, alpha: float, s: float) -> CflReport:
    """Stability bound for :func:`explicit_pme_step`.

    Two restrictions are combined: the upwind transport limit
    ``dt <= h / (d * max speed)`` with speed ``u^(alpha-1) |grad p|`` and the
    explicit limit for the linearized nonlocal diffusion
    ``dt <= 1 / (max u^alpha * kmax^(2(1-s)))``. A state with vanishing
    pressure gradient is stationary and gets ``dt = inf``.
    """
    g = u.grid
    grad_p = _pressure_terms(u, s)
    gmax = float(np.max(np.abs(grad_p)))
    if gmax == 0.0:
        return CflReport(math.inf, 0.0, 0.0)
    face = _face_densities(u.values, grad_p, True)
    pos = face > 0
    speed = np.zeros_like(face)
    speed[pos] = face[pos] ** (alpha - 1.0) * np.abs(grad_p[pos])
    vmax = float(speed.max())
    kmax = math.pi * math.sqrt(g.dim) / g.spacing
    umax = float(np.max(u.values))
    limits = [1.0 / (umax ** alpha * kmax ** (2.0 * (1.0 - s)))] if umax > 0 else []
    if vmax > 0:
        limits.append(g.spacing / (g.dim * vmax))
    dt = CFL_SAFETY * min(limits) if limits else math.inf
    return CflReport(dt, vmax, gmax)


def explicit_pme_step(u: ScalarField, dt: float, alpha: float, s: float,
                      upwind: bool = True, check_cfl: bool = True):
    """One forward-Euler step of ``du/dt = div(u^alpha grad (-Δ)^(-s) u)``.

    Returns ``(u_next, PmeStepReport)``. Negative undershoots are clipped
    and the positive part rescaled so that the mass is unchanged.
    """
    if np.any(u.values < 0):
        raise DomainError("density must be nonnegative")
    g = u.grid
    report = cfl_report(u, alpha, s)
    if check_cfl and dt > report.max_dt:
        raise CflError(f"dt={dt} exceeds the stability bound {report.max_dt}", report)
    grad_p = _pressure_terms(u, s)
    flux = _face_densities(u.values, grad_p, upwind) ** alpha * grad_p
    h = g.spacing
    div = sum((flux[a] - np.roll(flux[a], 1, axis=a)) / h for a in range(g.dim))
    new = u.values + dt * div
    if not np.all(np.isfinite(new)):
        raise NumericalError("non-finite value in explicit step")
    clipped = 0.0
    if np.any(new < 0):
        mass = new.sum()
        clipped = float(-new[new < 0].sum() * g.cell_volume)
        new = np.maximum(new, 0.0)
        new *= mass / new.sum()
    return ScalarField(g, new), PmeStepReport(clipped, report)


@dataclass(eq=False)
class ReferenceRun:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0
    clipped_mass: float = 0.0
    max_norm_increase: float = 0.0


def run_reference(u0: ScalarField, alpha: float, s: float, sample_times,
                  max_dt: float | None = None, upwind: bool = True) -> ReferenceRun:
    """Integrate with adaptive CFL-limited steps, hitting each sample time."""
    sample_times = sorted(float(t) for t in sample_times)
    run = ReferenceRun()
    u, t = u0, 0.0
    if sample_times and sample_times[0] == 0.0:
        run.times.append(0.0)
        run.states.append(u0)
        sample_times = sample_times[1:]
    for target in sample_times:
        while t < target:
            dt = cfl_report(u, alpha, s).max_dt
            if max_dt is not None:
                dt = min(dt, max_dt)
            last = target - t <= dt * (1 + 1e-12)
            dt = target - t if last else dt
            prev_max = float(u.values.max())
            u, rep = explicit_pme_step(u, dt, alpha, s, upwind)
            run.clipped_mass += rep.clipped_mass
            run.max_norm_increase = max(run.max_norm_increase,
                                        float(u.values.max()) - prev_max)
            run.steps += 1
            t = target if last else t + dt
        run.times.append(t)
        run.states.append(u)
    return run


def ot_1d_exact(rho0: ScalarField, rho1: ScalarField, n_quantiles: int = 20000) -> float:
    """Quadratic transport distance in 1-D by quantile coupling on ``[0, L)``.

    Densities are piecewise constant on cells, so each CDF is piecewise
    linear and its inverse is exact on the quantile grid.
    """
    g = rho0.grid
    if g.dim != 1 or rho1.grid != g:
        raise DomainError("ot_1d_exact needs two densities on the same 1-D grid")
    if n_quantiles < 10000:
        raise DomainError("at least 10000 quantiles are required")
    for r in (rho0, rho1):
        if np.any(r.values < 0):
            raise DomainError("densities must be nonnegative")
    m0, m1 = rho0.integral(), rho1.integral()
    if abs(m0 - m1) > 1e-12 * max(abs(m0), abs(m1)):
        raise DomainError(f"mass mismatch: {m0!r} vs {m1!r}")
    if m0 == 0.0:
        return 0.0
    q = (np.arange(n_quantiles) + 0.5) / n_quantiles
    x0 = _quantiles(rho0.values, g.spacing, q * m0)
    x1 = _quantiles(rho1.values, g.spacing, q * m0)
    return float(math.sqrt(m0 * np.mean((x0 - x1) ** 2)))


def _quantiles(rho, h, levels):
    cdf = np.concatenate([[0.0], np.cumsum(rho) * h])
    j = np.clip(np.searchsorted(cdf, levels, side="right") - 1, 0, rho.size - 1)
    return j * h + (levels - cdf[j]) / rho[j]
