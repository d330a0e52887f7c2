"""Quantitative checks on trajectories: norms, decay-rate fits, Lyapunov
budgets, entropy decay and level-set truncation.

Every check is read-only: it never modifies the trajectory it inspects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError
from .jko import JkoTrajectory
from .mobility import EntropyGenerator, MobilitySpec, entropy_G, u_functional
from .reference import ReferenceRun
from .spectral import ScalarField

K_SEARCH_MAX = 10 ** 6


def lp_norm(u: ScalarField, p: float) -> float:
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    a = np.abs(u.values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * u.grid.cell_volume) ** (1.0 / p))


def predicted_decay_slope(p: float, dim: int, alpha: float, s: float) -> float:
    return -(1.0 - 1.0 / p) * dim / (dim * alpha + 2.0 * (1.0 - s))


# -- lambda(k0, L) ------------------------------------------------------------

@dataclass(frozen=True)
class LambdaConstant:
    k0: int
    L: int
    d: int
    alpha: float
    s: float
    c: float
    value: float
    attained_at_tail: bool


def lambda_constant_details(k0, L, d, alpha, s, c) -> LambdaConstant:
    """``c / sup_{1<=n<=L} sup_{k>=k0} k ((1 + 1/(k-1))^e_n - 1)`` with
    ``e_n = (2^n - 1) d / (d alpha + 2 (1 - s))``.

    The inner sup is taken over integers ``k0..10^6`` and the ``k -> inf``
    limit ``e_n``.
    """
    if int(k0) != k0 or k0 < 2:
        raise DomainError("k0 must be an integer >= 2")
    if int(L) != L or L < 1:
        raise DomainError("L must be a positive integer")
    if not c > 0:
        raise DomainError("c must be positive")
    k = np.arange(int(k0), K_SEARCH_MAX + 1, dtype=float)
    base = np.log1p(1.0 / (k - 1.0))
    best, tail_wins = -np.inf, False
    for n in range(1, int(L) + 1):
        e = (2.0 ** n - 1.0) * d / (d * alpha + 2.0 * (1.0 - s))
        # k ((k/(k-1))^e - 1) decreases to e, so the tail only wins when
        # k0 lies beyond the search range.
        finite = float(np.max(k * np.expm1(e * base))) if k.size else -np.inf
        if e >= finite:
            cand, at_tail = e, True
        else:
            cand, at_tail = finite, False
        if cand > best:
            best, tail_wins = cand, at_tail
    return LambdaConstant(int(k0), int(L), d, alpha, s, c, c / best, tail_wins)


def lambda_constant(k0, L, d, alpha, s, c) -> float:
    return lambda_constant_details(k0, L, d, alpha, s, c).value


# -- decay-rate fit -----------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    p: float
    window: tuple
    fitted_slope: float
    predicted_slope: float
    relative_error: float
    n_samples: int


def _series(source, p):
    if isinstance(source, JkoTrajectory):
        times = source.times
        return times, np.array([lp_norm(u, p) for u in source.states]), \
            source.states[0].grid.dim, source.mobility.exponent, source.s
    if isinstance(source, ReferenceRun):
        return np.asarray(source.times), \
            np.array([lp_norm(u, p) for u in source.states]), \
            source.states[0].grid.dim, None, None
    times, norms = source
    return np.asarray(times, dtype=float), np.asarray(norms, dtype=float), None, None, None


def decay_rate_fit(source, p: float = 2.0, window=(0.5, 4.0), dim=None, alpha=None,
                   s=None) -> DecayFit:
    """Least-squares slope of ``log ||u(t)||_p`` against ``log t`` in ``window``.

    ``source`` is a trajectory, a reference run or a ``(times, norms)``
    pair. Missing model parameters are taken from the trajectory when
    possible; without them the predicted slope is NaN.
    """
    times, norms, d0, a0, s0 = _series(source, p)
    dim = d0 if dim is None else dim
    alpha = a0 if alpha is None else alpha
    s = s0 if s is None else s
    t_lo, t_hi = window
    sel = (times >= t_lo) & (times <= t_hi) & (times > 0)
    t, y = times[sel], norms[sel]
    if t.size < 8 or t.max() < 4.0 * t.min():
        raise DomainError(
            f"window {window} holds {t.size} samples spanning factor "
            f"{(t.max() / t.min()) if t.size else 0:.3g}; need >= 8 spanning >= 4")
    if np.any(y <= 0):
        raise DomainError("norms must be positive for a log-log fit")
    slope = float(np.polyfit(np.log(t), np.log(y), 1)[0])
    if None in (dim, alpha, s):
        pred = float("nan")
    else:
        pred = predicted_decay_slope(p, dim, alpha, s)
    rel = abs(slope - pred) / abs(pred) if pred == pred and pred != 0 else float("nan")
    return DecayFit(p, (t_lo, t_hi), slope, pred, rel, int(t.size))


# -- Lyapunov budget ----------------------------------------------------------

@dataclass(frozen=True)
class LyapunovReport:
    slacks: np.ndarray
    tolerances: np.ndarray
    cumulative_slacks: np.ndarray
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def lyapunov_check(traj: JkoTrajectory, spec: MobilitySpec | None = None,
                   rel_tol: float = 0.05, abs_tol: float = 1e-8) -> LyapunovReport:
    """Per-step slack ``U(u_{k-1}) - U(u_k) - tau ||u_k||^2_{H^{1-s}}``.

    A step is flagged when its slack is below ``-(rel_tol * tau ||u_k||^2
    + abs_tol)``. The cumulative slack is ``U(u_0) - U(u_k) - sum tau ||u_j||^2``.
    """
    if spec is None:
        U = np.asarray(traj.u_functionals, dtype=float)
    else:
        U = np.array([u_functional(spec, u) for u in traj.states])
    dissip = traj.tau * np.asarray(traj.h1ms_norms[1:], dtype=float)
    slack = U[:-1] - U[1:] - dissip
    tol = rel_tol * dissip + abs_tol
    cumulative = U[0] - U[1:] - np.cumsum(dissip)
    bad = tuple(int(k) + 1 for k in np.flatnonzero(slack < -tol))
    bad += tuple(int(k) + 1 for k in np.flatnonzero(cumulative < -np.cumsum(tol))
                 if int(k) + 1 not in bad)
    return LyapunovReport(slack, tol, cumulative, tuple(sorted(bad)))


# -- entropy decay ------------------------------------------------------------

def entropy_values(traj: JkoTrajectory, gen: EntropyGenerator) -> np.ndarray:
    """``int g(u_k)`` for each state."""
    return np.array([float(np.sum(gen.value(u.values)) * u.grid.cell_volume)
                     for u in traj.states])


@dataclass(frozen=True)
class EntropyReport:
    decrements: np.ndarray
    gradient_terms: np.ndarray
    ratios: np.ndarray
    min_ratio: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def entropy_monotonicity(traj: JkoTrajectory, gen: EntropyGenerator,
                         tol: float = 1e-6) -> tuple[np.ndarray, tuple]:
    """Decrements ``int g(u_{k-1}) - int g(u_k)`` and the steps where they
    fall below ``-tol``."""
    vals = entropy_values(traj, gen)
    dec = vals[:-1] - vals[1:]
    return dec, tuple(int(k) + 1 for k in np.flatnonzero(dec < -tol))


def entropy_decay_check(traj: JkoTrajectory, spec: MobilitySpec, gen: EntropyGenerator,
                        tol: float = 1e-6) -> EntropyReport:
    """Compare the entropy decrement with ``tau ||G(u_k)||^2_{L^q}``,
    ``q = 2d / (d - 2(1 - s))``.

    Only the sign of the decrement is asserted; the ratio decrement /
    gradient term estimates the unknown Sobolev constant and is recorded.
    """
    d = traj.states[0].grid.dim
    s = traj.s
    if not d > 2.0 * (1.0 - s):
        raise ConfigError(f"entropy decay needs d > 2(1-s); d={d}, s={s}")
    q = 2.0 * d / (d - 2.0 * (1.0 - s))
    dec, bad = entropy_monotonicity(traj, gen, tol)
    terms = []
    for u in traj.states[1:]:
        G = entropy_G(spec, gen, u.values)
        nq = float(np.sum(np.abs(G) ** q) * u.grid.cell_volume) ** (1.0 / q)
        terms.append(traj.tau * nq * nq)
    terms = np.array(terms)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(terms > 0, dec / terms, np.nan)
    finite = ratios[np.isfinite(ratios)]
    min_ratio = float(finite.min()) if finite.size else float("nan")
    return EntropyReport(dec, terms, ratios, min_ratio, bad)


# -- level-set truncation -----------------------------------------------------

@dataclass(frozen=True)
class TruncationReport:
    lam: float
    energies: np.ndarray
    violations: tuple
    sup_after: float
    integral_after: float
    implied_constant: float

    @property
    def ok(self) -> bool:
        return not self.violations


def truncated_energies(traj: JkoTrajectory, lam: float) -> np.ndarray:
    return np.array([float(np.sum(np.maximum(u.values - lam, 0.0) ** 2) * u.grid.cell_volume)
                     for u in traj.states])


def truncated_energy_check(traj: JkoTrajectory, lam: float, tol: float = 1e-10,
                           t_start: float = 0.0) -> TruncationReport:
    """Per-step monotonicity of ``||(u_k - lam)_+||_2^2`` and the statistics
    after ``t_start``: the sup of the truncated energy and the time
    integral of ``||(u - lam)_+||_q^(alpha+2)``, ``q = (alpha+2) d / (d - 2(1-s))``
    (NaN when ``d <= 2(1-s)``). ``implied_constant`` is their sum divided by
    the truncated energy at ``t_start``.
    """
    if lam < 0:
        raise DomainError("threshold must be nonnegative")
    e = truncated_energies(traj, lam)
    bad = tuple(int(k) + 1 for k in np.flatnonzero(e[1:] > e[:-1] + tol))
    times = traj.times
    after = times >= t_start
    if not np.any(after):
        raise DomainError(f"no states at or after t={t_start}")
    sup_after = float(e[after].max())
    d = traj.states[0].grid.dim
    a = traj.mobility.exponent
    integral = float("nan")
    if d > 2.0 * (1.0 - traj.s):
        q = (a + 2.0) * d / (d - 2.0 * (1.0 - traj.s))
        later = times > t_start + traj.tau * (1 - 1e-9)
        integral = 0.0
        for u in (traj.states[k] for k in np.flatnonzero(later)):
            v = np.maximum(u.values - lam, 0.0)
            integral += traj.tau * (np.sum(v ** q) * u.grid.cell_volume) ** ((a + 2.0) / q)
    base = e[int(np.flatnonzero(after)[0])]
    total = sup_after + (0.0 if integral != integral else integral)
    implied = total / base if base > 0 else float("nan")
    return TruncationReport(lam, e, bad, sup_after, integral, implied)


def truncation_level_scan(traj: JkoTrajectory, threshold: float,
                          t_start: float = 1.0) -> float:
    """Smallest level ``lam`` with ``sup_{t >= t_start} ||(u(t) - lam)_+||_2 <= threshold``.

    The left side is continuous and nonincreasing in ``lam``, so the level
    is the root of a bracketed scalar equation.
    """
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    after = [traj.states[k].values for k in np.flatnonzero(traj.times >= t_start)]
    if not after:
        raise DomainError(f"no states at or after t={t_start}")
    h = traj.states[0].grid.cell_volume

    def excess(lam):
        return max(math.sqrt(np.sum(np.maximum(v - lam, 0.0) ** 2) * h) for v in after) - threshold

    top = max(float(v.max()) for v in after)
    if top <= 0 or excess(0.0) <= 0:
        return 0.0
    return float(brentq(excess, 0.0, top, xtol=1e-12 * top, rtol=1e-12))


def truncation_tau_exponent(d: int, alpha: float, s: float) -> float:
    """Exponent ``d (alpha + 1) / (2 (1 - s)) + 2`` of the small-tau bound
    on truncated energies past ``t = 1``."""
    return d * (alpha + 1.0) / (2.0 * (1.0 - s)) + 2.0

