"""Proximal map of the action density ``(a, b) -> |b|^2 / m(a)``."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, NumericalError
from ..mobility import MOBILITY_FLOOR, MobilitySpec


def _reduced_derivatives(x, a, bb, sigma, spec):
    """First and second derivative of the scalar problem in ``a*``.

    After eliminating ``b* = b m / (m + 2 sigma)`` the objective in ``a*`` is
    ``(x - a)^2 / (2 sigma) + |b|^2 / (m(x) + 2 sigma)``.
    """
    m = np.maximum(spec.evaluate(x), MOBILITY_FLOOR)
    m1 = spec.evaluate(x, 1)
    m2 = spec.evaluate(x, 2)
    q = m + 2.0 * sigma
    # m' is infinite at zero shift and r = 0; without momentum the term vanishes.
    with np.errstate(invalid="ignore"):
        t1 = np.where(bb > 0, bb * m1 / q ** 2, 0.0)
        t2 = np.where(bb > 0, bb * (m2 * q - 2.0 * m1 ** 2) / q ** 3, 0.0)
    return (x - a) / sigma - t1, 1.0 / sigma - t2


def prox_action_batch(a, b, sigma, spec: MobilitySpec, newton_tol=1e-12,
                      newton_max=50):
    """Vectorized prox over many cells.

    ``a`` has shape ``(n,)``, ``b`` has shape ``(n, k)``; ``sigma`` is a
    scalar or an ``(n,)`` array. Returns ``(a_star, b_star)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), a.shape)
    if np.any(sigma <= 0):
        raise DomainError("prox parameter sigma must be positive")
    bb = np.sum(b * b, axis=-1)
    x = np.maximum(a, 0.0)

    if spec.exponent > 0:
        lo = x.copy()
        d1_lo, _ = _reduced_derivatives(lo, a, bb, sigma, spec)
        act = np.flatnonzero(d1_lo < 0)
        if act.size:
            x[act] = _solve_root(lo[act], a[act], bb[act], sigma[act], spec,
                                 newton_tol, newton_max)
    m = np.maximum(spec.evaluate(x), MOBILITY_FLOOR) if spec.exponent > 0 \
        else spec.evaluate(x)
    b_star = b * (m / (m + 2.0 * sigma))[..., None]
    return x, b_star


def _solve_root(lo, a, bb, sigma, spec, tol, max_iter):
    # Upper end of the bracket: one explicit step from lo, then doubled
    # until the derivative changes sign (needed for convex mobilities).
    d1, _ = _reduced_derivatives(lo, a, bb, sigma, spec)
    scale = np.maximum(1.0, np.abs(a))
    step = np.where(np.isfinite(d1), np.minimum(-sigma * d1, scale), scale)
    # A step lost to rounding would leave a zero-width bracket that never grows;
    # a huge one (steep mobility near zero) would defeat bisection.
    hi = lo + np.maximum(step, 1e-8 * np.maximum(1.0, np.abs(lo)))
    for _ in range(200):
        d1_hi, _ = _reduced_derivatives(hi, a, bb, sigma, spec)
        bad = d1_hi < 0
        if not np.any(bad):
            break
        hi[bad] = lo[bad] + 2.0 * (hi[bad] - lo[bad])
    x = 0.5 * (lo + hi)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(max_iter):
        d1, d2 = _reduced_derivatives(x, a, bb, sigma, spec)
        neg = d1 < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = d1 / d2
            trial = x - step
        ok = (d2 > 0) & (trial > lo) & (trial < hi)
        new = np.where(ok, trial, 0.5 * (lo + hi))
        scale = np.maximum(1.0, np.abs(new))
        done = (np.abs(new - x) <= tol * scale) | (hi - lo <= tol * scale)
        x = new
        if np.all(done):
            return x
    k = int(np.flatnonzero(~done)[0])
    raise NumericalError("prox Newton iteration failed",
                         a=float(a[k]), b_norm_sq=float(bb[k]), sigma=float(sigma[k]))


def prox_action(a: float, b, sigma: float, spec: MobilitySpec, newton_tol=1e-12,
                newton_max=50):
    """Minimize ``|b*-b|^2/(2 sigma) + |a*-a|^2/(2 sigma) + |b*|^2/m(a*)``
    over ``a* >= 0``; returns ``(a*, b*)``."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    xs, bs = prox_action_batch(np.array([a]), b[None, :], sigma, spec,
                               newton_tol, newton_max)
    return float(xs[0]), bs[0]
