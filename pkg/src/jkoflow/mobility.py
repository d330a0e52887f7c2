"""Mobility functions and the potentials derived from them.

Both supported families are shifted powers, ``m(r) = c (r + eps)^alpha``:

* ``power_shifted``: exponent ``alpha``, shift ``epsilon``;
* ``exponent_shifted``: ``(r + 1)^beta``, i.e. shift 1 and exponent ``beta``.

``scale`` (``c`` above, default 1) exists for constant-mobility test cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .spectral import ScalarField

POWER_SHIFTED = "power_shifted"
EXPONENT_SHIFTED = "exponent_shifted"
MOBILITY_FLOOR = 1e-13


@dataclass(frozen=True)
class MobilitySpec:
    kind: str = POWER_SHIFTED
    alpha: float = 1.0
    epsilon: float = 0.0
    beta: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == POWER_SHIFTED:
            if not (self.alpha >= 0 and math.isfinite(self.alpha)):
                raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
            if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
                raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        elif self.kind == EXPONENT_SHIFTED:
            if not (0.0 < self.beta < 1.0):
                raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        else:
            raise ConfigError(f"unknown mobility kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigError(f"scale must be positive, got {self.scale}")

    @classmethod
    def power_shifted(cls, alpha, epsilon, scale=1.0):
        return cls(POWER_SHIFTED, alpha=float(alpha), epsilon=float(epsilon),
                   scale=float(scale))

    @classmethod
    def exponent_shifted(cls, beta, scale=1.0):
        return cls(EXPONENT_SHIFTED, beta=float(beta), scale=float(scale))

    @classmethod
    def constant(cls, value=1.0):
        return cls(POWER_SHIFTED, alpha=0.0, epsilon=1.0, scale=float(value))

    @property
    def exponent(self) -> float:
        return self.alpha if self.kind == POWER_SHIFTED else self.beta

    @property
    def shift(self) -> float:
        return self.epsilon if self.kind == POWER_SHIFTED else 1.0

    def with_shift(self, value: float) -> MobilitySpec:
        """Replace the tau-dependent parameter (``epsilon`` or ``beta``)."""
        if self.kind == POWER_SHIFTED:
            return MobilitySpec.power_shifted(self.alpha, value, self.scale)
        return MobilitySpec.exponent_shifted(value, self.scale)

    def evaluate(self, r, order: int = 0):
        """``m`` or its ``order``-th derivative, without input checks."""
        a, e, c = self.exponent, self.shift, self.scale
        r = np.asarray(r, dtype=float)
        if a == 0.0:
            return np.full_like(r, c) if order == 0 else np.zeros_like(r)
        base = r + e
        coef = c
        for j in range(order):
            coef *= a - j
        if coef == 0.0:
            return np.zeros_like(r)
        with np.errstate(divide="ignore"):
            return coef * base ** (a - order)


def mobility(spec: MobilitySpec, r):
    """Return ``(m, m', m'')`` at ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("mobility needs finite r >= 0")
    out = tuple(spec.evaluate(r, k) for k in range(3))
    if r.ndim == 0:
        return tuple(float(v) for v in out)
    return out


def _binom(a, j):
    out = 1.0
    for i in range(j):
        out *= (a - i) / (i + 1)
    return out


def _potential_unit(alpha, x):
    """``V(x)`` with ``V'' = (1 + x)^-alpha``, ``V(0) = V'(0) = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-2
    xs = x[small]
    # Taylor series avoids cancellation for small x.
    out[small] = sum(_binom(-alpha, j) * xs ** (j + 2) / ((j + 1) * (j + 2))
                     for j in range(12))
    xl = x[~small]
    if alpha == 1.0:
        out[~small] = (1.0 + xl) * np.log1p(xl) - xl
    elif alpha == 2.0:
        out[~small] = xl - np.log1p(xl)
    else:
        out[~small] = (np.expm1((2.0 - alpha) * np.log1p(xl)) / ((1.0 - alpha) * (2.0 - alpha))
                       - xl / (1.0 - alpha))
    return out


def _check_density(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("non-finite density value")
    if np.any(r < 0):
        idx = np.argwhere(r < 0)[0] if r.ndim else ()
        raise DomainError(f"negative density at {tuple(int(i) for i in idx)}")
    return r


def u_potential(spec: MobilitySpec, r):
    """Convex potential ``U`` with ``U'' = 1/m`` and ``U(0) = U'(0) = 0``.

    Closed form through ``U(r) = eps^(2-alpha) V(r/eps) / scale``; the
    logarithmic cases ``alpha in {1, 2}`` are handled inside ``V``.
    """
    r = _check_density(r)
    a, e, c = spec.exponent, spec.shift, spec.scale
    if e == 0.0:
        if a >= 1.0:
            raise DomainError("U is unbounded for zero shift and alpha >= 1")
        out = r ** (2.0 - a) / ((1.0 - a) * (2.0 - a)) / c
    else:
        out = e ** (2.0 - a) * _potential_unit(a, r / e) / c
    return float(out) if out.ndim == 0 else out


def u_functional(spec: MobilitySpec, u: ScalarField) -> float:
    return float(np.sum(u_potential(spec, u.values)) * u.grid.cell_volume)


def u_bound_ratios(spec: MobilitySpec, r) -> np.ndarray:
    """Ratios ``U(r) / min(eps^-alpha r^2, r^(2-alpha))`` on positive ``r``.

    Their min and max are the constants of the two-sided comparison
    between ``U`` and the piecewise power profile.
    """
    r = np.asarray(r, dtype=float)
    a, e = spec.exponent, spec.shift
    ref = np.minimum(e ** -a * r * r, r ** (2.0 - a)) / spec.scale
    return u_potential(spec, r) / ref


POWER = "power"
TRUNCATED_POWER = "truncated_power"


@dataclass(frozen=True)
class EntropyGenerator:
    """``g(z) = z^p`` or ``g(z) = (z - lam)_+^p``."""

    kind: str = POWER
    p: float = 2.0
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in (POWER, TRUNCATED_POWER):
            raise ConfigError(f"unknown entropy generator {self.kind!r}")
        if not self.p > 1.0:
            raise ConfigError(f"entropy exponent must exceed 1, got {self.p}")
        if not self.lam >= 0.0:
            raise ConfigError(f"threshold must be >= 0, got {self.lam}")

    @property
    def norm_only(self) -> bool:
        """True when ``g''`` blows up at the origin (power with ``p < 2``)."""
        return self.kind == POWER and self.p < 2.0

    @property
    def lower(self) -> float:
        return self.lam if self.kind == TRUNCATED_POWER else 0.0

    def value(self, z):
        z = np.maximum(np.asarray(z, dtype=float) - self.lower, 0.0)
        return z ** self.p

    def second_derivative(self, z):
        z = np.maximum(np.asarray(z, dtype=float) - self.lower, 0.0)
        if self.p == 2.0:
            return np.where(z > 0, 2.0, 0.0) if self.kind == TRUNCATED_POWER \
                else np.full_like(z, 2.0)
        with np.errstate(divide="ignore"):
            return self.p * (self.p - 1.0) * z ** (self.p - 2.0)


def _integrate_from(lower, r, integrand, power, rtol=1e-8, max_doublings=20):
    """``int_lower^r integrand(z) dz`` for each entry of ``r``.

    The substitution ``z = lower + (r - lower) v^power`` tames the power-law
    behaviour at the lower end; the result is then computed by composite
    Simpson with panel doubling until the relative change is below ``rtol``.
    """
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    out = np.zeros_like(flat)
    act = np.flatnonzero(flat > lower)
    if act.size == 0:
        return out.reshape(r.shape)
    span = flat[act] - lower

    def f(idx, v):
        z = lower + span[idx, None] * v[None, :] ** power
        jac = span[idx, None] * power * v[None, :] ** (power - 1)
        with np.errstate(invalid="ignore"):
            vals = integrand(z) * jac
        return np.where(jac == 0.0, 0.0, vals)

    all_idx = np.arange(act.size)
    ends = f(all_idx, np.array([0.0, 1.0]))
    trap = 0.5 * (ends[:, 0] + ends[:, 1])
    mid = f(all_idx, np.array([0.5]))[:, 0]
    trap_new = 0.5 * trap + 0.5 * mid
    simpson = (4.0 * trap_new - trap) / 3.0
    trap = trap_new
    n = 2
    live = all_idx
    result = simpson.copy()
    for _ in range(max_doublings):
        v = (np.arange(n) + 0.5) / n
        tn = 0.5 * trap[live] + 0.5 * f(live, v).mean(axis=1)
        sn = (4.0 * tn - trap[live]) / 3.0
        done = np.abs(sn - result[live]) <= rtol * np.abs(sn) + 1e-300
        trap[live] = tn
        result[live] = sn
        live = live[~done]
        n *= 2
        if live.size == 0:
            out[act] = result
            return out.reshape(r.shape)
    raise NumericalError("Simpson quadrature did not converge",
                         worst_r=float(flat[act][live[0]]))


def entropy_G(spec: MobilitySpec, gen: EntropyGenerator, r):
    """``int_0^r sqrt(m(z) g''(z)) dz``."""
    r = _check_density(r)

    def integrand(z):
        return np.sqrt(spec.evaluate(z) * gen.second_derivative(z))

    out = _integrate_from(gen.lower, r, integrand, 2.0)
    return float(out) if out.ndim == 0 else out


def big_G(spec: MobilitySpec, gen: EntropyGenerator, r):
    """``int_0^r m(z) g''(z) dz``."""
    r = _check_density(r)

    def integrand(z):
        return spec.evaluate(z) * gen.second_derivative(z)

    e = gen.p - 2.0 + (spec.exponent if gen.lower == 0.0 and spec.shift == 0.0 else 0.0)
    power = max(2.0, math.ceil(2.0 / (e + 1.0)))
    out = _integrate_from(gen.lower, r, integrand, power)
    return float(out) if out.ndim == 0 else out
