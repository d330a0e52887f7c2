"""Space-time transport paths on the staggered grid.

Densities ``rho[j]`` sit at cell centers at times ``t_j = j / n_time``.
Momenta ``w[j, a]`` sit on the faces ``x + h/2 e_a`` at half-time
``t_{j+1/2}``. The mobility at a momentum location is evaluated at the
four-point average of the two neighbouring cells in space and the two
neighbouring slices in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericalError
from ..mobility import MOBILITY_FLOOR, MobilitySpec
from ..spectral import ScalarField, TorusGrid, VectorField

NEGATIVE_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class TransportPath:
    """``rho`` has shape ``(n_time + 1, *grid.shape)``, ``w`` has shape
    ``(n_time, dim, *grid.shape)``."""

    grid: TorusGrid
    rho: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        g = self.grid
        rho = np.array(self.rho, dtype=float)
        w = np.array(self.w, dtype=float)
        if rho.ndim != g.dim + 1 or rho.shape[1:] != g.shape:
            raise DomainError(f"rho has shape {rho.shape}, grid is {g.shape}")
        n_time = rho.shape[0] - 1
        if n_time < 1:
            raise DomainError("a path needs at least one time step")
        if w.shape != (n_time, g.dim) + g.shape:
            raise DomainError(f"w has shape {w.shape}, expected {(n_time, g.dim) + g.shape}")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(w))):
            raise DomainError("path contains non-finite values")
        rho.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "w", w)

    @property
    def n_time(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.n_time

    def density(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.rho[j])

    def momentum(self, j: int) -> VectorField:
        return VectorField(self.grid, tuple(self.w[j]))

    def slice_masses(self) -> np.ndarray:
        axes = tuple(range(1, self.grid.dim + 1))
        return self.rho.sum(axis=axes) * self.grid.cell_volume


def static_path(rho: ScalarField, n_time: int) -> TransportPath:
    g = rho.grid
    return TransportPath(g, np.broadcast_to(rho.values, (n_time + 1,) + g.shape),
                         np.zeros((n_time, g.dim) + g.shape))


def face_average(rho: np.ndarray, dim: int) -> np.ndarray:
    """Four-point averages of a density path, shape ``(n_time, dim, ...)``."""
    pair = rho[:-1] + rho[1:]
    out = np.empty((pair.shape[0], dim) + pair.shape[1:])
    for a in range(dim):
        out[:, a] = 0.25 * (pair + np.roll(pair, -1, axis=a + 1))
    return out


def _mobility_on_faces(rho_bar, spec):
    if spec.exponent > 0 and np.any(rho_bar < -NEGATIVE_SLACK):
        idx = np.unravel_index(np.argmin(rho_bar), rho_bar.shape)
        raise NumericalError("mobility evaluated at negative density",
                             cell=tuple(int(i) for i in idx),
                             value=float(rho_bar[idx]))
    m = spec.evaluate(np.maximum(rho_bar, 0.0))
    if not np.all(np.isfinite(m)):
        idx = np.argwhere(~np.isfinite(m))[0]
        raise NumericalError("non-finite mobility", cell=tuple(int(i) for i in idx))
    return np.maximum(m, MOBILITY_FLOOR)


def action(path: TransportPath, spec: MobilitySpec) -> float:
    """Discrete action ``sum_j dt sum_faces h^d |w|^2 / m(rho_bar)``."""
    m = _mobility_on_faces(face_average(path.rho, path.grid.dim), spec)
    return float(np.sum(path.w ** 2 / m) * path.dt * path.grid.cell_volume)


def continuity_residual(path: TransportPath) -> tuple[float, np.ndarray]:
    """Sup norm and per-slice fields of ``(rho_{j+1} - rho_j)/dt + div w_j``."""
    h = path.grid.spacing
    res = np.diff(path.rho, axis=0) / path.dt
    for a in range(path.grid.dim):
        wa = path.w[:, a]
        res = res + (wa - np.roll(wa, 1, axis=a + 1)) / h
    return float(np.max(np.abs(res))), res
