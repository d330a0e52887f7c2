"""Periodic grids, grid functions and Fourier-multiplier operators.

Conventions
-----------
* Cells are centered at ``(i + 1/2) h`` along each axis.
* Integrals are cell sums times ``h**d``.
* The discrete transform is ``fhat[k] = h**d * sum_x f[x] exp(-i k.x)`` so that
  Parseval reads ``sum h**d f g = sum_k fhat conj(ghat) / L**d``.
* Homogeneous operators act on the mean-zero part: the ``k = 0`` mode of
  their output is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid ``[0, L)^d`` with ``n`` cells per axis."""

    dim: int
    n_per_axis: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        n = self.n_per_axis
        if int(n) != n or n < 8 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_per_axis must be a power of two >= 8, got {n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ConfigError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n_per_axis", int(n))
        object.__setattr__(self, "box_length", float(self.box_length))
        if self.spacing * self.n_per_axis != self.box_length:
            raise ConfigError("box_length / n_per_axis is not exactly representable")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.n_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.box_length ** self.dim

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, one broadcastable array per axis."""
        x = (np.arange(self.n_per_axis) + 0.5) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, ...]:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_per_axis, d=self.spacing)
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def wavenumber(self) -> np.ndarray:
        """``|k|`` on the full FFT layout."""
        return np.sqrt(sum(k * k for k in self.wavevectors))

    def symbol(self, r: float) -> np.ndarray:
        """``|k|^(2r)`` with the zero mode set to 0."""
        kk = self.wavenumber
        out = np.zeros_like(kk)
        nz = kk > 0
        out[nz] = kk[nz] ** (2.0 * r)
        return out


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise DomainError(f"non-finite value at cell {tuple(int(i) for i in bad)}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centered grid function. The value array is stored read-only."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise DomainError(
                f"field has {v.size} values, grid has {self.grid.size} cells")
        v = v.reshape(self.grid.shape)
        _check_finite(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)

    def __repr__(self):
        return f"ScalarField({self.grid!r}, integral={self.integral():.6g})"


@dataclass(frozen=True, eq=False)
class VectorField:
    """Face-centered vector field: component ``a`` lives at ``x + h/2 e_a``."""

    grid: TorusGrid
    components: tuple

    def __post_init__(self):
        comps = tuple(np.array(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dim:
            raise DomainError(
                f"expected {self.grid.dim} components, got {len(comps)}")
        out = []
        for c in comps:
            if c.size != self.grid.size:
                raise DomainError("component length does not match the grid")
            c = c.reshape(self.grid.shape)
            _check_finite(c)
            c.flags.writeable = False
            out.append(c)
        object.__setattr__(self, "components", tuple(out))

    def as_array(self) -> np.ndarray:
        return np.stack(self.components)


def _same_grid(f, g):
    if f.grid != g.grid:
        raise DomainError("fields live on different grids")


def _fft(f: ScalarField) -> np.ndarray:
    return np.fft.fftn(f.values) * f.grid.cell_volume


def apply_symbol(f: ScalarField, symbol: np.ndarray) -> ScalarField:
    """Multiply the spectrum of ``f`` by a real, even symbol."""
    g = f.grid
    out = np.fft.ifftn(np.fft.fftn(f.values) * symbol).real
    return ScalarField(g, out)


def fractional_laplacian(f: ScalarField, r: float) -> ScalarField:
    """``(-Δ)^r f`` for ``r`` in ``[-1, 1]``; the mean is dropped.

    Negative orders are bounded on the torus because the zero mode is
    removed, so no ``r > -d/2`` restriction is needed here. The model
    order restriction lives in :func:`riesz_potential`.
    """
    if not (-1.0 <= r <= 1.0):
        raise DomainError(f"order r={r} outside [-1, 1]")
    _check_finite(f.values)
    return apply_symbol(f, f.grid.symbol(r))


def riesz_potential(f: ScalarField, s: float) -> ScalarField:
    """``(-Δ)^(-s) f`` on the mean-zero part, ``0 < s < min(1, d/2)``."""
    check_order(s, f.grid.dim)
    return fractional_laplacian(f, -s)


def check_order(s: float, dim: int) -> None:
    if not (0.0 < s < min(1.0, dim / 2.0)):
        raise ConfigError(f"fractional order s={s} outside (0, min(1, {dim}/2))")


def _norm_weights(grid: TorusGrid, r: float) -> np.ndarray:
    if not (-1.0 <= r <= 1.0):
        raise DomainError(f"Sobolev order r={r} outside [-1, 1]")
    if r == 0:
        return np.ones(grid.shape)
    return grid.symbol(r)


def sobolev_inner(f: ScalarField, g: ScalarField, r: float) -> float:
    """Homogeneous ``H^r`` inner product by symbol weights.

    For ``r = 0`` the zero mode is kept, so the result is the plain L2
    product; for every other ``r`` it carries no weight.
    """
    _same_grid(f, g)
    w = _norm_weights(f.grid, r)
    fh = _fft(f)
    gh = fh if g is f else _fft(g)
    return float(np.sum(w * (fh * np.conj(gh)).real) / f.grid.volume)


def sobolev_norm_sq(f: ScalarField, r: float) -> float:
    return sobolev_inner(f, f, r)


def l2_inner(f: ScalarField, g: ScalarField) -> float:
    _same_grid(f, g)
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def vector_inner(v: VectorField, w: VectorField) -> float:
    _same_grid(v, w)
    return float(sum(np.sum(a * b) for a, b in zip(v.components, w.components))
                 * v.grid.cell_volume)


def gradient(f: ScalarField) -> VectorField:
    """Forward differences onto faces: ``(f[i + e_a] - f[i]) / h``."""
    h = f.grid.spacing
    comps = [(np.roll(f.values, -1, axis=a) - f.values) / h for a in range(f.grid.dim)]
    return VectorField(f.grid, tuple(comps))


def divergence(v: VectorField) -> ScalarField:
    """Backward differences from faces; the negative adjoint of :func:`gradient`."""
    h = v.grid.spacing
    out = sum((c - np.roll(c, 1, axis=a)) / h for a, c in enumerate(v.components))
    return ScalarField(v.grid, out)


def discrete_laplacian(f: ScalarField) -> ScalarField:
    """Standard ``2d+1``-point periodic Laplacian stencil."""
    h2 = f.grid.spacing ** 2
    u = f.values
    out = sum(np.roll(u, 1, axis=a) + np.roll(u, -1, axis=a) - 2.0 * u
              for a in range(f.grid.dim)) / h2
    return ScalarField(f.grid, out)


def spectral_face_gradient(f: ScalarField) -> np.ndarray:
    """Spectral derivative of ``f`` sampled on faces, shape ``(d, *grid.shape)``.

    Component ``a`` is evaluated at ``x + h/2 e_a`` by a half-cell phase
    shift. The Nyquist mode is dropped since its derivative is not real.
    """
    g = f.grid
    n = g.n_per_axis
    fh = np.fft.fftn(f.values)
    out = []
    for a, k in enumerate(g.wavevectors):
        ka = k.copy()
        idx = [slice(None)] * g.dim
        idx[a] = n // 2
        ka[tuple(idx)] = 0.0
        shift = np.exp(0.5j * ka * g.spacing)
        out.append(np.fft.ifftn(1j * ka * shift * fh).real)
    return np.stack(out)


def sobolev_embedding_constant(grid: TorusGrid, r: float, n_samples: int = 100,
                               seed: int = 0) -> float:
    """Empirical constant ``C`` in ``||f||_q <= C ||f||_{H^r}``, ``q = 2d/(d - 2r)``.

    Samples random mean-zero fields with a power-law spectrum and returns
    the largest observed ratio.
    """
    d = grid.dim
    if not (0 < r < d / 2.0):
        raise DomainError(f"embedding needs 0 < r < d/2, got r={r}")
    q = 2.0 * d / (d - 2.0 * r)
    rng = np.random.default_rng(seed)
    kk = grid.wavenumber
    damp = np.where(kk > 0, (1.0 + kk) ** -(1.0 + r + d / 2.0), 0.0)
    worst = 0.0
    for _ in range(n_samples):
        noise = rng.standard_normal(grid.shape)
        f = ScalarField(grid, np.fft.ifftn(np.fft.fftn(noise) * damp).real)
        lq = np.sum(np.abs(f.values) ** q * grid.cell_volume) ** (1.0 / q)
        worst = max(worst, lq / np.sqrt(sobolev_norm_sq(f, r)))
    return worst
