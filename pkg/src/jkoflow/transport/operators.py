"""Sparse space-time operators for the discrete dynamic problem.

Unknowns are flattened time-major: density slices ``(j, cell)`` and
momenta ``(j, axis, cell)`` with cells in C order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..spectral import TorusGrid


def forward_shift(grid: TorusGrid, axis: int) -> sp.csr_matrix:
    """``(S f)[i] = f[i + e_axis]`` with periodic wrap."""
    idx = np.arange(grid.size).reshape(grid.shape)
    cols = np.roll(idx, -1, axis=axis).ravel()
    return sp.csr_matrix((np.ones(grid.size), (np.arange(grid.size), cols)),
                         shape=(grid.size, grid.size))


@dataclass
class SpaceTimeOperators:
    """``avg`` maps the full density path to face averages; ``div`` maps
    momenta to per-slice divergences; ``dtime`` maps the density path to
    per-slice time differences."""

    grid: TorusGrid
    n_time: int
    avg: sp.csr_matrix
    div_w: sp.csr_matrix
    dtime: sp.csr_matrix
    div_space: sp.csr_matrix

    @classmethod
    def build(cls, grid: TorusGrid, n_time: int) -> SpaceTimeOperators:
        n = grid.size
        eye = sp.identity(n, format="csr")
        shifts = [forward_shift(grid, a) for a in range(grid.dim)]
        half = sp.vstack([0.25 * (eye + s) for s in shifts], format="csr")
        div_space = sp.hstack([(eye - s.T) / grid.spacing for s in shifts], format="csr")
        pair = sp.diags([np.ones(n_time), np.ones(n_time)], [0, 1],
                        shape=(n_time, n_time + 1), format="csr")
        diff = sp.diags([-np.ones(n_time), np.ones(n_time)], [0, 1],
                        shape=(n_time, n_time + 1), format="csr")
        avg = sp.kron(pair, half, format="csr")
        dtime = sp.kron(diff, eye, format="csr") * n_time
        div_w = sp.kron(sp.identity(n_time, format="csr"), div_space, format="csr")
        return cls(grid, n_time, avg, div_w, dtime, div_space)
