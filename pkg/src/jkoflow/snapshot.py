"""Binary field snapshots.

Layout: one ASCII header line ``FIELD d=<dim> n=<n> L=<box_length>`` ending
in a newline, followed by ``n**d`` little-endian float64 values in
row-major order.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .spectral import ScalarField, TorusGrid

_HEADER = re.compile(r"^FIELD d=(\d+) n=(\d+) L=(\S+)$")


def write_field(path, field: ScalarField) -> None:
    g = field.grid
    header = f"FIELD d={g.dim} n={g.n_per_axis} L={g.box_length!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))


def read_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ConfigError(f"{path}: missing snapshot header")
    m = _HEADER.match(raw[:nl].decode("ascii", errors="replace"))
    if m is None:
        raise ConfigError(f"{path}: malformed snapshot header")
    grid = TorusGrid(int(m.group(1)), int(m.group(2)), float(m.group(3)))
    body = raw[nl + 1:]
    if len(body) != 8 * grid.size:
        raise ConfigError(
            f"{path}: expected {8 * grid.size} payload bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape(grid.shape)
    return ScalarField(grid, values)
