"""Experiment configuration files.

Format: one ``section.key = value`` assignment per line; ``#`` starts a
comment; blank lines are ignored. Keys must appear in :data:`SCHEMA`, each
at most once. Lists are comma separated.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


# key -> (parser, default); a default of None means "unset".
SCHEMA = {
    "grid.dim": (_int, 1),
    "grid.n": (_int, 256),
    "grid.box_length": (float, 8.0),
    "initial.kind": (str, "gaussian"),
    "initial.width": (float, 0.5),
    "initial.center": (_floats, None),
    "initial.file": (str, None),
    "initial.seed": (_int, 0),
    "mobility.kind": (str, "power_shifted"),
    "mobility.alpha": (float, 1.0),
    "mobility.epsilon": (float, 0.0),
    "mobility.beta": (float, 0.5),
    "mobility.scale": (float, 1.0),
    "jko.tau": (float, 0.01),
    "jko.steps": (_int, 50),
    "jko.s": (float, 0.25),
    "jko.n_time": (_int, 8),
    "jko.auto_shift": (_bool, True),
    "jko.shift_constant": (float, 1.0),
    "solver.method": (str, "barrier"),
    "solver.max_iters": (_int, None),
    "solver.tol_residual": (float, 1e-6),
    "solver.tol_gap": (float, 1e-7),
    "solver.step_primal": (float, None),
    "solver.step_dual": (float, None),
    "solver.newton_tol": (float, 1e-12),
    "solver.newton_max": (_int, 50),
    "solver.face_average": (str, "arithmetic"),
    "solver.start_gap": (float, 1e-3),
    "transport.n_time": (_int, 32),
    "reference.t_final": (float, 0.5),
    "reference.sample_dt": (float, 0.01),
    "reference.upwind": (_bool, True),
    "output.snapshot_every": (_int, 0),
    "diagnose.p_values": (_floats, (2.0, 4.0)),
    "diagnose.window": (_floats, (0.5, 4.0)),
    "diagnose.lambda_fraction": (float, 0.5),
    "diagnose.t_start": (float, 1.0),
    "diagnose.threshold": (float, 1e-3),
    "sweep.taus": (_floats, (0.04, 0.02, 0.01)),
    "sweep.t_final": (float, 0.5),
}


class Config:
    """Parsed configuration with schema defaults filled in."""

    def __init__(self, values=None, source="<config>"):
        self.source = source
        self._values = {}
        for key, value in (values or {}).items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            self._values[key] = value

    def __getitem__(self, key):
        if key in self._values:
            return self._values[key]
        return SCHEMA[key][1]

    def get(self, key, default=None):
        value = self[key]
        return default if value is None else value

    def is_set(self, key) -> bool:
        return key in self._values

    def with_values(self, **updates) -> Config:
        merged = dict(self._values)
        for key, value in updates.items():
            merged[key.replace("__", ".")] = value
        return Config(merged, self.source)

    def items(self):
        return [(k, self[k]) for k in SCHEMA]


def parse_config(text: str, source: str = "<config>") -> Config:
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})",
                              line=lineno)
        if not value:
            raise ConfigError(f"missing value for {key!r}", line=lineno)
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno) from None
        seen[key] = lineno
    return Config(values, source)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))
