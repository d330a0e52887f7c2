"""Experiment orchestration: build objects from a :class:`Config`, run the
scheme or the reference solver, and write versioned CSV series."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .config import Config
from .diagnostics import (decay_rate_fit, entropy_decay_check, entropy_monotonicity,
                          lyapunov_check, truncated_energy_check,
                          truncation_level_scan)
from .errors import ConfigError, DomainError
from .jko import JkoConfig, interpolant_at, riesz_energy, run_scheme
from .mobility import (EXPONENT_SHIFTED, POWER, EntropyGenerator, MobilitySpec,
                       u_functional)
from .reference import exact_fractional_heat, run_reference
from .snapshot import read_field, write_field
from .spectral import ScalarField, TorusGrid, sobolev_norm_sq
from .transport import SolverOptions

SCHEMA_VERSION = 1
SERIES_COLUMNS = ("k", "t", "energy", "dist_sq", "U", "h1ms")


def fmt(x) -> str:
    """Shortest round-trip representation; identical across runs."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows, comments=()):
    with open(path, "w") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# -- builders -----------------------------------------------------------------

def build_grid(cfg: Config) -> TorusGrid:
    return TorusGrid(cfg["grid.dim"], cfg["grid.n"], cfg["grid.box_length"])


def build_initial(cfg: Config, grid: TorusGrid | None = None) -> ScalarField:
    """Unit-mass initial density."""
    kind = cfg["initial.kind"]
    if kind == "file":
        path = cfg["initial.file"]
        if path is None:
            raise ConfigError("initial.kind = file needs initial.file")
        field = read_field(path)
        return ScalarField(field.grid, field.values / field.integral())
    grid = grid or build_grid(cfg)
    coords = grid.coordinates()
    center = cfg["initial.center"] or (grid.box_length / 2.0,) * grid.dim
    if len(center) != grid.dim:
        raise ConfigError("initial.center needs one entry per axis")
    width = cfg["initial.width"]
    if not width > 0:
        raise ConfigError("initial.width must be positive")
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    if kind == "gaussian":
        v = np.exp(-r2 / (2.0 * width ** 2))
    elif kind == "random":
        # Smooth random positive bump: Gaussian envelope times a random
        # low-mode modulation drawn from the configured seed.
        rng = np.random.default_rng(cfg["initial.seed"])
        mod = np.ones(grid.shape)
        for _ in range(3):
            phase = rng.uniform(0, 2 * np.pi)
            kvec = rng.integers(1, 4, size=grid.dim)
            arg = sum(2 * np.pi * k * x / grid.box_length for k, x in zip(kvec, coords))
            mod += 0.3 * rng.uniform() * np.cos(arg + phase)
        v = np.exp(-r2 / (2.0 * width ** 2)) * np.maximum(mod, 0.1)
    else:
        raise ConfigError(f"unknown initial.kind {kind!r}")
    v = v / (v.sum() * grid.cell_volume)
    return ScalarField(grid, v)


def build_mobility(cfg: Config) -> MobilitySpec:
    return MobilitySpec(cfg["mobility.kind"], alpha=cfg["mobility.alpha"],
                        epsilon=cfg["mobility.epsilon"],
                        beta=cfg["mobility.beta"], scale=cfg["mobility.scale"])


def build_solver_options(cfg: Config) -> SolverOptions:
    return SolverOptions(
        max_iters=cfg["solver.max_iters"], tol_residual=cfg["solver.tol_residual"],
        tol_gap=cfg["solver.tol_gap"], step_primal=cfg["solver.step_primal"],
        step_dual=cfg["solver.step_dual"], newton_tol=cfg["solver.newton_tol"],
        newton_max=cfg["solver.newton_max"], method=cfg["solver.method"],
        face_average=cfg["solver.face_average"], start_gap=cfg["solver.start_gap"])


def build_jko_config(cfg: Config, tau: float | None = None, steps: int | None = None) -> JkoConfig:
    return JkoConfig(
        tau=cfg["jko.tau"] if tau is None else tau,
        n_steps=cfg["jko.steps"] if steps is None else steps,
        s=cfg["jko.s"], mobility=build_mobility(cfg),
        inner=build_solver_options(cfg), n_time=cfg["jko.n_time"],
        auto_shift=cfg["jko.auto_shift"], shift_constant=cfg["jko.shift_constant"])


# -- runs ---------------------------------------------------------------------

def series_rows(times, states, s, spec, distances=None):
    rows = []
    for k, (t, u) in enumerate(zip(times, states)):
        try:
            U = u_functional(spec, u)
        except DomainError:
            U = float("nan")
        dist = float("nan") if distances is None else distances[k]
        rows.append((k, t, riesz_energy(u, s), dist, U, sobolev_norm_sq(u, 1.0 - s)))
    return rows


def _snapshots(outdir, prefix, states, every):
    if every and every > 0:
        for k in range(0, len(states), every):
            write_field(Path(outdir) / f"{prefix}_{k:05d}.field", states[k])


def run_jko_experiment(cfg: Config, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jcfg = build_jko_config(cfg)
    traj = run_scheme(build_initial(cfg), jcfg)
    rows = [(k, t, e, d, U, h) for k, (t, e, d, U, h) in enumerate(zip(
        traj.times, traj.energies, traj.distances_sq, traj.u_functionals, traj.h1ms_norms))]
    write_csv(outdir / "jko.csv", SERIES_COLUMNS, rows, _run_comments(jcfg))
    _snapshots(outdir, "jko", traj.states, cfg["output.snapshot_every"])
    return traj


def _run_comments(jcfg):
    m = jcfg.mobility
    return (f"tau={fmt(jcfg.tau)} s={fmt(jcfg.s)} mobility={m.kind} "
            f"exponent={fmt(m.exponent)} shift={fmt(m.shift)} n_time={jcfg.n_time}",
            "energy = 1/2 |u|^2 in H^-s with the zero mode excluded")


def reference_times(cfg: Config):
    t_final, dt = cfg["reference.t_final"], cfg["reference.sample_dt"]
    if not (t_final > 0 and dt > 0):
        raise ConfigError("reference.t_final and reference.sample_dt must be positive")
    n = int(round(t_final / dt))
    return [k * t_final / n for k in range(n + 1)]


def run_reference_experiment(cfg: Config, outdir):
    """Same CSV layout as the scheme; ``dist_sq`` is NaN. Uses
    ``mobility.alpha`` as the exponent of the unshifted equation, or the
    exact fractional heat flow for the ``exponent_shifted`` family."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    u0 = build_initial(cfg)
    spec = build_jko_config(cfg, steps=0).mobility
    s = cfg["jko.s"]
    times = reference_times(cfg)
    if spec.kind == EXPONENT_SHIFTED:
        states = [exact_fractional_heat(u0, t, s) for t in times]
        states = [ScalarField(u.grid, np.maximum(u.values, 0.0)) for u in states]
        note = "exact fractional heat flow"
    else:
        run = run_reference(u0, spec.alpha, s, times, upwind=cfg["reference.upwind"])
        states = run.states
        note = f"explicit scheme steps={run.steps} clipped_mass={fmt(run.clipped_mass)}"
    rows = series_rows(times, states, s, spec)
    write_csv(outdir / "reference.csv", SERIES_COLUMNS, rows, (note,))
    _snapshots(outdir, "reference", states, cfg["output.snapshot_every"])
    return times, states


def compute_distance(cfg: Config, path0, path1):
    from .transport import solve_w2m
    rho0, rho1 = read_field(path0), read_field(path1)
    return solve_w2m(rho0, rho1, build_mobility(cfg), cfg["transport.n_time"],
                     build_solver_options(cfg))


def diagnose(cfg: Config, outdir):
    """Run the scheme and write every diagnostic as CSV."""
    outdir = Path(outdir)
    traj = run_jko_experiment(cfg, outdir)
    spec = traj.mobility
    lyap = lyapunov_check(traj)
    write_csv(outdir / "lyapunov.csv", ("k", "slack", "tolerance", "cumulative"),
              [(k + 1, a, b, c) for k, (a, b, c) in enumerate(zip(
                  lyap.slacks, lyap.tolerances, lyap.cumulative_slacks))],
              (f"violations={len(lyap.violations)}",))

    columns, cols = ["k"], []
    for p in cfg["diagnose.p_values"]:
        dec, _ = entropy_monotonicity(traj, EntropyGenerator(POWER, p))
        columns.append(f"dec_p{fmt(p)}")
        cols.append(dec)
    lam = cfg["diagnose.lambda_fraction"] * float(traj.states[0].values.max())
    trunc = truncated_energy_check(traj, lam, t_start=0.0)
    columns.append("dec_trunc")
    cols.append(trunc.energies[:-1] - trunc.energies[1:])
    d = traj.states[0].grid.dim
    ratio_note = "sobolev ratio not defined for d <= 2(1-s)"
    if d > 2.0 * (1.0 - traj.s):
        rep = entropy_decay_check(traj, spec, EntropyGenerator(POWER, 2.0))
        columns.append("ratio_p2")
        cols.append(rep.ratios)
        ratio_note = f"min sobolev ratio (p=2) = {fmt(rep.min_ratio)}"
    rows = [(k + 1,) + tuple(c[k] for c in cols) for k in range(traj.n_steps)]
    write_csv(outdir / "entropy.csv", columns, rows,
              (f"truncation level = {fmt(lam)}", ratio_note))

    summary = []
    window = cfg["diagnose.window"]
    for p in cfg["diagnose.p_values"]:
        try:
            fit = decay_rate_fit(traj, p, tuple(window))
            summary.append((f"decay_slope_p{fmt(p)}", fit.fitted_slope))
            summary.append((f"predicted_slope_p{fmt(p)}", fit.predicted_slope))
        except DomainError:
            summary.append((f"decay_slope_p{fmt(p)}", float("nan")))
    t_start = min(cfg["diagnose.t_start"], float(traj.times[-1]))
    summary.append(("lambda0", truncation_level_scan(traj, cfg["diagnose.threshold"], t_start)))
    summary.append(("lambda0_t_start", t_start))
    summary.append(("lyapunov_violations", len(lyap.violations)))
    summary.append(("telescoped_distance", sum(traj.distances_sq) / (2 * traj.tau)))
    summary.append(("initial_energy", traj.energies[0]))
    with open(outdir / "summary.csv", "w") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\nquantity,value\n")
        for name, value in summary:
            fh.write(f"{name},{fmt(value)}\n")
    return traj, lyap


def sweep(cfg: Config, outdir):
    """Refinement study over ``sweep.taus`` against the matching oracle.

    Each run takes ``ceil(t_final / tau)`` steps and is compared through the
    piecewise-constant interpolant at ``t_final``.

    ``power_shifted`` runs are compared with the explicit scheme for the
    unshifted equation (L1 gap); ``exponent_shifted`` runs with the exact
    fractional heat flow (relative L2 error).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    u0 = build_initial(cfg)
    t_final = cfg["sweep.t_final"]
    s = cfg["jko.s"]
    spec0 = build_mobility(cfg)
    h = u0.grid.cell_volume
    if spec0.kind == EXPONENT_SHIFTED:
        target = exact_fractional_heat(u0, t_final, s).values
        metric = "rel_l2_error"

        def error(u):
            return float(np.linalg.norm(u - target) / np.linalg.norm(target))
    else:
        target = run_reference(u0, spec0.alpha, s, [t_final]).states[-1].values
        metric = "l1_gap"

        def error(u):
            return float(np.sum(np.abs(u - target)) * h)
    rows = []
    for tau in cfg["sweep.taus"]:
        if not tau > 0:
            raise ConfigError(f"sweep taus must be positive, got {tau}")
        # Enough steps to cover t_final; the interpolant picks the state.
        steps = math.ceil(t_final / tau - 1e-9)
        jcfg = build_jko_config(cfg, tau=tau, steps=steps)
        traj = run_scheme(u0, jcfg)
        u_final = interpolant_at(traj, t_final).values
        m = jcfg.mobility
        shift = m.beta if m.kind == EXPONENT_SHIFTED else m.epsilon
        rows.append((tau, shift, error(u_final), traj.energies[-1]))
    write_csv(outdir / "sweep.csv", ("tau", "shift", metric, "final_energy"), rows,
              (f"t_final={fmt(t_final)} mobility={spec0.kind}",))
    return rows

