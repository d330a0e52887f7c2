"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiment
from .config import Config, load_config
from .errors import JkoFlowError


def _config(path):
    return load_config(path) if path else Config()


def _run_jko(args):
    traj = experiment.run_jko_experiment(_config(args.config), args.output)
    print(f"wrote {args.output}/jko.csv ({traj.n_steps} steps)")


def _run_reference(args):
    times, _ = experiment.run_reference_experiment(_config(args.config), args.output)
    print(f"wrote {args.output}/reference.csv ({len(times)} samples)")


def _compute_distance(args):
    res = experiment.compute_distance(_config(args.config), args.rho0, args.rho1)
    line = ",".join(experiment.fmt(v) for v in (
        res.distance_sq, res.iterations, res.residual_inf, res.primal_dual_gap))
    print(line)
    if args.output:
        experiment.write_csv(args.output, ("distance_sq", "iterations", "residual", "gap"),
                             [(res.distance_sq, res.iterations, res.residual_inf,
                               res.primal_dual_gap)])


def _diagnose(args):
    _, lyap = experiment.diagnose(_config(args.config), args.output)
    print(f"wrote diagnostics to {args.output}")
    if args.strict and lyap.violations:
        from .errors import InvariantViolation
        raise InvariantViolation(f"Lyapunov inequality violated at steps {lyap.violations}")


def _sweep(args):
    rows = experiment.sweep(_config(args.config), args.output)
    for row in rows:
        print(",".join(experiment.fmt(v) for v in row))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jkoflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, output=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?", help="configuration file")
        if output:
            p.add_argument("-o", "--output", default="out", help="output directory")
        p.set_defaults(func=func)
        return p

    add("run-jko", _run_jko, "run the minimizing-movement scheme")
    add("run-reference", _run_reference, "run the reference solver")
    p = sub.add_parser("compute-distance", help="squared transport distance of two snapshots")
    p.add_argument("rho0")
    p.add_argument("rho1")
    p.add_argument("config", nargs="?")
    p.add_argument("-o", "--output", default=None, help="optional CSV file")
    p.set_defaults(func=_compute_distance)
    d = add("diagnose", _diagnose, "run the scheme and write all diagnostics")
    d.add_argument("--strict", action="store_true",
                   help="exit with code 4 when a Lyapunov step is violated")
    add("sweep", _sweep, "tau refinement study against the matching oracle")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except JkoFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
