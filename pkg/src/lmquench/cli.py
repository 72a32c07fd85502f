"""Command-line front end.

Verbs
-----
``run``       one ``(g, kappa)`` point -> bundle directory
``sweep``     grid of points -> one bundle per point plus ``sweep.csv``
``converge``  ground energies (and mean echo) versus mesh -> ``convergence.csv``
``tg-check``  two-body echo at large ``g`` against the hard-core limit

Exit codes: 0 success, 1 configuration error, 2 numerical failure (or a
failed ``tg-check``), 3 sweep finished with failed points.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .convergence import convergence_report
from .lagrange_mesh import build_mesh
from .pipeline import _inputs, error_record, quench_point, run_single, run_sweep, write_bundle
from .quench_dynamics import SumRuleError, echo_amplitude
from .tg_limit import tg_determinant_echo, tg_echo
from .two_body import EigensolverError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3

NUMERIC_ERRORS = (EigensolverError, SumRuleError, np.linalg.LinAlgError, ArithmeticError)

log = logging.getLogger("lmquench")


def _floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _ints(text: str) -> list[int]:
    values = _floats(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")
    return [int(v) for v in values]


# flag -> (section, key)
_OVERRIDES = {
    "n_points": ("mesh", "n_points"),
    "scaling": ("mesh", "scaling"),
    "g": ("physics", "g"),
    "kappa": ("physics", "kappa"),
    "t_max": ("dynamics", "t_max"),
    "dt": ("dynamics", "dt"),
    "n_states": ("dynamics", "n_states"),
    "sum_rule": ("dynamics", "sum_rule"),
    "max_samples": ("dynamics", "max_samples"),
    "bins": ("observables", "bins"),
    "tail_window": ("observables", "tail_window"),
    "refine": ("observables", "refine"),
    "g_list": ("sweep", "g"),
    "kappa_list": ("sweep", "kappa"),
    "workers": ("sweep", "workers"),
    "output": ("output", "directory"),
    "cache_dir": ("output", "cache_dir"),
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("-c", "--config", help="TOML configuration file")
    p.add_argument("-N", "--n-points", type=int, help="mesh size (odd)")
    p.add_argument("--h", dest="scaling", type=float, help="mesh scaling (node spacing)")
    p.add_argument("-g", type=float, help="contact interaction strength")
    p.add_argument("-k", "--kappa", type=float, help="impurity strength")
    p.add_argument("--t-max", type=float, help="echo horizon")
    p.add_argument("--dt", type=float, help="echo time step (0: automatic)")
    p.add_argument("--n-states", type=int, help="quenched states to keep (0: by sum rule)")
    p.add_argument("--sum-rule", type=float, help="required sum of overlap weights")
    p.add_argument("--max-samples", type=int, help="cap on echo samples")
    p.add_argument("--bins", type=int, help="histogram bins")
    p.add_argument("--tail-window", type=float, nargs=2, metavar=("LO", "HI"),
                   help="frequency window of the spectral tail fit")
    p.add_argument("--refine", type=int, help="density refinement factor")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--cache-dir", help="cache directory ('' disables)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmquench",
        description="Lagrange-mesh quench dynamics of two atoms with a central impurity.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="compute one (g, kappa) point")
    _common(p)

    p = sub.add_parser("sweep", help="compute a (g, kappa) grid")
    _common(p)
    p.add_argument("--g-list", type=_floats, help="g values, e.g. '0.5,1,2.5'")
    p.add_argument("--kappa-list", type=_floats, help="kappa values")
    p.add_argument("-j", "--workers", type=int, help="worker processes (0: all cores)")

    p = sub.add_parser("converge", help="convergence table versus the mesh")
    _common(p)
    p.add_argument("--n-list", type=_ints, required=True, help="odd mesh sizes")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--h-list", type=_floats, help="scalings (differences along N at fixed h)")
    grp.add_argument("--half-width", type=float, help="fixed box half-width; h follows N")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--with-mean", action="store_true", help="include the mean echo")

    p = sub.add_parser("tg-check", help="compare the two-body echo with the hard-core limit")
    _common(p)
    p.add_argument("--window", type=float, default=20.0, help="compare on [0, window]")
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(g_default=25.0)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < LMQUENCH_OUTPUT < command-line flags."""
    config = load_config(args.config)
    sections: dict[str, dict] = {}
    for flag, (section, key) in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            sections.setdefault(section, {})[key] = value
    if getattr(args, "g_default", None) is not None and args.g is None and not args.config:
        sections.setdefault("physics", {})["g"] = args.g_default
    return config.updated(**sections) if sections else config


def _cmd_run(config: RunConfig, args) -> int:
    summary = run_single(config)
    print(f"{config.output.directory}: E0={summary['initial_energy']:.10g} "
          f"sum_rule={summary['sum_rule']:.10f} mean_le={summary['mean_le']:.6g} "
          f"label={summary['classification']['label']}")
    return EXIT_OK


def _cmd_sweep(config: RunConfig, args) -> int:
    if not config.sweep.enabled:
        raise ConfigError("sweep needs a g list and/or a kappa list")
    outcome = run_sweep(config)
    n_bad = len(outcome.failed)
    print(f"{config.output.directory}: {len(outcome.rows) - n_bad}/{len(outcome.rows)} points ok")
    return EXIT_PARTIAL if n_bad else EXIT_OK


def _cmd_converge(config: RunConfig, args) -> int:
    h_list = args.h_list
    if h_list is None and args.half_width is None:
        h_list = [config.mesh.scaling]
    try:
        table = convergence_report(config.physics.g, config.physics.kappa, args.n_list, h_list,
                                   half_width=args.half_width, tolerance=args.tolerance,
                                   with_mean=args.with_mean)
    except ValueError as exc:
        if isinstance(exc, NUMERIC_ERRORS):
            raise
        raise ConfigError(str(exc)) from exc
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=table.COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in table.as_records():
        writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v)
                         for k, v in rec.items()})
    inputs = dict(_inputs(config), n_list=args.n_list, h_list=h_list,
                  half_width=args.half_width, tolerance=args.tolerance,
                  with_mean=args.with_mean)
    write_bundle(config.output.directory, {"convergence.csv": out.getvalue().encode()}, inputs)
    sys.stdout.write(out.getvalue())
    if table.flagged:
        print(f"{len(table.flagged)} setting(s) not converged to {args.tolerance:g}")
    return EXIT_OK


def _cmd_tg_check(config: RunConfig, args) -> int:
    mesh = build_mesh(config.mesh.n_points, config.mesh.scaling)
    g, kappa = config.physics.g, config.physics.kappa
    times = np.linspace(0.0, args.window, args.samples)
    result, _ = quench_point(mesh, g, kappa, n_states=config.dynamics.n_states,
                             sum_rule=config.dynamics.sum_rule)
    pair = echo_amplitude(result, times).echo
    tg = tg_echo(mesh, kappa, times).echo
    det = tg_determinant_echo(mesh, kappa, times).echo
    report = dict(g=g, kappa=kappa, window=args.window,
                  sup_two_body_vs_tg=float(np.max(np.abs(pair - tg))),
                  sup_determinant_vs_sum=float(np.max(np.abs(det - tg))),
                  tolerance=args.tolerance)
    report["passed"] = bool(report["sup_two_body_vs_tg"] <= args.tolerance
                            and report["sup_determinant_vs_sum"] <= 1e-8)
    out = io.StringIO()
    out.write("time,echo_two_body,echo_tg,echo_tg_determinant\n")
    np.savetxt(out, np.column_stack([times, pair, tg, det]), fmt="%.17g", delimiter=",")
    files = {"tg_check.csv": out.getvalue().encode(),
             "tg_check.json": (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()}
    write_bundle(config.output.directory, files, _inputs(config))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "converge": _cmd_converge,
            "tg-check": _cmd_tg_check}


def _write_error(config: RunConfig | None, record: dict):
    if config is None:
        return
    path = Path(config.output.directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    config = None
    try:
        config = resolve_config(args)
        return COMMANDS[args.verb](config, args)
    except ConfigError as exc:
        record = dict(error_record(exc), exit_code=EXIT_CONFIG)
        print(json.dumps(record), file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        record = dict(error_record(exc), exit_code=EXIT_NUMERIC)
        _write_error(config, record)
        print(json.dumps(record), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
