"""Command-line front end.

    thermoemu validate --machine m.cfg
    thermoemu solve    --machine m.cfg
    thermoemu emulate  --machine m.cfg [--dump-graph g.txt]
    thermoemu compare  --machine three.cfg --machine four.cfg
    thermoemu sweep    --machine four.cfg --sweep x_eps:-1:1:201 --out sweep.csv

Exit codes: 0 ok, 2 config or usage error, 3 solver error, 4 unsupported topology.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, emulator, graph, lindblad
from .model import UNITS, ConfigError, SpecError, build_three_level, load_machine, validate_spec

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TOPOLOGY = 0, 2, 3, 4

SWEEP_COLUMNS = [
    "value", "x_eps", "R", "A", "D", "AD", "cop3", "cop4", "cop_ratio", "Qc3", "Qc4", "P3", "P4",
    "coherence3", "coherence4", "window3", "window4", "valid", "flags", "error",
]

log = logging.getLogger("thermoemu")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def parse_sweep(text: str) -> tuple[str, float, float, int]:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"--sweep expects param:min:max:count, got {text!r}")
    name, lo, hi, count = parts
    if name not in analysis.SWEEP_PARAMETERS:
        raise UsageError(f"unknown sweep parameter {name!r}; choose from {', '.join(analysis.SWEEP_PARAMETERS)}")
    try:
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"bad numbers in --sweep {text!r}") from None
    if count < 1:
        raise UsageError("sweep count must be at least 1")
    if not lo <= hi:
        raise UsageError("sweep min must not exceed max")
    return name, lo, hi, count


# -- output ----------------------------------------------------------------------


def _emit(args, meta: list[tuple[str, str]], header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    if args.format == "csv":
        for key, value in meta:
            buf.write(f"# {key}: {value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    else:
        for key, value in meta:
            buf.write(f"{key}: {value}\n")
        for row in rows:
            buf.write("\n")
            width = max(len(h) for h in header)
            for h, x in zip(header, row):
                buf.write(f"{h:<{width}}  {fmt(x)}\n")
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _meta(args, specs) -> list[tuple[str, str]]:
    meta = [("tool", f"thermoemu {__version__}"), ("command", args.command), ("units", UNITS)]
    for role, spec in specs:
        meta.append((f"machine {role}".rstrip(), spec.fingerprint()))
    return meta


def _report_row(rep: lindblad.ThermoReport) -> tuple[list[str], list]:
    header = ["mode", "Qc", "Qh", "P", "flux", "entropy_production", "coherence", "cop",
              "first_law_residual", "clausius_sum", "leak_flux"]
    row = [rep.mode, rep.q_c, rep.q_h, rep.power, rep.flux, rep.entropy_production, rep.coherence, rep.cop,
           rep.first_law_residual, rep.clausius_sum, rep.leak_flux]
    header += [f"J{k}" for k in range(len(rep.edge_fluxes))]
    row += list(rep.edge_fluxes)
    return header, row


# -- commands ----------------------------------------------------------------------


def _single(args):
    if len(args.machine) != 1:
        raise UsageError(f"{args.command} takes exactly one --machine")
    return load_machine(args.machine[0])


def cmd_validate(args) -> int:
    spec = _single(args)
    rep = validate_spec(spec, args.separation_factor)
    header = ["ok", "tau_B", "tau_0", "tau_R", "tau_R_slow", "tau_sd", "separation_factor", "warnings"]
    row = [rep.ok, rep.tau_B, rep.tau_0, rep.tau_R, rep.tau_R_slow, rep.tau_sd, rep.separation_factor,
           "; ".join(str(w) for w in rep.warnings)]
    _emit(args, _meta(args, [("", spec)]), header, [row])
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = _single(args)
    _, rep = lindblad.solve(spec)
    header, row = _report_row(rep)
    _emit(args, _meta(args, [("", spec)]), header, [row])
    return EXIT_OK


def cmd_emulate(args) -> int:
    spec = _single(args)
    W = emulator.build_rate_matrix(spec)
    cert = emulator.certify_balance(W, spec)
    g = graph.from_rate_matrix(W, certificate=cert)
    rep = graph.graph_report(spec, g)
    if args.dump_graph:
        Path(args.dump_graph).write_text(g.dump())
    header, row = _report_row(rep)
    header += ["positivity", "detailed_balance", "column_sums", "trees", "circuits"]
    row += [cert.positivity.passed, cert.detailed_balance.passed, cert.column_sums.passed,
            len(g.trees), len(g.circuits)]
    _emit(args, _meta(args, [("", spec)]), header, [row])
    return EXIT_OK


def _pair(args):
    """Return ``(three_level, four_level)``; the benchmark is built if missing."""
    if not 1 <= len(args.machine) <= 2:
        raise UsageError(f"{args.command} takes one or two --machine files")
    specs = [load_machine(m) for m in args.machine]
    by_size = {s.num_levels: s for s in specs}
    if len(by_size) != len(specs) or 4 not in by_size or not set(by_size) <= {3, 4}:
        raise UsageError("need a four-level machine, optionally with its three-level benchmark")
    spec4 = by_size[4]
    spec3 = by_size.get(3)
    if spec3 is None:
        p = analysis.device_params(spec4)
        spec3 = build_three_level(p.omega_c, p.omega_h, p.coupling, p.baths)
    return spec3, spec4


def _point_row(pt: analysis.ComparisonPoint, value) -> list:
    return [value, pt.x_eps, pt.R, pt.A, pt.D, pt.AD, pt.cop3, pt.cop4, pt.cop_ratio, pt.qc3, pt.qc4,
            pt.p3, pt.p4, pt.coherence3, pt.coherence4, pt.in_window3, pt.in_window4, pt.valid,
            "; ".join(pt.warnings), pt.error or ""]


def cmd_compare(args) -> int:
    spec3, spec4 = _pair(args)
    pt = analysis.performance_ratio(spec3, spec4, args.separation_factor)
    _emit(args, _meta(args, [("3", spec3), ("4", spec4)]), SWEEP_COLUMNS, [_point_row(pt, pt.epsilon)])
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.sweep:
        raise UsageError("sweep needs --sweep param:min:max:count")
    name, lo, hi, count = parse_sweep(args.sweep)
    spec3, spec4 = _pair(args)
    grid = np.linspace(lo, hi, count)
    points = analysis.sweep(spec3, spec4, name, grid, args.separation_factor, workers=args.workers)
    meta = _meta(args, [("3", spec3), ("4", spec4)]) + [("sweep", f"{name}:{fmt(lo)}:{fmt(hi)}:{count}")]
    rows = [_point_row(pt, pt.value) for pt in points]
    _emit(args, meta, SWEEP_COLUMNS, rows)
    failed = sum(1 for pt in points if pt.error)
    if failed:
        log.warning("%d of %d sweep points failed; see the error column", failed, len(points))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "emulate": cmd_emulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--machine", action="append", default=[], required=True, metavar="PATH",
                        help="machine config file (repeat for compare/sweep)")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "text"), default="csv")
    common.add_argument("--separation-factor", type=float, default=10.0, metavar="F",
                        help="required ratio between separated time scales (default 10)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="thermoemu", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"thermoemu {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check time-scale separation")
    sub.add_parser("solve", parents=[common], help="steady state of the master equation")
    p = sub.add_parser("emulate", parents=[common], help="steady state of the classical emulator")
    p.add_argument("--dump-graph", metavar="PATH", help="write the rate graph as an edge list")
    sub.add_parser("compare", parents=[common], help="four-level device against the three-level benchmark")
    p = sub.add_parser("sweep", parents=[common], help="compare over a parameter grid")
    p.add_argument("--sweep", metavar="P:MIN:MAX:COUNT",
                   help=f"parameter grid; P is one of {', '.join(analysis.SWEEP_PARAMETERS)}")
    p.add_argument("--workers", type=int, default=1, help="processes for sweep points (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.separation_factor <= 1:
        parser.error("--separation-factor must exceed 1")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"thermoemu: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, SpecError) as exc:
        print(f"thermoemu: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except graph.UnsupportedTopology as exc:
        print(f"thermoemu: unsupported topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (lindblad.DegenerateSteadyState, emulator.ReducibleRateMatrix, graph.GraphError,
            np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"thermoemu: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
