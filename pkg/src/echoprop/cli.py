"""Command-line entry point.

Exit codes: 0 success, 1 I/O failure, 2 internal invariant or diagram violation, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import properties as props
from .config import TestConfig
from .diagram import format_diagram, standard_diagram
from .flows import diameter_curve, divergence_curve, state_pool
from .report import analyze, emit_report, summary_lines
from .sequences import HorizonError
from .systems import (
    DEFAULT_CATALOG,
    UnknownSystemError,
    catalog_get,
    catalog_names,
    generate_window,
    load_explicit_process,
    resolve_process,
    resolve_system,
)

EXIT_OK, EXIT_IO, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _props(text: str) -> list:
    if text.strip().lower() in ("", "none"):
        return []
    if text.strip().lower() == "all":
        return list(props.PROPERTIES)
    out = [p.strip() for p in text.split(",") if p.strip()]
    upper = {p.upper(): p for p in props.PROPERTIES}
    resolved = []
    for p in out:
        if p in props.PROPERTIES:
            resolved.append(p)
        elif p.upper() in upper:
            resolved.append(upper[p.upper()])
        else:
            raise argparse.ArgumentTypeError(f"unknown property {p!r}")
    return resolved


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="echoprop", description="Empirical echo-state and forgetting-property analysis.")
    p.add_argument("--version", action="version", version=f"echoprop {__version__} ({kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, seed_required):
        sp.add_argument("--system", default="affine(0.5,1)",
                        help="catalog name such as affine(0.3,1), or a JSON system file")
        sp.add_argument("--process", default="iid", help="iid, iid(lo,hi), constant(c) or rotation_orbit(rho)")
        sp.add_argument("--input-file", help="JSON window literal used as an explicit input process")
        sp.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
        sp.add_argument("--n-max", type=_positive, default=200)
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--samples", type=_positive, default=64, help="sampled initial states")
        sp.add_argument("--input-samples", type=_positive, default=32, help="sampled input windows")
        sp.add_argument("--burn-in", type=_positive, default=128)
        sp.add_argument("--tail-window", type=_positive, default=None)

    a = sub.add_parser("analyze", help="full verdict set and diagram check")
    common(a, seed_required=True)
    a.add_argument("--props", type=_props, default=list(props.PROPERTIES),
                   help="comma-separated subset of " + ",".join(props.PROPERTIES))
    a.add_argument("--workers", type=_positive, default=1)
    a.add_argument("--crosscheck", action="store_true", help="also run the alternative-form cross-checks")
    a.add_argument("--out", help="write the JSON report here")

    c = sub.add_parser("curve", help="divergence or pullback-diameter curve as CSV")
    common(c, seed_required=False)
    c.add_argument("--kind", choices=("divergence", "diameter"), default="divergence")
    c.add_argument("--flow", choices=("forward", "pullback"), default="forward")
    c.add_argument("--x", type=float, nargs="+", help="first initial state (default: first pool state)")
    c.add_argument("--x2", type=float, nargs="+", help="second initial state (default: second pool state)")
    c.add_argument("--index", type=int, default=0, help="window index in the input process")
    c.add_argument("--out", help="CSV path (default: standard output)")

    d = sub.add_parser("diagram", help="print the encoded implication diagram")
    d.add_argument("--json", action="store_true")

    sub.add_parser("list-systems", help="list catalog systems and their flags")
    return p


def _config(args) -> TestConfig:
    tail = args.tail_window if args.tail_window is not None else min(20, args.n_max)
    return TestConfig(n_max=args.n_max, tail_window=tail, tol=args.tol, state_samples=args.samples,
                      input_samples=args.input_samples, burn_in=args.burn_in, seed=args.seed)


def _setup(args):
    try:
        spec = resolve_system(args.system)
    except (UnknownSystemError, ValueError, OSError) as exc:
        raise UsageError(f"cannot resolve system {args.system!r}: {exc}") from exc
    try:
        if args.input_file:
            proc = load_explicit_process(args.input_file, seed=args.seed)
        else:
            proc = resolve_process(args.process, spec, seed=args.seed)
    except (ValueError, OSError) as exc:
        raise UsageError(f"cannot resolve input process: {exc}") from exc
    if proc.input_dim != spec.input_dim:
        raise UsageError(f"process has input dimension {proc.input_dim}, system expects {spec.input_dim}")
    try:
        cfg = _config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return spec, proc, cfg


def cmd_analyze(args) -> int:
    spec, proc, cfg = _setup(args)
    try:
        report = analyze(spec, proc, cfg, args.props, workers=args.workers, crosscheck=args.crosscheck)
    except HorizonError as exc:
        raise UsageError(f"input window too short for this configuration: {exc}") from exc
    for line in summary_lines(report):
        print(line)
    if args.out:
        emit_report(report, args.out)
        print(f"report written to {args.out}")
    return EXIT_OK if report.consistent else EXIT_INVARIANT


def cmd_curve(args) -> int:
    spec, proc, cfg = _setup(args)
    n = cfg.n_max
    pool = state_pool(spec, cfg)
    B, H = (n, 0) if args.flow == "pullback" or args.kind == "diameter" else (0, n)
    try:
        w = generate_window(proc, B, H, index=args.index)
        if args.kind == "diameter":
            ns, values = np.arange(n + 1), diameter_curve(spec, w, n, pool)
        else:
            x = np.asarray(args.x) if args.x else pool[0]
            x2 = np.asarray(args.x2) if args.x2 else pool[1]
            tp = divergence_curve(spec, x, x2, w, n, pullback=args.flow == "pullback")
            ns, values = tp.n_values, tp.d_values
    except HorizonError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "value"])
    for k, v in zip(ns, values):
        writer.writerow([int(k), repr(float(v))])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_diagram(args) -> int:
    d = standard_diagram()
    if args.json:
        print(json.dumps(d.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(format_diagram(d))
    return EXIT_OK


def cmd_list_systems(args) -> int:
    print("registered:", ", ".join(catalog_names()))
    print("default catalog:")
    for name in DEFAULT_CATALOG:
        spec = catalog_get(name)
        flags = ", ".join(k for k, v in spec.flags().items() if v) or "-"
        print(f"  {name:<16} d={spec.state_dim:<3} metric={spec.metric:<9} [{flags}]  {spec.description}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "curve": cmd_curve, "diagram": cmd_diagram, "list-systems": cmd_list_systems}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"echoprop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"echoprop: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"echoprop: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
