"""Command-line entry point: ``symcycle <subcommand> ...``.

Exit status: 0 success/match, 1 expectation mismatch, 2 usage error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .diagnostics import Thresholds
from .equilibria import (EquilibriumError, averaged_fixed_point, brouwer_iterate,
                         newton_fixed_point, solve_fixed_point, _report)
from .integrator import NumericalError
from .model import SpecError, SystemSpec, checked
from .scenarios import (ScenarioError, builtin_catalog, load_grid, resolve, run_scenario,
                        run_sweep)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _run_options(p, out_default="out"):
    p.add_argument("--out", default=out_default, help="output directory (default: %(default)s)")
    p.add_argument("--dt", type=_positive_float, help="override step size (s)")
    p.add_argument("--t-end", type=_positive_float, help="override final time (s)")
    p.add_argument("--stride", type=_positive_int, help="override record stride")
    p.add_argument("--eps-conv", type=_positive_float, default=Thresholds.eps_conv)
    p.add_argument("--eps-osc", type=_positive_float, default=Thresholds.eps_osc)
    p.add_argument("--eps-state", type=_positive_float, default=Thresholds.eps_state)
    p.add_argument("--seed-mode", choices=("averaged", "componentwise"), default="averaged")
    p.add_argument("--plot", choices=("on", "off"), default="on")
    p.add_argument("--diagnostics", choices=("separate", "append"), default="separate",
                   help="write diagnostics.csv or append columns to trajectory.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symcycle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write trajectory/diagnostics")
    p.add_argument("scenario", help="path to a .scn file or builtin scenario name")
    _run_options(p)

    p = sub.add_parser("classify", help="run a scenario and print its classification")
    p.add_argument("scenario")
    _run_options(p)

    p = sub.add_parser("reproduce", help="run builtin figure scenarios and check expectations")
    p.add_argument("figure", help="scenario name or 'all'")
    _run_options(p)

    p = sub.add_parser("equilibrium", help="print the fixed-point report as JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help=".scn file or builtin name whose system is solved")
    src.add_argument("--uniform", nargs=3, type=float, metavar=("K1", "K2", "K3"))
    src.add_argument("--rates", nargs="+", type=float, metavar="K",
                     help="k1 values, then k2, then k3 (3n numbers)")
    p.add_argument("--n", type=_positive_int, default=5)
    p.add_argument("--offsets", nargs=2, type=int, default=(-1, -2), metavar=("GEN", "SUP"))
    p.add_argument("--method", choices=("auto", "newton", "brouwer", "averaged"), default="auto")
    p.add_argument("--eps", type=_positive_float, default=0.01, help="brouwer step factor")
    p.add_argument("--seed-mode", choices=("averaged", "componentwise"), default="averaged")

    p = sub.add_parser("sweep", help="classify every cell of a sweep grid file")
    p.add_argument("grid", help="sweep file with a [sweep] section")
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--eps-conv", type=_positive_float, default=Thresholds.eps_conv)
    p.add_argument("--eps-osc", type=_positive_float, default=Thresholds.eps_osc)
    p.add_argument("--eps-state", type=_positive_float, default=Thresholds.eps_state)

    sub.add_parser("list-scenarios", help="print the builtin catalog")
    return parser


def _thresholds(args) -> Thresholds:
    return Thresholds(eps_conv=args.eps_conv, eps_osc=args.eps_osc, eps_state=args.eps_state)


def _catalog_names():
    return ", ".join(s.name for s in builtin_catalog())


def _scenario(args, ref):
    try:
        sc = resolve(ref)
    except ScenarioError as exc:
        if Path(ref).exists() or ref.endswith(".scn"):
            raise UsageError(str(exc)) from exc
        raise UsageError(f"unknown scenario {ref!r}; available: {_catalog_names()}") from exc
    return sc.with_overrides(args.dt, args.t_end, args.stride)


def _run(args, sc):
    return run_scenario(sc, args.out, thresholds=_thresholds(args), plot=args.plot == "on",
                        diagnostics=args.diagnostics, seed_mode=args.seed_mode)


def cmd_simulate(args) -> int:
    art = _run(args, _scenario(args, args.scenario))
    res = art.result
    print(f"wrote {art.directory}")
    if res.trajectory.diverged:
        print(f"numerical failure: {res.trajectory.failure}", file=sys.stderr)
        return EXIT_OK if res.matched else EXIT_NUMERICAL
    return EXIT_OK


def cmd_classify(args) -> int:
    art = _run(args, _scenario(args, args.scenario))
    print(art.classification_json.read_text(), end="")
    if art.matched is False:
        print(art.mismatch_report(), file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.figure == "all":
        scenarios = builtin_catalog()
    else:
        scenarios = [_scenario(args, args.figure)]
    scenarios = [s.with_overrides(args.dt, args.t_end, args.stride) for s in scenarios]
    rows, status = [], EXIT_OK
    for sc in scenarios:
        art = _run(args, sc)
        c = art.result.classification
        ok = art.matched
        rows.append((sc.name, sc.expected or "-", c.verdict,
                     "ok" if ok else ("MISMATCH" if ok is False else "-")))
        if ok is False:
            status = EXIT_MISMATCH
            print(art.mismatch_report(), file=sys.stderr)
    width = max(len("scenario"), *(len(r[0]) for r in rows))
    print(f"{'scenario':<{width}}  {'expected':<20}  {'verdict':<20}  result")
    for name, exp, got, res in rows:
        print(f"{name:<{width}}  {exp:<20}  {got:<20}  {res}")
    return status


def _equilibrium_spec(args) -> SystemSpec:
    g, s = args.offsets
    if args.scenario:
        try:
            return resolve(args.scenario).spec
        except ScenarioError as exc:
            raise UsageError(f"unknown scenario {args.scenario!r}; available: {_catalog_names()}") from exc
    if args.uniform:
        return SystemSpec.uniform(args.n, *args.uniform, gen_offset=g, sup_offset=s)
    if len(args.rates) != 3 * args.n:
        raise UsageError(f"--rates needs 3*n = {3 * args.n} values, got {len(args.rates)}")
    k = np.array(args.rates).reshape(3, args.n)
    return SystemSpec(args.n, k[0], k[1], k[2], g, s)


def cmd_equilibrium(args) -> int:
    spec = checked(_equilibrium_spec(args))
    if args.method == "auto":
        rep = solve_fixed_point(spec, seed_mode=args.seed_mode)
    elif args.method == "newton":
        rep = newton_fixed_point(spec, averaged_fixed_point(spec, args.seed_mode))
    elif args.method == "brouwer":
        rep = brouwer_iterate(spec, averaged_fixed_point(spec, args.seed_mode), args.eps)
    else:
        rep = _report(spec, averaged_fixed_point(spec), "averaged-approx", np.zeros(spec.n))
    print(json.dumps(rep.to_dict(), indent=2))
    if not rep.converged:
        print(f"numerical failure: {rep.method} did not converge (residual {rep.residual:.3g})",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        grid = load_grid(args.grid)
    except FileNotFoundError as exc:
        raise UsageError(f"sweep file not found: {args.grid}") from exc
    path, cells = run_sweep(grid, args.out, thresholds=_thresholds(args), jobs=args.jobs)
    print(path.read_text(), end="")
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_list(args) -> int:
    for sc in builtin_catalog():
        spec = sc.spec
        print(f"{sc.name:<14} {sc.figure:<8} n={spec.n} offsets=({spec.gen_offset},{spec.sup_offset}) "
              f"t_end={sc.config.t_end:g}s expect={sc.expected or '-'}")
        print(f"{'':<14} {sc.description}")
        print(f"{'':<14} source: {sc.source}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "reproduce": cmd_reproduce,
            "equilibrium": cmd_equilibrium, "sweep": cmd_sweep, "list-scenarios": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, EquilibriumError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
