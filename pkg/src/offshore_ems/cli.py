"""Command-line entry point ``offshore-ems``.

Exit codes: 0 success, 1 validation or user error, 2 solver failure, 3 I/O error.
Errors are also written to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

from .model import validate_model
from .problem import SolverError

EXIT_OK, EXIT_USER, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _error(kind: str, message: str, code: int, **extra) -> int:
    record = {"error": kind, "message": message, "exit_code": code, **extra}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    from .config import load_timeseries, parse_config_text

    path = Path(args.config)
    model, config = parse_config_text(path.read_text(), str(path))
    profiles = None
    if config.profile_files:
        profiles = load_timeseries(path.parent / config.profile_files[0])
    diagnostics = validate_model(model, profiles)
    for d in diagnostics:
        print(d)
    if diagnostics:
        return EXIT_USER
    print(f"{path}: ok ({len(model.nodes)} nodes, {len(model.edges)} edges, {len(model.devices)} devices)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .config import load_case
    from .results import BundleExistsError, write_results
    from .simulation import run_simulation

    case = load_case(args.config)
    config = case.config
    if args.steps is not None:
        config = replace(config, n_steps=args.steps)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise BundleExistsError(f"{out} exists and is not empty (use --force to overwrite)")

    def progress(w, t0, status, objective, wall):
        if not args.quiet:
            print(f"window {w} t0={t0} {status} objective={objective} ({wall:.2f} s)", file=sys.stderr)

    result = run_simulation(case.model, config, case.profiles, backend=None, progress=progress)
    write_results(result, out, case.model, config, case.profiles,
                  source_text=Path(args.config).read_text(), force=args.force)
    print(f"wrote {out} ({result.n_steps} steps)")
    return EXIT_OK


def _kpi_row(kpis: dict) -> dict:
    return {k: v for k, v in kpis.items() if not isinstance(v, dict)}


def cmd_kpi(args) -> int:
    from .results import read_results

    _, _, kpis, _ = read_results(args.bundle)
    if args.json:
        print(json.dumps(kpis, indent=2, sort_keys=True))
        return EXIT_OK
    for key, value in _kpi_row(kpis).items():
        print(f"{key:24s} {value}")
    gts = kpis.get("gas_turbines", {})
    if gts:
        print()
        print(pd.DataFrame.from_dict(gts, orient="index").to_string())
    return EXIT_OK


def cmd_compare(args) -> int:
    from .kpi import compare_cases
    from .results import read_results

    loaded = [read_results(b) for b in args.bundles]
    names = [Path(b).name or str(b) for b in args.bundles]
    table = compare_cases([r for r, *_ in loaded], names, [m for _, m, *_ in loaded])
    if args.csv:
        print(table.to_csv(lineterminator="\n"), end="")
    else:
        print(table.to_string())
    return EXIT_OK


def cmd_export(args) -> int:
    from .assembly import assemble
    from .config import load_case
    from .problem import export_problem
    from .simulation import roll_forward

    case = load_case(args.config)
    state = roll_forward(case.model, case.config, case.profiles, n_steps=args.at)
    problem = assemble(case.model, case.config, case.profiles, state.boundary, args.at)
    path = export_problem(problem, args.out, args.format)
    print(f"wrote {path} ({problem.n_vars} variables, {len(problem.constraints)} constraints)")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_bundle, plot_comparison
    from .results import read_results

    loaded = [read_results(b) for b in args.bundles]
    out = Path(args.out)
    written = []
    for bundle, (result, model, _, _) in zip(args.bundles, loaded):
        target = out / Path(bundle).name if len(loaded) > 1 else out
        written += plot_bundle(result, model, target)
    if len(loaded) > 1:
        names = [Path(b).name for b in args.bundles]
        written.append(plot_comparison([r for r, *_ in loaded], names, [m for _, m, *_ in loaded], out))
    for p in written:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offshore-ems",
        description="Rolling-horizon operational planning of offshore multi-carrier energy systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a case file and its profiles")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run the rolling-horizon simulation and write a result bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--steps", type=int, help="number of steps to simulate (default: from the case)")
    p.add_argument("--quiet", action="store_true", help="no per-window progress on stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kpi", help="print the KPI summary of a bundle")
    p.add_argument("bundle")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_kpi)

    p = sub.add_parser("compare", help="KPI ratios of several bundles against the first")
    p.add_argument("bundles", nargs="+")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-problem", help="write the optimisation problem of one window")
    p.add_argument("--config", required=True)
    p.add_argument("--at", type=int, default=0, help="window start step")
    p.add_argument("--format", choices=["lp", "mps"], default="lp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("plot", help="static charts of one or more bundles")
    p.add_argument("bundles", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        return _error("solver", str(exc), EXIT_SOLVER, status=exc.solution.status, window=exc.window)
    except (ValueError, IndexError) as exc:
        # configuration, unit, time-series, assembly and span errors all derive from ValueError
        return _error(type(exc).__name__, str(exc), EXIT_USER)
    except FileExistsError as exc:
        return _error(type(exc).__name__, str(exc), EXIT_USER)
    except OSError as exc:
        return _error(type(exc).__name__, str(exc), EXIT_IO)


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
