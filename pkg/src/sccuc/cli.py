"""Command line: ``sccuc {train-scc, solve, report, compare, export-mps}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .network import load_grid
from .scenario import (EXIT_ERROR, ScenarioError, case_config, compare_scenarios, export_mps,
                       load_config, load_document, report_from_document, run_scenario,
                       write_comparison)
from .surrogate import (DEFAULT_ALPHA_GRID, fit_surrogate, generate_samples, save_surrogate,
                        scatter_table, validation_report)

log = logging.getLogger("sccuc")


def _scenario(args):
    if bool(args.config) == bool(args.case):
        raise ScenarioError("give exactly one of CONFIG or --case")
    cfg = load_config(args.config) if args.config else case_config(args.case)
    solve = cfg.solve
    if args.gap is not None:
        solve = dataclasses.replace(solve, gap=args.gap)
    if args.time_limit is not None:
        solve = dataclasses.replace(solve, time_limit=args.time_limit)
    if args.deterministic is not None:
        solve = dataclasses.replace(solve, deterministic=args.deterministic)
    cfg.solve = solve
    if args.seed is not None:
        cfg.seed = args.seed
    if args.horizon:
        start, _, length = args.horizon.partition(":")
        cfg.horizon = (int(start), int(length))
    if getattr(args, "out", None):
        cfg.output_dir = Path(args.out)
    return cfg


def cmd_train(args) -> int:
    grid = load_grid(args.grid)
    samples = generate_samples(grid, args.strategy, DEFAULT_ALPHA_GRID, count=args.count, seed=args.seed)
    train, hold = samples.split(args.holdout, seed=args.seed) if args.holdout > 0 else (samples, None)
    s = fit_surrogate(grid, train)
    save_surrogate(s, args.out)
    print(f"trained on {len(train)} samples; max normal-equation residual "
          f"{max(s.diagnostics.normal_residual):.3e}; wrote {args.out}")
    if hold is not None:
        d = validation_report(s, hold)
        print(f"holdout {len(hold)}: max |error| {max(d.max_abs_error):.4f} p.u., "
              f"max overestimate {max(d.max_overestimate):.4f} p.u.")
    if args.scatter:
        bus = args.scatter_bus if args.scatter_bus is not None else grid.buses[0]
        scatter_table(s, hold if hold is not None else train, bus, args.scatter)
        print(f"scatter table for bus {bus}: {args.scatter}")
    return 0


def cmd_solve(args) -> int:
    cfg = _scenario(args)
    b = run_scenario(cfg)
    print(f"{b.label}: {b.status}")
    if b.cost is not None:
        print(f"  operation {b.cost.operation:.2f}  payment {b.cost.payment:.2f}  total {b.cost.total:.2f}")
        print(f"  inadequate buses: {b.inadequate}")
    for k, p in sorted(b.files.items()):
        print(f"  {k}: {p}")
    return b.exit_code


def cmd_report(args) -> int:
    doc = load_document(args.solution)
    out = Path(args.out) if args.out else Path(args.solution).parent
    rep = report_from_document(doc, out, source=args.source)
    print(json.dumps(rep.summary, indent=1, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    rows = compare_scenarios(args.solutions)
    if args.out:
        write_comparison(rows, args.out)
    for r in rows:
        print(f"{r['label']:>10}  total {r['total_cost']:.2f}  (delta {r['delta_total_cost']:+.2f})  "
              f"avg demand {r['demand_average']:.1f}  curtailed {r['curtailment_total']:.1f}  "
              f"inadequate {r['inadequate_buses']}")
    return 0


def cmd_export(args) -> int:
    cfg = _scenario(args)
    export_mps(cfg, args.out)
    print(f"wrote {args.out}")
    return 0


def _scenario_flags(sp):
    sp.add_argument("config", nargs="?", help="scenario YAML file")
    sp.add_argument("--case", choices=["A", "B", "C", "a", "b", "c"], help="bundled scenario")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--gap", type=float)
    sp.add_argument("--time-limit", type=float)
    sp.add_argument("--horizon", help="START:LENGTH window of the series")
    det = sp.add_mutually_exclusive_group()
    det.add_argument("--deterministic", dest="deterministic", action="store_true", default=None)
    det.add_argument("--no-deterministic", dest="deterministic", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sccuc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train-scc", help="fit the SCC surrogate on oracle samples")
    sp.add_argument("--grid", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--strategy", choices=["exhaustive", "random"], default="exhaustive")
    sp.add_argument("--count", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--holdout", type=float, default=0.0, help="fraction kept out for validation")
    sp.add_argument("--scatter", help="write an actual-vs-approx table here")
    sp.add_argument("--scatter-bus", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("solve", help="run a scenario end to end")
    _scenario_flags(sp)
    sp.add_argument("--out", help="output directory (overrides the config)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("report", help="rebuild reports from a solution file")
    sp.add_argument("solution")
    sp.add_argument("--source", choices=["surrogate", "oracle"], default="surrogate")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("compare", help="compare solved scenarios")
    sp.add_argument("solutions", nargs="+")
    sp.add_argument("--out", help="CSV file for the comparison table")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("export-mps", help="write a scenario's MILP as free MPS")
    _scenario_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ValueError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
