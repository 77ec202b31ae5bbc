"""End-to-end scenario runs: surrogate, model, solve, reports.

A scenario is described by one YAML file::

    label: case-C
    grid: ../ieee30.yaml          # input paths are relative to the config file
    series: ../series24.yaml
    horizon: {start: 12, length: 6}   # optional window of the series
    dr_enabled: true
    scc_enabled: true
    dr: default                   # or a full DR mapping (see DrSpec.from_dict)
    threshold: 5.0                # optional; defaults to the grid's threshold
    surrogate: {source: train, strategy: exhaustive}   # or {source: load, path: ...}
    solve: {gap: 1.0e-3, time_limit: 600, node_selection: best-bound-dive}
    output_dir: out/case-C        # relative to the working directory
    seed: 0

Unknown keys are rejected at every level. The solution file written by
:func:`run_scenario` embeds the grid, DR data, surrogate and inputs, so every
report can be rebuilt from it alone.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .dr import DEFAULT_DR, DrDecisions, DrSpec, consumer_payment, effective_demand
from .milp import MilpProblem
from .network import GridModel, grid_from_dict, grid_to_dict, load_grid
from .solver import SolveOptions, SolveResult, solve_milp, write_mps
from .surrogate import (DEFAULT_ALPHA_GRID, SccSurrogate, fit_surrogate, generate_samples,
                        load_surrogate, surrogate_from_dict, surrogate_to_dict)
from .uc_model import (TimeSeriesInputs, UcSolution, build_uc_milp, extract_solution, load_series,
                       operation_cost)

logger = logging.getLogger(__name__)

SOLUTION_FORMAT = "sccuc-solution/1"
CASES_DIR = Path(__file__).parent / "data" / "cases"
CASES = {"A": "case_a.yaml", "B": "case_b.yaml", "C": "case_c.yaml"}

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_NO_INCUMBENT = 0, 1, 2, 3


class ScenarioError(RuntimeError):
    """A stage of a scenario run failed; the message names the stage."""


class ConfigError(ScenarioError):
    pass


# -------------------------------------------------------------------- config
@dataclass
class SurrogateSource:
    source: str = "train"            # "train" or "load"
    path: Path | None = None
    strategy: str = "exhaustive"
    count: int | None = None
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID


@dataclass
class ScenarioConfig:
    label: str
    grid: Path
    series: Path
    dr_enabled: bool = False
    scc_enabled: bool = False
    dr: DrSpec = DEFAULT_DR
    threshold: float | None = None
    horizon: tuple[int, int] | None = None  # (start, length)
    surrogate: SurrogateSource = field(default_factory=SurrogateSource)
    solve: SolveOptions = field(default_factory=SolveOptions)
    output_dir: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        for what, p in (("grid", self.grid), ("series", self.series)):
            if not Path(p).is_file():
                raise ConfigError(f"config.{what}: file not found: {p}")
        if self.surrogate.source == "load":
            if self.surrogate.path is None or not Path(self.surrogate.path).is_file():
                raise ConfigError(f"config.surrogate.path: file not found: {self.surrogate.path}")
        if self.horizon is not None and (self.horizon[0] < 0 or self.horizon[1] < 1):
            raise ConfigError("config.horizon: need start >= 0 and length >= 1")


_TOP = {"label", "grid", "series", "horizon", "dr_enabled", "scc_enabled", "dr", "threshold",
        "surrogate", "solve", "output_dir", "seed"}
_SURR = {"source", "path", "strategy", "count", "alpha_grid"}
_SOLVE = {f.name for f in dataclasses.fields(SolveOptions)}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def config_from_dict(d: dict, base: Path = Path(".")) -> ScenarioConfig:
    _reject_unknown(d, _TOP, "config")
    for key in ("label", "grid", "series"):
        if key not in d:
            raise ConfigError(f"config: missing key {key!r}")

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    sd = d.get("surrogate") or {}
    _reject_unknown(sd, _SURR, "config.surrogate")
    if sd.get("source", "train") not in ("train", "load"):
        raise ConfigError("config.surrogate.source: expected 'train' or 'load'")
    surr = SurrogateSource(
        source=sd.get("source", "train"), path=rel(sd["path"]) if sd.get("path") else None,
        strategy=sd.get("strategy", "exhaustive"), count=sd.get("count"),
        alpha_grid=tuple(float(a) for a in sd.get("alpha_grid", DEFAULT_ALPHA_GRID)))

    so = d.get("solve") or {}
    _reject_unknown(so, _SOLVE, "config.solve")
    try:
        solve = SolveOptions(**so)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config.solve: {e}") from None

    dr = d.get("dr", "default")
    if dr == "default":
        spec = DEFAULT_DR
    else:
        try:
            spec = DrSpec.from_dict(dr)
        except ValueError as e:
            raise ConfigError(f"config.{e}") from None

    hz = d.get("horizon")
    if hz is not None:
        _reject_unknown(hz, {"start", "length"}, "config.horizon")
        hz = (int(hz.get("start", 0)), int(hz["length"]))

    return ScenarioConfig(
        label=str(d["label"]), grid=rel(d["grid"]), series=rel(d["series"]),
        dr_enabled=bool(d.get("dr_enabled", False)), scc_enabled=bool(d.get("scc_enabled", False)),
        dr=spec, threshold=None if d.get("threshold") is None else float(d["threshold"]),
        horizon=hz, surrogate=surr, solve=solve,
        output_dir=Path(d.get("output_dir", f"out/{d['label']}")), seed=int(d.get("seed", 0)))


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return config_from_dict(yaml.safe_load(path.read_text()) or {}, base=path.parent)


def case_config(case: str) -> ScenarioConfig:
    """One of the bundled cases ``A`` (no DR), ``B`` (DR) or ``C`` (DR + SCC)."""
    try:
        name = CASES[case.upper()]
    except KeyError:
        raise ConfigError(f"unknown case {case!r}; expected one of {sorted(CASES)}") from None
    return load_config(CASES_DIR / name)


# --------------------------------------------------------------------- stages
def obtain_surrogate(cfg: ScenarioConfig, grid: GridModel) -> SccSurrogate:
    if cfg.surrogate.source == "load":
        return load_surrogate(cfg.surrogate.path)
    samples = generate_samples(grid, cfg.surrogate.strategy, cfg.surrogate.alpha_grid,
                               count=cfg.surrogate.count, seed=cfg.seed)
    return fit_surrogate(grid, samples)


def scenario_inputs(cfg: ScenarioConfig, grid: GridModel) -> TimeSeriesInputs:
    inputs = load_series(cfg.series, grid)
    if cfg.horizon is not None:
        start, length = cfg.horizon
        if start + length > inputs.horizon:
            raise ConfigError(f"config.horizon: window {start}+{length} exceeds the "
                              f"{inputs.horizon}-period series")
        inputs = inputs.window(start, length)
    return inputs


def build_problem(cfg: ScenarioConfig, grid: GridModel, inputs: TimeSeriesInputs,
                  surrogate: SccSurrogate | None) -> MilpProblem:
    return build_uc_milp(grid, inputs, cfg.dr, dr_enabled=cfg.dr_enabled,
                         scc_enabled=cfg.scc_enabled, surrogate=surrogate,
                         threshold=cfg.threshold)


class _Stage:
    """Re-raise any failure inside the block as a ScenarioError naming the stage."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        logger.info("stage %s", self.name)

    def __exit__(self, typ, exc, tb):
        if exc is not None and not isinstance(exc, ScenarioError):
            raise ScenarioError(f"{self.name}: {exc}") from exc
        return False


@dataclass
class ScenarioBundle:
    label: str
    status: str
    document: dict                  # content of the solution file
    solution: UcSolution | None
    cost: analysis.CostReport | None
    profile: analysis.SccProfile | None
    inadequate: list[int] | None
    files: dict[str, Path]
    result: SolveResult | None = None

    @property
    def exit_code(self) -> int:
        return exit_code(self.status, self.solution is not None)


def exit_code(status: str, has_solution: bool) -> int:
    if status == "infeasible":
        return EXIT_INFEASIBLE
    if not has_solution:
        return EXIT_NO_INCUMBENT
    return EXIT_OK


def run_scenario(cfg: ScenarioConfig) -> ScenarioBundle:
    """Train or load the surrogate, build, solve, analyze and write every output."""
    out = Path(cfg.output_dir)
    with _Stage("load"):
        grid = load_grid(cfg.grid)
        inputs = scenario_inputs(cfg, grid)
    with _Stage("surrogate"):
        surrogate = obtain_surrogate(cfg, grid)
    with _Stage("build"):
        problem = build_problem(cfg, grid, inputs, surrogate)
    with _Stage("solve"):
        result = solve_milp(problem, cfg.solve)
    with _Stage("extract"):
        sol = extract_solution(problem, result.x) if result.x is not None and result.status != "unbounded" else None
    threshold = grid.scc_threshold if cfg.threshold is None else cfg.threshold
    doc = solution_document(cfg, grid, surrogate, inputs, result, sol, threshold)
    with _Stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        files = {"solution": out / f"{cfg.label}_solution.json", "log": out / f"{cfg.label}_solve.log"}
        files["solution"].write_text(dump_document(doc))
        with files["log"].open("w") as fh:
            fh.write(f"# {cfg.label}: {problem.n_rows} rows, {problem.n_cols} columns, "
                     f"{problem.n_integer} integer\n")
            fh.write("#     node incumbent bound gap\n")
            for line in result.log:
                fh.write(line.format() + "\n")
            fh.write(f"# status {result.status} nodes {result.nodes} "
                     f"lp_iterations {result.lp_iterations} wall {result.wall_time:.2f}s\n")
    with _Stage("report"):
        rep = report_from_document(doc, out)
    files.update(rep.files)
    return ScenarioBundle(cfg.label, result.status, doc, sol, rep.cost, rep.profile,
                          rep.inadequate, files, result)


# ------------------------------------------------------------- solution file
def _arr(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def solution_document(cfg: ScenarioConfig, grid: GridModel, surrogate: SccSurrogate,
                      inputs: TimeSeriesInputs, result: SolveResult, sol: UcSolution | None,
                      threshold: float) -> dict:
    """Self-contained, deterministic description of a solved scenario (no wall time)."""
    doc = {
        "format": SOLUTION_FORMAT,
        "label": cfg.label,
        "status": result.status,
        "objective": None if sol is None else sol.objective,
        "best_bound": None if not math.isfinite(result.best_bound) else result.best_bound,
        "nodes": result.nodes,
        "lp_iterations": result.lp_iterations,
        "dr_enabled": cfg.dr_enabled,
        "scc_enabled": cfg.scc_enabled,
        "threshold": threshold,
        "horizon": None if cfg.horizon is None else list(cfg.horizon),
        "grid": grid_to_dict(grid),
        "dr": cfg.dr.to_dict() if cfg.dr_enabled else None,
        "surrogate": surrogate_to_dict(surrogate),
        "inputs": {"demand": _arr(inputs.demand), "price": _arr(inputs.price), "alpha": _arr(inputs.alpha)},
        "schedule": None,
    }
    if sol is not None:
        sched = {"u": _arr(sol.u), "p": _arr(sol.p), "pc": _arr(sol.pc),
                 "cst": _arr(sol.cst), "csh": _arr(sol.csh)}
        if sol.dr is not None:
            sched.update(curtail=_arr(sol.dr.curtail), shift_in=_arr(sol.dr.shift_in),
                         shift_out=_arr(sol.dr.shift_out), z_in=_arr(sol.dr.z_in),
                         z_out=_arr(sol.dr.z_out))
        doc["schedule"] = sched
    return doc


def dump_document(doc: dict) -> str:
    # json writes floats with repr: identical inputs give identical bytes
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_document(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"solution file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format") != SOLUTION_FORMAT:
        raise ScenarioError(f"{path}: not a solution file (format {doc.get('format')!r})")
    return doc


def solution_from_document(doc: dict) -> tuple[UcSolution | None, GridModel, DrSpec | None, SccSurrogate]:
    """Rebuild the typed solution and its context from a solution document."""
    grid = grid_from_dict(doc["grid"])
    spec = DrSpec.from_dict(doc["dr"]) if doc.get("dr") else None
    surrogate = surrogate_from_dict(doc["surrogate"])
    sched = doc.get("schedule")
    if sched is None:
        return None, grid, spec, surrogate
    inp = doc["inputs"]
    T = len(inp["demand"])
    dr = None
    if spec is not None:
        dr = DrDecisions(np.array(sched["curtail"]).reshape(spec.n_classes, T),
                         np.array(sched["shift_in"]), np.array(sched["shift_out"]),
                         np.array(sched["z_in"]), np.array(sched["z_out"]))
    u = np.array(sched["u"]).reshape(grid.n_gen, T)
    p = np.array(sched["p"]).reshape(grid.n_gen, T)
    gens = grid.generators
    op = operation_cost(u, p, [g.c_nl for g in gens], [g.c_m for g in gens],
                        [g.k_st for g in gens], [g.k_sh for g in gens], [g.u0 for g in gens])
    _, pay = consumer_payment(inp["demand"], dr, inp["price"], spec)
    sol = UcSolution(
        u=u, p=p, pc=np.array(sched["pc"]).reshape(grid.n_ibr, T),
        cst=np.array(sched["cst"]).reshape(grid.n_gen, T), csh=np.array(sched["csh"]).reshape(grid.n_gen, T),
        eta=None, dr=dr, objective=float(doc["objective"]), operation_cost=op, payment=pay,
        demand=np.array(inp["demand"], dtype=float), price=np.array(inp["price"], dtype=float),
        alpha=np.array(inp["alpha"], dtype=float).reshape(grid.n_ibr, T))
    return sol, grid, spec, surrogate


# -------------------------------------------------------------------- reports
@dataclass
class Report:
    cost: analysis.CostReport | None
    profile: analysis.SccProfile | None
    inadequate: list[int] | None
    summary: dict
    files: dict[str, Path]


def report_from_document(doc: dict, out_dir, source: str = "surrogate") -> Report:
    """Cost table, SCC profile, minima series and summary derived from ``doc`` alone."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = doc["label"]
    sol, grid, spec, surrogate = solution_from_document(doc)
    summary = {"label": label, "status": doc["status"], "dr_enabled": doc["dr_enabled"],
               "scc_enabled": doc["scc_enabled"], "threshold": doc["threshold"], "source": source}
    files: dict[str, Path] = {}
    cost = profile = inadequate = None
    if sol is not None:
        cost = analysis.cost_breakdown(sol, sol.price, spec, label=label)
        profile = analysis.scc_profile(sol, grid, source, surrogate)
        inadequate = analysis.inadequate_buses(profile, doc["threshold"])
        files["costs"] = analysis.write_cost_table([cost], out / f"{label}_costs.csv")
        files["profile"] = analysis.write_profile_table(profile, out / f"{label}_scc_{source}.csv")
        files["minima"] = analysis.write_minima_table(profile, out / f"{label}_scc_minima_{source}.csv",
                                                      doc["threshold"])
        summary.update(
            operation_cost=cost.operation, payment=cost.payment, total_cost=cost.total,
            inadequate_buses=inadequate, **_dr_totals(sol))
    files["summary"] = out / f"{label}_summary.json"
    files["summary"].write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return Report(cost, profile, inadequate, summary, files)


def _dr_totals(sol: UcSolution) -> dict:
    eff = effective_demand(sol.demand, sol.dr)
    d = sol.dr
    return {
        "baseline_demand_average": float(np.mean(sol.demand)),
        "demand_average": float(np.mean(eff)),
        "curtailment_total": 0.0 if d is None else float(np.sum(d.curtail)),
        "shift_in_total": 0.0 if d is None else float(np.sum(d.shift_in)),
        "shift_out_total": 0.0 if d is None else float(np.sum(d.shift_out)),
    }


# ---------------------------------------------------------------- comparison
_COMPARE_FIELDS = ("operation_cost", "payment", "total_cost", "demand_average",
                   "curtailment_total", "shift_in_total")


def compare_scenarios(bundles: list) -> list[dict]:
    """Side-by-side rows; deltas are taken against the first scenario.

    ``bundles`` may hold :class:`ScenarioBundle` objects, solution documents
    or solution file paths.
    """
    docs = [b.document if isinstance(b, ScenarioBundle) else b if isinstance(b, dict)
            else load_document(b) for b in bundles]
    if len(docs) < 2:
        raise ScenarioError("compare needs at least two scenarios")
    ref_grid = docs[0]["grid"]
    for d in docs[1:]:
        if d["grid"] != ref_grid:
            raise ScenarioError(f"scenario {d['label']!r} uses a different grid than {docs[0]['label']!r}")
    rows = []
    for d in docs:
        sol, grid, spec, surrogate = solution_from_document(d)
        row = {"label": d["label"], "status": d["status"]}
        if sol is None:
            row.update({k: math.nan for k in _COMPARE_FIELDS}, inadequate_buses=None)
        else:
            cost = analysis.cost_breakdown(sol, sol.price, spec, label=d["label"])
            prof = analysis.scc_profile(sol, grid, "surrogate", surrogate)
            row.update(operation_cost=cost.operation, payment=cost.payment, total_cost=cost.total,
                       inadequate_buses=analysis.inadequate_buses(prof, d["threshold"]), **_dr_totals(sol))
        rows.append(row)
    for row in rows:
        for k in _COMPARE_FIELDS:
            row[f"delta_{k}"] = row[k] - rows[0][k]
    return rows


def write_comparison(rows: list[dict], path) -> Path:
    path = Path(path)
    cols = ["label", "status", *_COMPARE_FIELDS, *(f"delta_{k}" for k in _COMPARE_FIELDS), "inadequate_buses"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([" ".join(map(str, r[c])) if c == "inadequate_buses" and r[c] is not None
                        else repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in cols])
    return path


def export_mps(cfg: ScenarioConfig, path) -> Path:
    grid = load_grid(cfg.grid)
    inputs = scenario_inputs(cfg, grid)
    surrogate = obtain_surrogate(cfg, grid) if cfg.scc_enabled else None
    p = build_problem(cfg, grid, inputs, surrogate)
    write_mps(p, path)
    return Path(path)
