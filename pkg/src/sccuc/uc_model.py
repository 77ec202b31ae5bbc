"""Unit-commitment MILP with optional demand response and SCC constraints."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .dr import DrDecisions, DrSpec, add_consumer_payment, build_dr_block, consumer_payment
from .milp import MilpProblem
from .network import GridModel
from .surrogate import SccSurrogate


class ModelError(ValueError):
    pass


class SolutionMismatchError(RuntimeError):
    """Recomputed costs disagree with the solver objective (an indexing bug)."""


@dataclass
class TimeSeriesInputs:
    demand: np.ndarray  # (T,) MWh
    price: np.ndarray   # (T,) currency/MWh
    alpha: np.ndarray   # (C, T) availability in [0, 1]

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        T = self.demand.size
        if self.price.shape != (T,) or self.alpha.ndim != 2 or self.alpha.shape[1] != T:
            raise ModelError("demand, price and alpha must share one horizon")
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise ModelError("alpha must lie in [0, 1]")

    @property
    def horizon(self) -> int:
        return self.demand.size

    def window(self, start: int, length: int) -> "TimeSeriesInputs":
        s = slice(start, start + length)
        return TimeSeriesInputs(self.demand[s], self.price[s], self.alpha[:, s])


def load_series(path, grid: GridModel) -> TimeSeriesInputs:
    """Read ``demand``, ``price`` and per-IBR ``alpha`` series from YAML."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"series file not found: {path}")
    d = yaml.safe_load(path.read_text())
    unknown = set(d) - {"demand", "price", "alpha"}
    if unknown:
        raise ModelError(f"series: unknown field(s) {sorted(unknown)}")
    alpha = d.get("alpha") or {}
    missing = [c.name for c in grid.ibrs if c.name not in alpha]
    if missing:
        raise ModelError(f"series.alpha: missing IBR(s) {missing}")
    extra = set(alpha) - {c.name for c in grid.ibrs}
    if extra:
        raise ModelError(f"series.alpha: unknown IBR(s) {sorted(extra)}")
    T = len(d["demand"])
    A = np.array([alpha[c.name] for c in grid.ibrs], dtype=float).reshape(grid.n_ibr, T)
    return TimeSeriesInputs(d["demand"], d["price"], A)


# ----------------------------------------------------------------- building
def build_uc_milp(grid: GridModel, inputs: TimeSeriesInputs, spec: DrSpec | None = None, *,
                  dr_enabled: bool = False, scc_enabled: bool = False,
                  surrogate: SccSurrogate | None = None, threshold: float | None = None,
                  relax_eta: bool = True) -> MilpProblem:
    """Assemble the dispatch MILP.

    The objective is generator cost (no-load, marginal, start-up, shut-down)
    plus the consumer payment. Without DR the payment is the constant
    ``sum(price * demand)`` carried in ``objective_offset``.
    """
    if inputs.alpha.shape[0] != grid.n_ibr:
        raise ModelError("alpha rows must match the grid's IBRs")
    if dr_enabled and spec is None:
        raise ModelError("dr_enabled requires a DrSpec")
    if scc_enabled and surrogate is None:
        raise ModelError("scc_enabled requires a surrogate")
    G, C, T = grid.n_gen, grid.n_ibr, inputs.horizon
    flags = "dr" if dr_enabled else "nodr"
    p = MilpProblem(name=f"uc_{flags}_T{T}")
    gens = grid.generators

    for t in range(T):
        for g in range(G):
            p.add_var(("u", g, t), 0.0, 1.0, integer=True, cost=gens[g].c_nl)
    for t in range(T):
        for g in range(G):
            p.add_var(("p", g, t), 0.0, gens[g].p_max, cost=gens[g].c_m)
    for t in range(T):
        for g in range(G):
            p.add_var(("cst", g, t), 0.0, cost=1.0)
            p.add_var(("csh", g, t), 0.0, cost=1.0)
    for t in range(T):
        for c in range(C):
            p.add_var(("pc", c, t), 0.0, inputs.alpha[c, t] * grid.ibrs[c].p_max)

    if dr_enabled:
        build_dr_block(spec, inputs.demand, p)
    add_consumer_payment(p, spec if dr_enabled else None, inputs.demand, inputs.price)

    for t in range(T):
        coeffs = {("p", g, t): 1.0 for g in range(G)}
        coeffs.update({("pc", c, t): 1.0 for c in range(C)})
        if dr_enabled:
            # generation + wind = demand - out + in - curtailment
            coeffs[("sl_in", t)] = -1.0
            coeffs[("sl_out", t)] = 1.0
            coeffs.update({("curt", n, t): 1.0 for n in range(spec.n_classes)})
        p.add_row(("balance", t), coeffs, "E", inputs.demand[t])
    for t in range(T):
        for g, gen in enumerate(gens):
            p.add_row(("pmin", g, t), {("p", g, t): 1.0, ("u", g, t): -gen.p_min}, "G", 0.0)
            p.add_row(("pmax", g, t), {("p", g, t): 1.0, ("u", g, t): -gen.p_max}, "L", 0.0)
    for t in range(T):
        for g, gen in enumerate(gens):
            st = {("cst", g, t): 1.0, ("u", g, t): -gen.k_st}
            sh = {("csh", g, t): 1.0, ("u", g, t): gen.k_sh}
            if t > 0:
                st[("u", g, t - 1)] = gen.k_st
                sh[("u", g, t - 1)] = -gen.k_sh
                rhs_st = rhs_sh = 0.0
            else:
                rhs_st = -gen.k_st * gen.u0
                rhs_sh = gen.k_sh * gen.u0
            p.add_row(("startup", g, t), st, "G", rhs_st)
            p.add_row(("shutdown", g, t), sh, "G", rhs_sh)

    p.meta.update(
        G=G, C=C, T=T, dr_enabled=dr_enabled, scc_enabled=False,
        c_nl=np.array([g.c_nl for g in gens]), c_m=np.array([g.c_m for g in gens]),
        k_st=np.array([g.k_st for g in gens]), k_sh=np.array([g.k_sh for g in gens]),
        u0=np.array([g.u0 for g in gens]), demand=inputs.demand.copy(),
        price=inputs.price.copy(), alpha=inputs.alpha.copy(),
        dr_spec=spec if dr_enabled else None,
    )
    if scc_enabled:
        th = grid.scc_threshold if threshold is None else threshold
        p = add_scc_constraints(p, surrogate, th, relax_eta=relax_eta)
    return p


def add_scc_constraints(p: MilpProblem, s: SccSurrogate, threshold: float,
                        relax_eta: bool = True) -> MilpProblem:
    """Copy of ``p`` with surrogate SCC rows and McCormick-linearized pair products.

    For every bus and period the surrogate current must reach ``threshold``;
    ``("eta", m, t)`` stands for ``u_g1 * u_g2`` through the three envelope
    rows, which are exact whenever ``u`` is binary. ``relax_eta`` keeps
    ``eta`` continuous in [0, 1].
    """
    G, C, T = p.meta["G"], p.meta["C"], p.meta["T"]
    if s.n_gen != G or s.n_ibr != C:
        raise ModelError("surrogate dimensions do not match the problem")
    q = p.copy()
    q.name = p.name if p.name.endswith("_scc") else f"{p.name}_scc"
    alpha = q.meta["alpha"]
    for t in range(T):
        for m in range(len(s.pairs)):
            q.add_var(("eta", m, t), 0.0, 1.0, integer=not relax_eta)
    offsets = s.offsets()
    for t in range(T):
        for b, bus in enumerate(s.buses):
            coeffs = {("u", g, t): s.k_g[b, g] for g in range(G)}
            coeffs.update({("eta", m, t): s.k_m[b, m] for m in range(len(s.pairs))})
            rhs = threshold + offsets[b] - float(s.k_c[b] @ alpha[:, t])
            q.add_row(("scc", bus, t), coeffs, "G", rhs)
    for t in range(T):
        for m, (g1, g2) in enumerate(s.pairs):
            q.add_row(("mc1", m, t), {("eta", m, t): 1.0, ("u", g1, t): -1.0}, "L", 0.0)
            q.add_row(("mc2", m, t), {("eta", m, t): 1.0, ("u", g2, t): -1.0}, "L", 0.0)
            q.add_row(("mc3", m, t), {("eta", m, t): 1.0, ("u", g1, t): -1.0, ("u", g2, t): -1.0}, "G", -1.0)
    q.meta.update(scc_enabled=True, pairs=list(s.pairs), threshold=threshold, relax_eta=relax_eta)
    return q


# ---------------------------------------------------------------- solutions
@dataclass
class UcSolution:
    u: np.ndarray       # (G, T)
    p: np.ndarray       # (G, T)
    pc: np.ndarray      # (C, T)
    cst: np.ndarray     # (G, T)
    csh: np.ndarray     # (G, T)
    eta: np.ndarray | None
    dr: DrDecisions | None
    objective: float
    operation_cost: float
    payment: float
    demand: np.ndarray  # baseline (T,)
    price: np.ndarray   # (T,)
    alpha: np.ndarray   # (C, T)

    @property
    def total_cost(self) -> float:
        return self.operation_cost + self.payment

    @property
    def horizon(self) -> int:
        return self.u.shape[1]


def operation_cost(u, p, c_nl, c_m, k_st, k_sh, u0) -> float:
    """Generator cost with start-up/shut-down charges recomputed from the commitment."""
    u = np.asarray(u, dtype=float)
    prev = np.hstack([np.asarray(u0, dtype=float)[:, None], u[:, :-1]])
    st = np.maximum(0.0, u - prev) * np.asarray(k_st)[:, None]
    sh = np.maximum(0.0, prev - u) * np.asarray(k_sh)[:, None]
    return float(np.sum(np.asarray(c_nl)[:, None] * u) + np.sum(np.asarray(c_m)[:, None] * p)
                 + np.sum(st) + np.sum(sh))


def extract_solution(p: MilpProblem, x, rtol: float = 1e-6) -> UcSolution:
    """Typed view of a solution vector, cross-checked against the objective."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n_cols,):
        raise ModelError(f"solution has {x.size} entries, problem has {p.n_cols} columns")
    mt = p.meta
    G, C, T = mt["G"], mt["C"], mt["T"]
    reg = p.registry

    def grab(kind, n):
        idx = np.array([[reg[(kind, i, t)] for t in range(T)] for i in range(n)], dtype=int).reshape(n, T)
        return x[idx]

    def grab_t(kind):
        return x[np.array([reg[(kind, t)] for t in range(T)], dtype=int)]

    u = np.round(grab("u", G)) + 0.0  # no negative zeros
    pg = grab("p", G)
    sol_eta = grab("eta", len(mt["pairs"])) if mt.get("scc_enabled") else None
    dr = None
    spec = mt.get("dr_spec")
    if mt["dr_enabled"]:
        N = spec.n_classes
        dr = DrDecisions(grab("curt", N), grab_t("sl_in"), grab_t("sl_out"),
                         np.round(grab_t("z_in")) + 0.0, np.round(grab_t("z_out")) + 0.0)
    op = operation_cost(u, pg, mt["c_nl"], mt["c_m"], mt["k_st"], mt["k_sh"], mt["u0"])
    _, pay = consumer_payment(mt["demand"], dr, mt["price"], spec)
    obj = p.objective(x)
    if abs(op + pay - obj) > rtol * max(1.0, abs(obj)):
        raise SolutionMismatchError(
            f"recomputed cost {op + pay:.10g} differs from objective {obj:.10g}")
    return UcSolution(u=u, p=pg, pc=grab("pc", C), cst=grab("cst", G), csh=grab("csh", G),
                      eta=sol_eta, dr=dr, objective=obj, operation_cost=op, payment=pay,
                      demand=mt["demand"].copy(), price=mt["price"].copy(), alpha=mt["alpha"].copy())
