"""Post-solve adequacy screening and cost reporting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dr import DrSpec, consumer_payment
from .network import GridModel, scc_all_buses
from .surrogate import SccSurrogate
from .uc_model import UcSolution, operation_cost


class AnalysisError(ValueError):
    pass


class CostMismatchError(AnalysisError):
    """Recomputed total cost disagrees with the solver objective."""


@dataclass(frozen=True)
class SccProfile:
    buses: tuple[int, ...]
    values: np.ndarray  # (B, T) p.u.
    source: str         # "surrogate" or "oracle"

    @property
    def minima(self) -> np.ndarray:
        return self.values.min(axis=1)

    def minimum_at(self, bus: int) -> float:
        return float(self.minima[self.buses.index(bus)])


def scc_profile(sol: UcSolution, grid: GridModel, source: str = "surrogate",
                surrogate: SccSurrogate | None = None) -> SccProfile:
    """Fault current at every bus and period of a committed schedule."""
    G, T = sol.u.shape
    if G != grid.n_gen or sol.alpha.shape != (grid.n_ibr, T):
        raise AnalysisError(
            f"solution is {G} generators x {T} periods with alpha {sol.alpha.shape}; "
            f"grid has {grid.n_gen} generators and {grid.n_ibr} IBRs")
    if source == "surrogate":
        if surrogate is None:
            raise AnalysisError("source='surrogate' needs a fitted surrogate")
        if surrogate.n_gen != G or surrogate.n_ibr != grid.n_ibr:
            raise AnalysisError("surrogate dimensions do not match the grid")
        vals = surrogate.predict(sol.u.T, sol.alpha.T).T
        buses = tuple(surrogate.buses)
    elif source == "oracle":
        vals = np.column_stack([scc_all_buses(grid, sol.u[:, t], sol.alpha[:, t]) for t in range(T)])
        buses = tuple(grid.buses)
    else:
        raise AnalysisError(f"unknown source {source!r}")
    # a linear surrogate can dip below zero far from its samples; currents cannot
    return SccProfile(buses, np.maximum(np.asarray(vals, dtype=float), 0.0), source)


def inadequate_buses(profile: SccProfile, threshold: float) -> list[int]:
    """Buses whose minimum current over the horizon falls below ``threshold``."""
    low = profile.minima < threshold
    return sorted(b for b, flag in zip(profile.buses, low) if flag)


@dataclass(frozen=True)
class CostReport:
    label: str
    operation: float
    payment: float
    total: float


def cost_breakdown(sol: UcSolution, price=None, spec: DrSpec | None = None, *,
                   label: str = "", rtol: float = 1e-6, check: bool = True) -> CostReport:
    """Operation cost, consumer payment and their sum, checked against the objective.

    Operation cost is recomputed from ``u`` and ``p`` (start-up and shut-down
    charges from commitment changes), so a mislabelled column shows up here.
    """
    lam = sol.price if price is None else np.asarray(price, dtype=float)
    if lam.shape != (sol.horizon,):
        raise AnalysisError(f"price has shape {lam.shape}, horizon is {sol.horizon}")
    if sol.dr is not None and spec is None:
        raise AnalysisError("solution has DR decisions; pass the DrSpec")
    op = sol.operation_cost
    _, pay = consumer_payment(sol.demand, sol.dr, lam, spec)
    total = op + pay
    if check and abs(total - sol.objective) > rtol * max(1.0, abs(sol.objective)):
        raise CostMismatchError(f"total {total:.10g} differs from objective {sol.objective:.10g}")
    return CostReport(label, op, pay, total)


def recompute_operation_cost(sol: UcSolution, grid: GridModel) -> float:
    gens = grid.generators
    return operation_cost(sol.u, sol.p, [g.c_nl for g in gens], [g.c_m for g in gens],
                          [g.k_st for g in gens], [g.k_sh for g in gens], [g.u0 for g in gens])


# ------------------------------------------------------------------- outputs
def minima_series(profile: SccProfile) -> list[tuple[int, float]]:
    """``(bus, minimum)`` pairs in bus order, one bar per bus."""
    return [(b, float(m)) for b, m in zip(profile.buses, profile.minima)]


def write_profile_table(profile: SccProfile, path) -> Path:
    path = Path(path)
    T = profile.values.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "min"] + [f"t{t}" for t in range(T)])
        for b, row, m in zip(profile.buses, profile.values, profile.minima):
            w.writerow([b, repr(float(m))] + [repr(float(v)) for v in row])
    return path


def write_minima_table(profile: SccProfile, path, threshold: float | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "min_scc"] + (["below_threshold"] if threshold is not None else []))
        for b, m in minima_series(profile):
            row = [b, repr(m)]
            if threshold is not None:
                row.append(int(m < threshold))
            w.writerow(row)
    return path


def write_cost_table(reports: list[CostReport], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "operation", "payment", "total"])
        for r in reports:
            w.writerow([r.label, repr(float(r.operation)), repr(float(r.payment)), repr(float(r.total))])
    return path
