"""Incentive-based demand response: interruptible and shiftable load.

Periods are one hour long, so MW and MWh are used interchangeably.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .milp import MilpProblem


class DrError(ValueError):
    pass


@dataclass(frozen=True)
class IlClass:
    name: str
    beta: float          # per-period curtailment ratio
    compensation: float  # currency/MWh


@dataclass(frozen=True)
class DrSpec:
    il_classes: tuple[IlClass, ...]
    beta_window: float   # cap on two consecutive periods of one IL class
    beta_in: float
    beta_out: float
    c_in: float
    c_out: float

    def __post_init__(self):
        betas = [c.beta for c in self.il_classes] + [self.beta_window, self.beta_in, self.beta_out]
        if any(not 0.0 <= b <= 1.0 for b in betas):
            raise DrError("every beta must lie in [0, 1]")
        if sum(c.beta for c in self.il_classes) + self.beta_out >= 1.0:
            raise DrError("sum of IL betas plus beta_out must stay below 1")
        if any(c.compensation < 0 for c in self.il_classes) or self.c_in < 0 or self.c_out < 0:
            raise DrError("compensations must be >= 0")

    @property
    def n_classes(self) -> int:
        return len(self.il_classes)

    @classmethod
    def from_dict(cls, d: dict) -> "DrSpec":
        allowed = {"il_classes", "beta_window", "beta_in", "beta_out", "c_in", "c_out"}
        unknown = set(d) - allowed
        if unknown:
            raise DrError(f"dr: unknown field(s) {sorted(unknown)}")
        missing = allowed - set(d)
        if missing:
            raise DrError(f"dr: missing field(s) {sorted(missing)}")
        classes = []
        for k, c in enumerate(d["il_classes"]):
            if set(c) != {"name", "beta", "compensation"}:
                raise DrError(f"dr.il_classes[{k}]: expected keys name, beta, compensation")
            classes.append(IlClass(str(c["name"]), float(c["beta"]), float(c["compensation"])))
        return cls(tuple(classes), float(d["beta_window"]), float(d["beta_in"]),
                   float(d["beta_out"]), float(d["c_in"]), float(d["c_out"]))

    def to_dict(self) -> dict:
        return {
            "il_classes": [{"name": c.name, "beta": c.beta, "compensation": c.compensation}
                           for c in self.il_classes],
            "beta_window": self.beta_window, "beta_in": self.beta_in, "beta_out": self.beta_out,
            "c_in": self.c_in, "c_out": self.c_out,
        }


#: Interruptible/shiftable load parameters of the case study.
DEFAULT_DR = DrSpec(
    il_classes=(IlClass("I", 0.10, 50.0), IlClass("II", 0.08, 70.0), IlClass("III", 0.05, 100.0)),
    beta_window=0.2, beta_in=0.12, beta_out=0.12, c_in=20.0, c_out=30.0,
)


@dataclass
class DrDecisions:
    curtail: np.ndarray                 # (N, T)
    shift_in: np.ndarray                # (T,)
    shift_out: np.ndarray               # (T,)
    z_in: np.ndarray = field(default=None)
    z_out: np.ndarray = field(default=None)

    @classmethod
    def zeros(cls, n_classes: int, horizon: int) -> "DrDecisions":
        return cls(np.zeros((n_classes, horizon)), np.zeros(horizon), np.zeros(horizon),
                   np.zeros(horizon), np.zeros(horizon))


def _check_baseline(baseline) -> np.ndarray:
    base = np.asarray(baseline, dtype=float)
    if base.ndim != 1 or base.size == 0:
        raise DrError("horizon must be at least one period")
    if np.any(base <= 0):
        raise DrError("baseline demand must be positive in every period")
    return base


def build_dr_block(spec: DrSpec, baseline, p: MilpProblem | None = None) -> MilpProblem:
    """Add the IL/SL variables and constraints to ``p`` (a fresh problem if omitted).

    Columns: ``("curt", n, t)``, ``("sl_in", t)``, ``("sl_out", t)`` and the
    binaries ``("z_in", t)``, ``("z_out", t)``. Curtailment before the first
    period is taken as zero.
    """
    base = _check_baseline(baseline)
    p = p if p is not None else MilpProblem(name="dr")
    T = base.size
    for n, cl in enumerate(spec.il_classes):
        for t in range(T):
            p.add_var(("curt", n, t), 0.0, cl.beta * base[t])
    for t in range(T):
        p.add_var(("sl_in", t), 0.0, spec.beta_in * base[t])
        p.add_var(("sl_out", t), 0.0, spec.beta_out * base[t])
    for t in range(T):
        p.add_var(("z_in", t), 0.0, 1.0, integer=True)
        p.add_var(("z_out", t), 0.0, 1.0, integer=True)
    for n in range(spec.n_classes):
        for t in range(T):
            coeffs = {("curt", n, t): 1.0}
            if t > 0:
                coeffs[("curt", n, t - 1)] = 1.0
            p.add_row(("il_window", n, t), coeffs, "L", spec.beta_window * base[t])
    for t in range(T):
        p.add_row(("sl_excl", t), {("z_in", t): 1.0, ("z_out", t): 1.0}, "L", 1.0)
        p.add_row(("sl_in_cap", t), {("sl_in", t): 1.0, ("z_in", t): -spec.beta_in * base[t]}, "L", 0.0)
        p.add_row(("sl_out_cap", t), {("sl_out", t): 1.0, ("z_out", t): -spec.beta_out * base[t]}, "L", 0.0)
    bal = {("sl_in", t): 1.0 for t in range(T)}
    bal.update({("sl_out", t): -1.0 for t in range(T)})
    p.add_row(("sl_balance",), bal, "E", 0.0)
    return p


def add_consumer_payment(p: MilpProblem, spec: DrSpec | None, baseline, price) -> None:
    """Add the consumer payment to the objective of ``p``.

    Without ``spec`` the payment is the constant ``sum(price * baseline)``.
    """
    base = np.asarray(baseline, dtype=float)
    lam = np.asarray(price, dtype=float)
    p.objective_offset += float(lam @ base)
    if spec is None:
        return
    for t in range(base.size):
        for n, cl in enumerate(spec.il_classes):
            p.add_cost(("curt", n, t), -lam[t] - cl.compensation)
        p.add_cost(("sl_in", t), lam[t] - spec.c_in)
        p.add_cost(("sl_out", t), -lam[t] - spec.c_out)


def effective_demand(baseline, d: DrDecisions | None) -> np.ndarray:
    """Demand left for generation after the DR response."""
    base = np.asarray(baseline, dtype=float)
    if d is None:
        return base.copy()
    return base - d.shift_out + d.shift_in - np.sum(d.curtail, axis=0)


def consumer_payment(baseline, d: DrDecisions | None, price, spec: DrSpec | None) -> tuple[np.ndarray, float]:
    """Per-period and total consumer payment: energy bill minus DR compensation."""
    lam = np.asarray(price, dtype=float)
    per = lam * effective_demand(baseline, d)
    if d is not None and spec is not None:
        comp = np.array([c.compensation for c in spec.il_classes])
        per = per - comp @ d.curtail - spec.c_in * d.shift_in - spec.c_out * d.shift_out
    return per, float(np.sum(per))
