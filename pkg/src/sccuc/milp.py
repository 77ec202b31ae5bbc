"""Generic mixed-integer linear problem container.

A :class:`MilpProblem` holds columns (bounds, integrality, objective
coefficient) and rows (sparse coefficients, sense, right-hand side). Every
column is addressed through a registry key, a tuple such as
``("u", g, t)``, so model builders and solution extractors never juggle raw
column numbers.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

INF = float("inf")

SENSES = ("L", "G", "E")


class ProblemError(ValueError):
    """Raised when a problem is assembled inconsistently."""


def key_name(key: tuple) -> str:
    """Deterministic, MPS-safe name for a registry key."""
    return "_".join(str(k) for k in key).replace(" ", "")


@dataclass
class MilpProblem:
    name: str = "problem"
    col_keys: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    integer: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    objective_offset: float = 0.0
    row_keys: list = field(default_factory=list)
    sense: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    # COO triplets
    _ri: list = field(default_factory=list, repr=False)
    _ci: list = field(default_factory=list, repr=False)
    _vv: list = field(default_factory=list, repr=False)
    registry: dict = field(default_factory=dict, repr=False)
    row_registry: dict = field(default_factory=dict, repr=False)
    # model-level data (dimensions, flags, cost data) used by solution extractors
    meta: dict = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------------ build
    def add_var(self, key, lb=0.0, ub=INF, integer=False, cost=0.0) -> int:
        key = tuple(key)
        if key in self.registry:
            raise ProblemError(f"duplicate column key {key!r}")
        if lb > ub:
            raise ProblemError(f"column {key!r}: lower bound {lb} > upper bound {ub}")
        j = len(self.col_keys)
        self.registry[key] = j
        self.col_keys.append(key)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.cost.append(float(cost))
        return j

    def add_row(self, key, coeffs: dict, sense: str, rhs: float) -> int:
        """Add ``sum(coeffs[k] * x[k]) <sense> rhs``; ``coeffs`` maps keys to values."""
        key = tuple(key)
        if sense not in SENSES:
            raise ProblemError(f"row {key!r}: unknown sense {sense!r}")
        if key in self.row_registry:
            raise ProblemError(f"duplicate row key {key!r}")
        i = len(self.row_keys)
        for ck, v in coeffs.items():
            j = self.registry.get(tuple(ck))
            if j is None:
                raise ProblemError(f"row {key!r} references undeclared column {ck!r}")
            if v != 0.0:
                self._ri.append(i)
                self._ci.append(j)
                self._vv.append(float(v))
        self.row_registry[key] = i
        self.row_keys.append(key)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        return i

    def add_cost(self, key, value: float) -> None:
        self.cost[self.registry[tuple(key)]] += float(value)

    def col(self, *key) -> int:
        return self.registry[tuple(key)]

    def copy(self) -> "MilpProblem":
        return copy.deepcopy(self)

    # ------------------------------------------------------------------ views
    @property
    def n_cols(self) -> int:
        return len(self.col_keys)

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    @property
    def n_integer(self) -> int:
        return int(sum(self.integer))

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix in CSR form (duplicate entries are summed)."""
        return sp.csr_matrix(
            (np.asarray(self._vv, dtype=float), (np.asarray(self._ri, dtype=np.int64),
                                                  np.asarray(self._ci, dtype=np.int64))),
            shape=(self.n_rows, self.n_cols),
        )

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows as ``lo <= A x <= hi``."""
        rhs = np.asarray(self.rhs, dtype=float)
        sense = np.asarray(self.sense)
        lo = np.where(sense == "L", -INF, rhs)
        hi = np.where(sense == "G", INF, rhs)
        return lo, hi

    def arrays(self):
        """``(c, A, row_lo, row_hi, lb, ub, integer)`` as numpy/scipy objects."""
        lo, hi = self.row_bounds()
        return (np.asarray(self.cost, dtype=float), self.matrix(), lo, hi,
                np.asarray(self.lb, dtype=float), np.asarray(self.ub, dtype=float),
                np.asarray(self.integer, dtype=bool))

    def objective(self, x) -> float:
        return float(np.dot(self.cost, x) + self.objective_offset)

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (absolute)."""
        x = np.asarray(x, dtype=float)
        lb = np.asarray(self.lb)
        ub = np.asarray(self.ub)
        viol = max(0.0, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        if self.n_rows:
            ax = self.matrix() @ x
            lo, hi = self.row_bounds()
            viol = max(viol, float(np.max(lo - ax, initial=0.0)), float(np.max(ax - hi, initial=0.0)))
        return viol

    def validate(self) -> None:
        if len(set(self.registry.values())) != self.n_cols:
            raise ProblemError("registry is not a bijection onto columns")
        for j, (l, u) in enumerate(zip(self.lb, self.ub)):
            if l > u:
                raise ProblemError(f"column {self.col_keys[j]!r}: lb > ub")
        if self._ci and max(self._ci) >= self.n_cols:
            raise ProblemError("coefficient references an undeclared column")
