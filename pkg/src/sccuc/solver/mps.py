"""Free-format MPS export/import.

Names come from the problem's registry keys, so two exports of the same
problem are byte-identical. Numbers are written with ``repr`` and read back
with ``float``, which round-trips every double exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..milp import INF, MilpProblem, key_name

OBJ_ROW = "COST"


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def write_mps(p: MilpProblem, path) -> Path:
    path = Path(path)
    col_names = [key_name(k) for k in p.col_keys]
    row_names = [key_name(k) for k in p.row_keys]
    if len(set(col_names)) != len(col_names) or len(set(row_names)) != len(row_names):
        raise ValueError("registry keys do not map to unique MPS names")
    A = p.matrix().tocsc()
    A.sort_indices()
    out = [f"NAME {p.name}", "ROWS", f" N {OBJ_ROW}"]
    out += [f" {s} {r}" for s, r in zip(p.sense, row_names)]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, name in enumerate(col_names):
        if p.integer[j] and not in_int:
            out.append(f" MARKER{marker} 'MARKER' 'INTORG'")
            marker += 1
            in_int = True
        elif not p.integer[j] and in_int:
            out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if p.cost[j] != 0.0:
            entries.append((OBJ_ROW, p.cost[j]))
        s, e = A.indptr[j], A.indptr[j + 1]
        entries += [(row_names[i], v) for i, v in zip(A.indices[s:e], A.data[s:e])]
        if not entries:
            # keep empty columns visible to readers
            entries.append((OBJ_ROW, 0.0))
        out += [f" {name} {r} {_num(v)}" for r, v in entries]
    if in_int:
        out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    if p.objective_offset != 0.0:
        out.append(f" RHS {OBJ_ROW} {_num(-p.objective_offset)}")
    out += [f" RHS {r} {_num(v)}" for r, v in zip(row_names, p.rhs) if v != 0.0]
    out.append("BOUNDS")
    for j, name in enumerate(col_names):
        lo, hi = p.lb[j], p.ub[j]
        if lo == hi:
            out.append(f" FX BND {name} {_num(lo)}")
            continue
        if lo == -INF and hi == INF:
            out.append(f" FR BND {name}")
            continue
        if p.integer[j] or lo != 0.0:
            out.append(f" MI BND {name}" if lo == -INF else f" LO BND {name} {_num(lo)}")
        if hi != INF:
            out.append(f" UP BND {name} {_num(hi)}")
        elif p.integer[j]:
            out.append(f" PL BND {name}")
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")
    return path


def read_mps(path) -> MilpProblem:
    """Parse a free-format MPS file written by :func:`write_mps` (or a compatible tool).

    Columns and rows are keyed by their MPS names as one-element tuples.
    """
    p = MilpProblem()
    section = None
    obj_row = None
    row_sense: dict[str, str] = {}
    rhs: dict[str, float] = {}
    coeffs: dict[str, list] = {}
    bounds: dict[str, list] = {}
    integer = False
    rows_order: list[str] = []
    cols: list[str] = []
    col_int: dict[str, bool] = {}
    col_cost: dict[str, float] = {}
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0]
            if section == "NAME":
                p.name = tok[1] if len(tok) > 1 else ""
            continue
        if section == "ROWS":
            sense, name = tok
            if sense == "N":
                if obj_row is None:
                    obj_row = name
                continue
            row_sense[name] = sense
            rows_order.append(name)
            coeffs[name] = []
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer = tok[2] == "'INTORG'"
                continue
            name = tok[0]
            if name not in col_int:
                cols.append(name)
                col_int[name] = integer
                col_cost[name] = 0.0
            for r, v in zip(tok[1::2], tok[2::2]):
                if r == obj_row:
                    col_cost[name] += float(v)
                elif r in coeffs:
                    coeffs[r].append((name, float(v)))
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for r, v in zip(pairs[0::2], pairs[1::2]):
                if r == obj_row:
                    p.objective_offset = -float(v)
                else:
                    rhs[r] = float(v)
        elif section == "BOUNDS":
            kind, name = tok[0], tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            bounds.setdefault(name, []).append((kind, val))
    for name in cols:
        lo, hi = 0.0, INF
        for kind, val in bounds.get(name, []):
            if kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
                if val < 0 and lo == 0.0:
                    lo = -INF
            elif kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -INF, INF
            elif kind == "MI":
                lo = -INF
            elif kind == "PL":
                hi = INF
            elif kind == "BV":
                lo, hi = 0.0, 1.0
        p.add_var((name,), lo, hi, col_int[name], col_cost[name])
    for r in rows_order:
        p.add_row((r,), {(c,): v for c, v in coeffs[r]}, row_sense[r], rhs.get(r, 0.0))
    return p


def same_problem(a: MilpProblem, b: MilpProblem) -> bool:
    """Dimension and coefficient identity (bit-exact) of two problems."""
    if (a.n_rows, a.n_cols) != (b.n_rows, b.n_cols):
        return False
    Ma, Mb = a.matrix(), b.matrix()
    Ma.sort_indices()
    Mb.sort_indices()
    return (
        np.array_equal(Ma.indptr, Mb.indptr)
        and np.array_equal(Ma.indices, Mb.indices)
        and np.array_equal(Ma.data, Mb.data)
        and a.cost == b.cost and a.lb == b.lb and a.ub == b.ub
        and a.integer == b.integer and a.sense == b.sense and a.rhs == b.rhs
        and (a.objective_offset == b.objective_offset
             or (math.isnan(a.objective_offset) and math.isnan(b.objective_offset)))
    )
