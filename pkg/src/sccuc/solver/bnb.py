"""LP-based branch-and-bound for :class:`~sccuc.milp.MilpProblem`."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import MilpProblem
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, SimplexLP

logger = logging.getLogger(__name__)

STATUSES = ("optimal", "gap-limit", "infeasible", "unbounded", "limit")
BRANCHING_RULES = ("most-fractional", "first-fractional")
NODE_RULES = ("best-bound", "depth-first", "best-bound-dive")
DIVE_EVERY = 25  # heap pops between dives under "best-bound-dive"


@dataclass
class SolveOptions:
    gap: float = 1e-6
    feastol: float = 1e-7
    inttol: float = 1e-6
    node_limit: int = 1_000_000
    time_limit: float = 3600.0
    branching: str = "most-fractional"
    node_selection: str = "best-bound"
    deterministic: bool = True
    log_every: int = 100

    def __post_init__(self):
        if min(self.gap, self.feastol, self.inttol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.node_limit < 1 or self.time_limit <= 0:
            raise ValueError("limits must be >= 1")
        if self.branching not in BRANCHING_RULES:
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_selection not in NODE_RULES:
            raise ValueError(f"unknown node selection rule {self.node_selection!r}")


@dataclass(frozen=True)
class LogLine:
    node: int
    incumbent: float
    bound: float
    gap: float

    def format(self) -> str:
        return f"{self.node:8d} {self.incumbent:.10g} {self.bound:.10g} {self.gap:.3e}"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    nodes: int
    wall_time: float
    log: list = field(default_factory=list, repr=False)
    lp_iterations: int = 0

    @property
    def gap(self) -> float:
        return relative_gap(self.objective, self.best_bound)


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, (incumbent - bound) / max(1.0, abs(incumbent)))


def _fractionality(x, int_idx, inttol):
    vals = x[int_idx]
    frac = np.abs(vals - np.round(vals))
    return np.where(frac > inttol, frac, 0.0)


def solve_lp(p: MilpProblem, options: SolveOptions | None = None) -> SolveResult:
    """Solve the LP relaxation of ``p`` (integrality ignored)."""
    options = options or SolveOptions()
    t0 = time.perf_counter()
    c, A, lo, hi, lb, ub, _ = p.arrays()
    res = SimplexLP(c, A, lo, hi, lb, ub).solve()
    wall = time.perf_counter() - t0
    if res.status == OPTIMAL:
        obj = res.objective + p.objective_offset
        return SolveResult("optimal", res.x, obj, obj, 1, wall, lp_iterations=res.iterations)
    out = SolveResult(res.status, None, math.nan, math.nan, 1, wall, lp_iterations=res.iterations)
    if res.status == UNBOUNDED:
        out.x = res.ray
    return out


def solve_milp(p: MilpProblem, options: SolveOptions | None = None) -> SolveResult:
    """Best-first LP branch-and-bound.

    Branches on the most fractional integer column (ties to the lowest
    column index); the down child is evaluated and queued before the up
    child, so it wins ties in the queue. Nodes are evaluated eagerly and
    queued by their LP bound.
    """
    o = options or SolveOptions()
    t0 = time.perf_counter()
    c, A, lo, hi, lb, ub, is_int = p.arrays()
    off = p.objective_offset
    int_idx = np.flatnonzero(is_int)
    lb = lb.copy()
    ub = ub.copy()
    lb[int_idx] = np.ceil(lb[int_idx] - o.inttol)
    ub[int_idx] = np.floor(ub[int_idx] + o.inttol)
    if np.any(~np.isfinite(lb[int_idx])) or np.any(~np.isfinite(ub[int_idx])):
        raise ValueError("integer columns need finite bounds")

    lp = SimplexLP(c, A, lo, hi, lb, ub, feastol=1e-9, opttol=1e-9)
    log: list[LogLine] = []
    iters = 0

    def finish(status, x, obj, bound, nodes):
        wall = time.perf_counter() - t0
        return SolveResult(status, x, obj, bound, nodes, wall, log, iters)

    if np.any(lb > ub):
        return finish("infeasible", None, math.nan, math.nan, 0)

    root = lp.solve(lb, ub)
    iters += root.iterations
    if root.status == INFEASIBLE:
        return finish("infeasible", None, math.nan, math.nan, 1)
    if root.status == UNBOUNDED:
        return finish("unbounded", root.ray, -math.inf, -math.inf, 1)
    if root.status != OPTIMAL:
        return finish("limit", None, math.nan, math.nan, 1)

    inc_x = None
    inc_obj = math.inf
    inc_basis = None
    seq = 0
    nodes = 1
    heap: list = []
    stack: list = []  # depth-first only
    dfs = o.node_selection == "depth-first"
    plunging = o.node_selection == "best-bound-dive"

    def consider(res, nlb, nub, depth):
        """Update the incumbent, or return the node entry for later branching."""
        nonlocal inc_x, inc_obj, inc_basis, seq
        obj = res.objective + off
        if obj >= inc_obj - _prune_tol(inc_obj, o.gap):
            return None
        frac = _fractionality(res.x, int_idx, o.inttol)
        if int_idx.size == 0 or not frac.any():
            x = res.x.copy()
            x[int_idx] = np.round(x[int_idx])
            inc_x = x
            inc_obj = obj
            inc_basis = res.basis
            logger.debug("new incumbent %.10g", obj)
            return None
        entry = (obj, seq, nlb, nub, res.basis, depth, res.x)
        seq += 1
        return entry

    def store(entry):
        if entry is None:
            return
        if dfs:
            stack.append(entry)
        else:
            heapq.heappush(heap, entry)

    store(consider(root, lb, ub, 0))
    status = None
    next_log = 1
    branched = 0
    plunge = None  # next node of an ongoing dive
    in_dive = False
    while heap or stack or plunge is not None:
        bound = _global_bound(heap, stack, inc_obj, plunge)
        g = relative_gap(inc_obj, bound)
        if nodes >= next_log:
            line = LogLine(nodes, inc_obj, bound, g)
            log.append(line)
            logger.info("%s", line.format())
            next_log = (nodes // o.log_every + 1) * o.log_every
        if inc_x is not None and g <= o.gap:
            break
        if nodes >= o.node_limit or time.perf_counter() - t0 > o.time_limit:
            status = "limit"
            break
        if plunge is not None:
            entry, plunge = plunge, None
        elif stack:
            entry = stack.pop()
        else:
            entry = heapq.heappop(heap)
            # dive until the first incumbent, then periodically from the best node
            in_dive = plunging and (inc_x is None or branched % DIVE_EVERY == 0)
        obj, _, nlb, nub, basis, depth, px = entry
        if obj >= inc_obj - _prune_tol(inc_obj, o.gap):
            continue
        frac = _fractionality(px, int_idx, o.inttol)
        if o.branching == "most-fractional":
            k = int(np.argmax(frac))
        else:
            k = int(np.flatnonzero(frac)[0])
        j = int(int_idx[k])
        v = px[j]
        branched += 1
        kids = []
        for side in ("down", "up"):
            clb, cub = nlb.copy(), nub.copy()
            if side == "down":
                cub[j] = math.floor(v)
            else:
                clb[j] = math.ceil(v)
            res = lp.solve(clb, cub, basis)
            iters += res.iterations
            nodes += 1
            if res.status == OPTIMAL:
                kids.append(consider(res, clb, cub, depth + 1))
        kids = [e for e in kids if e is not None]
        if dfs:
            # the down child must be popped first, so push it last
            for e in kids[::-1]:
                store(e)
            continue
        if in_dive and kids:
            best = min(kids, key=lambda e: (e[0], e[1]))
            plunge = best
            kids = [e for e in kids if e is not best]
        for e in kids:
            store(e)

    bound = _global_bound(heap, stack, inc_obj, plunge)
    if status is None:
        if inc_x is None:
            return finish("infeasible", None, math.nan, math.nan, nodes)
        g = relative_gap(inc_obj, bound)
        status = "optimal" if g <= o.gap else "gap-limit"
    if inc_x is not None:
        pol = _polish(lp, A, lo, hi, lb, ub, int_idx, inc_x, inc_basis)
        if pol is not None:
            iters += pol.iterations
            if pol.objective + off <= inc_obj + _prune_tol(inc_obj, 1e-12):
                inc_x, inc_obj = pol.x, pol.objective + off
    bound = min(bound, inc_obj)
    log.append(LogLine(nodes, inc_obj, bound, relative_gap(inc_obj, bound)))
    return finish(status, inc_x, inc_obj if inc_x is not None else math.nan, bound, nodes)


def _polish(lp, A, lo, hi, lb, ub, int_idx, x, basis):
    """Re-solve the LP with the incumbent's integers fixed.

    Rows left with a single free column once the integers are fixed become
    bounds on that column, so forced zeros (e.g. ``y <= M * z`` with
    ``z = 0``) come out exact rather than within tolerance.
    """
    nlb, nub = lb.copy(), ub.copy()
    nlb[int_idx] = nub[int_idx] = np.round(x[int_idx])
    A = A.tocsr()
    fixed = nlb == nub
    for i in range(A.shape[0]):
        s, e = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[s:e], A.data[s:e]
        free = ~fixed[cols]
        if free.sum() != 1:
            continue
        j = int(cols[free][0])
        a = float(vals[free][0])
        rest = float(vals[~free] @ nlb[cols[~free]])
        r_lo, r_hi = lo[i] - rest, hi[i] - rest
        b_lo, b_hi = (r_lo / a, r_hi / a) if a > 0 else (r_hi / a, r_lo / a)
        if b_lo > nlb[j]:
            nlb[j] = b_lo
        if b_hi < nub[j]:
            nub[j] = b_hi
    if np.any(nlb > nub):
        return None
    res = lp.solve(nlb, nub, basis)
    return res if res.status == OPTIMAL else None


def _prune_tol(inc_obj: float, gap: float) -> float:
    if not math.isfinite(inc_obj):
        return 0.0
    return gap * max(1.0, abs(inc_obj))


def _global_bound(heap, stack, inc_obj, plunge=None) -> float:
    vals = [e[0] for e in stack]
    if heap:
        vals.append(heap[0][0])
    if plunge is not None:
        vals.append(plunge[0])
    return min(vals + [inc_obj])
