"""Bounded-variable revised simplex.

The LP is held internally as::

    min  c'x   s.t.   A x - s = 0,   lb <= x <= ub,   row_lo <= s <= row_hi

so every constraint owns a logical column ``s`` and the all-logical basis is
always available. The basis is factorized with SuperLU and updated with
product-form eta vectors between refactorizations.

The default path is a dual simplex: any basis can be made dual feasible by
placing nonbasic columns at the bound matching the sign of their reduced
cost (columns lacking that bound get a temporary artificial bound). A primal
simplex then removes artificial bounds and cost perturbations, and is the
only place unboundedness is detected. Warm starts after bound changes, as in
branch-and-bound, reuse a previous basis and go straight to the dual phase.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)

INF = float("inf")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "limit"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    basis: "BasisState | None" = None
    iterations: int = 0
    ray: np.ndarray | None = None


@dataclass(frozen=True)
class BasisState:
    """Basis snapshot: basic column ids and the nonbasic columns sitting at an upper bound."""

    basic: np.ndarray
    at_upper: np.ndarray


class SingularBasis(RuntimeError):
    pass


class _Factor:
    """LU of the basis matrix plus product-form eta updates."""

    def __init__(self, B: sp.csc_matrix):
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise SingularBasis(str(exc)) from exc
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        y = self.lu.solve(a)
        for r, d in self.etas:
            yr = y[r] / d[r]
            if yr != 0.0:
                y -= d * yr
            y[r] = yr
        return y

    def btran(self, c: np.ndarray) -> np.ndarray:
        z = np.array(c, dtype=float)
        for r, d in reversed(self.etas):
            z[r] = (z[r] - d @ z + d[r] * z[r]) / d[r]
        return self.lu.solve(z, trans="T")

    def update(self, r: int, d: np.ndarray) -> None:
        self.etas.append((r, d))


def _scale(A: sp.csr_matrix, passes: int = 6):
    """Geometric-mean row/column scaling; returns ``(row_scale, col_scale)``."""
    m, n = A.shape
    rs = np.ones(m)
    cs = np.ones(n)
    if A.nnz == 0:
        return rs, cs
    coo = A.tocoo()
    absv = np.abs(coo.data)
    nz = absv > 0
    ri, ci, av = coo.row[nz], coo.col[nz], np.log2(absv[nz])
    for _ in range(passes):
        v = av + np.log2(rs[ri]) + np.log2(cs[ci])
        rmax = np.full(m, -np.inf)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, ri, v)
        np.minimum.at(rmin, ri, v)
        ok = np.isfinite(rmax)
        adj = np.zeros(m)
        adj[ok] = -(rmax[ok] + rmin[ok]) / 2.0
        rs *= np.exp2(np.round(adj))
        v = av + np.log2(rs[ri]) + np.log2(cs[ci])
        cmax = np.full(n, -np.inf)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, ci, v)
        np.minimum.at(cmin, ci, v)
        ok = np.isfinite(cmax)
        adj = np.zeros(n)
        adj[ok] = -(cmax[ok] + cmin[ok]) / 2.0
        cs *= np.exp2(np.round(adj))
    return rs, cs


class SimplexLP:
    """An LP in row-bound form, solvable repeatedly under changing column bounds.

    Parameters
    ----------
    c, A, row_lo, row_hi, lb, ub
        ``min c'x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub``.
    feastol, opttol
        Primal and dual feasibility tolerances on the scaled problem.
    """

    REFACTOR_EVERY = 80
    ARTIFICIAL_BOUND = 1e7

    def __init__(self, c, A, row_lo, row_hi, lb, ub, *, feastol=1e-9, opttol=1e-9,
                 max_iter=200_000, scale=True, seed=0):
        A = sp.csr_matrix(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        if scale:
            rs, cs = _scale(A)
        else:
            rs, cs = np.ones(m), np.ones(n)
        self.row_scale, self.col_scale = rs, cs
        As = sp.diags(rs) @ A @ sp.diags(cs)
        self.M = sp.hstack([As, -sp.identity(m, format="csr")], format="csc")
        self.MT = self.M.T.tocsr()
        self.c = np.concatenate([np.asarray(c, float) * cs, np.zeros(m)])
        self.cmax = max(1.0, float(np.max(np.abs(self.c), initial=0.0)))
        self.lb0 = np.concatenate([np.asarray(lb, float) / cs, np.asarray(row_lo, float) * rs])
        self.ub0 = np.concatenate([np.asarray(ub, float) / cs, np.asarray(row_hi, float) * rs])
        self.feastol = feastol
        self.opttol = opttol
        self.max_iter = max_iter
        self.rng = np.random.default_rng(seed)
        self.iterations = 0

    # ------------------------------------------------------------------ api
    def slack_basis(self) -> BasisState:
        return BasisState(np.arange(self.n, self.n + self.m), np.zeros(self.n + self.m, dtype=bool))

    def solve(self, lb=None, ub=None, basis: BasisState | None = None) -> LPResult:
        """Solve with optional structural bound overrides, warm-started from ``basis``."""
        lo = self.lb0.copy()
        hi = self.ub0.copy()
        if lb is not None:
            lo[: self.n] = np.asarray(lb, float) / self.col_scale
        if ub is not None:
            hi[: self.n] = np.asarray(ub, float) / self.col_scale
        if np.any(lo > hi + self.feastol):
            return LPResult(INFEASIBLE)
        hi = np.maximum(hi, lo)
        self.lo, self.hi = lo, hi
        self.iterations = 0
        if basis is None:
            basis = self.slack_basis()
        try:
            status = self._run(basis)
        except SingularBasis:
            logger.debug("singular warm-start basis; restarting from the slack basis")
            status = self._run(self.slack_basis())
        return self._result(status)

    # ------------------------------------------------------------ internals
    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        s, e = self.M.indptr[j], self.M.indptr[j + 1]
        col[self.M.indices[s:e]] = self.M.data[s:e]
        return col

    def _factorize(self):
        self.factor = _Factor(self.M[:, self.basic].tocsc())

    def _install(self, basis: BasisState):
        N = self.n + self.m
        self.basic = np.array(basis.basic, dtype=np.int64)
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[self.basic] = True
        lo, hi = self.lo, self.hi
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        up = basis.at_upper & np.isfinite(hi)
        x[up] = hi[up]
        self.x = x
        self.cost = self.c.copy()
        self.art_lo = np.zeros(N, dtype=bool)
        self.art_hi = np.zeros(N, dtype=bool)
        self._factorize()
        self._recompute_primal()

    def _recompute_primal(self):
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.x[self.basic] = self.factor.ftran(-(self.M @ xn))

    def _duals(self) -> np.ndarray:
        y = self.factor.btran(self.cost[self.basic])
        d = self.cost - self.MT @ y
        d[self.basic] = 0.0
        return d

    def _row(self, r: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[r] = 1.0
        rho = self.factor.btran(e)
        alpha = self.MT @ rho
        alpha[self.basic] = 0.0
        return alpha

    def _pivot(self, r: int, q: int, alpha_q: np.ndarray):
        p = self.basic[r]
        self.basic[r] = q
        self.is_basic[p] = False
        self.is_basic[q] = True
        self.factor.update(r, alpha_q)
        if len(self.factor.etas) >= self.REFACTOR_EVERY:
            self._factorize()
            self._recompute_primal()

    def _make_dual_feasible(self, d: np.ndarray):
        """Move nonbasic columns to the bound their reduced cost prefers."""
        lo, hi, x, tol = self.lo, self.hi, self.x, self.opttol
        nb = ~self.is_basic
        want_hi = nb & (d < -tol) & (x < hi)
        want_lo = nb & (d > tol) & (x > lo)
        for mask, bound, art, side in ((want_hi, hi, self.art_hi, 1.0), (want_lo, lo, self.art_lo, -1.0)):
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                continue
            missing = idx[~np.isfinite(bound[idx])]
            if missing.size:
                other = np.where(side > 0, lo[missing], hi[missing])
                base = np.where(np.isfinite(other), np.abs(other), 0.0)
                bound[missing] = side * (self.ARTIFICIAL_BOUND + base)
                art[missing] = True
            x[idx] = bound[idx]
        return bool(want_hi.any() or want_lo.any())

    def _run(self, basis: BasisState) -> str:
        self._install(basis)
        d = self._duals()
        self._make_dual_feasible(d)
        self._recompute_primal()
        perturbed = False
        for _round in range(40):
            status = self._dual_simplex()
            if status == INFEASIBLE and (self.art_lo.any() or self.art_hi.any()):
                if self._widen_artificial():
                    continue
            if status == "stall" and not perturbed:
                self._perturb()
                perturbed = True
                continue
            if status not in (OPTIMAL, "stall"):
                return status
            # remove perturbation and artificial bounds, then finish with primal simplex
            self.cost = self.c.copy()
            self.lo = np.where(self.art_lo, -INF, self.lo)
            self.hi = np.where(self.art_hi, INF, self.hi)
            self.art_lo[:] = False
            self.art_hi[:] = False
            status = self._primal_simplex()
            if status == "primal_infeasible":
                d = self._duals()
                self._make_dual_feasible(d)
                self._recompute_primal()
                continue
            return status
        return ITERATION_LIMIT

    def _widen_artificial(self) -> bool:
        art = self.art_lo | self.art_hi
        if np.max(np.abs(np.where(art, self.x, 0.0))) > 1e13:
            return False
        lo, hi = self.lo, self.hi
        hi[self.art_hi] *= 100.0
        lo[self.art_lo] *= 100.0
        nb = ~self.is_basic
        self.x[self.art_hi & nb] = hi[self.art_hi & nb]
        self.x[self.art_lo & nb] = lo[self.art_lo & nb]
        self._recompute_primal()
        return True

    def _perturb(self):
        nb = ~self.is_basic
        xi = self.rng.uniform(0.5, 1.0, size=self.n + self.m) * 1e-7 * (1.0 + np.abs(self.c))
        at_lo = nb & (self.x <= self.lo)
        at_hi = nb & (self.x >= self.hi) & ~at_lo
        self.cost = self.cost + np.where(at_lo, xi, 0.0) - np.where(at_hi, xi, 0.0)

    # ------------------------------------------------------------ dual phase
    def _dual_simplex(self) -> str:
        tol_p, tol_d = self.feastol, self.opttol
        d = self._duals()
        last_obj = -INF
        stall = 0
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            xb = self.x[self.basic]
            lo_b = self.lo[self.basic]
            hi_b = self.hi[self.basic]
            infeas = np.maximum(lo_b - xb, xb - hi_b)
            # scale by bound magnitude so large-valued rows do not dominate
            score = infeas / (1.0 + 1e-3 * np.minimum(np.abs(xb), 1e6))
            if score.size == 0:
                return OPTIMAL
            r = int(np.argmax(score))
            if infeas[r] <= tol_p * (1.0 + 1e-3 * abs(xb[r])):
                return OPTIMAL
            p = self.basic[r]
            delta = xb[r] - lo_b[r] if xb[r] < lo_b[r] else xb[r] - hi_b[r]
            alpha_r = self._row(r)
            at = alpha_r if delta > 0 else -alpha_r
            nb = ~self.is_basic
            free_j = nb & (self.lo < self.hi)
            x, lo, hi = self.x, self.lo, self.hi
            piv = 1e-9
            at_lo = free_j & (x <= lo)
            at_hi = free_j & (x >= hi) & ~at_lo
            between = free_j & ~at_lo & ~at_hi
            cand = (at_lo & (at > piv)) | (at_hi & (at < -piv)) | (between & (np.abs(at) > piv))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return INFEASIBLE
            dj = np.abs(d[idx])
            aj = np.abs(at[idx])
            # Harris two-pass
            bound = np.min((dj + tol_d) / aj)
            ok = dj / aj <= bound
            sel = idx[ok]
            q = int(sel[np.argmax(np.abs(at[sel]))])
            alpha_q = self.factor.ftran(self._column(q))
            a_rq = alpha_q[r]
            if abs(a_rq) < 1e-11:
                self._factorize()
                self._recompute_primal()
                d = self._duals()
                stall += 1
                if stall > 50:
                    return "stall"
                continue
            theta_d = d[q] / a_rq
            d = d - theta_d * alpha_r
            d[q] = 0.0
            d[p] = -theta_d
            theta_p = delta / a_rq
            self.x[self.basic] -= theta_p * alpha_q
            self.x[q] += theta_p
            self.x[p] = self.lo[p] if delta < 0 else self.hi[p]
            self._pivot(r, q, alpha_q)
            self.iterations += 1
            if len(self.factor.etas) == 0:
                d = self._duals()
            obj = float(self.cost @ self.x)
            if obj <= last_obj + 1e-12 * (1.0 + abs(obj)):
                stall += 1
                if stall > 2000:
                    return "stall"
            else:
                stall = 0
                last_obj = obj

    # ---------------------------------------------------------- primal phase
    def _primal_simplex(self) -> str:
        tol_p, tol_d = self.feastol, self.opttol
        # primal feasibility is expected on entry; small violations are clipped
        xb = self.x[self.basic]
        lo_b, hi_b = self.lo[self.basic], self.hi[self.basic]
        if np.any(xb < lo_b - 1e3 * tol_p * (1 + np.abs(xb))) or np.any(xb > hi_b + 1e3 * tol_p * (1 + np.abs(xb))):
            return "primal_infeasible"
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            d = self._duals()
            nb = ~self.is_basic
            x, lo, hi = self.x, self.lo, self.hi
            movable = nb & (lo < hi)
            can_up = movable & (x < hi)
            can_dn = movable & (x > lo)
            gain = np.where(can_up & (d < -tol_d), -d, 0.0)
            gain = np.maximum(gain, np.where(can_dn & (d > tol_d), d, 0.0))
            if degenerate > 200:
                # Bland-style fallback against cycling
                cands = np.flatnonzero(gain > 0)
                if cands.size == 0:
                    return OPTIMAL
                q = int(cands[0])
            else:
                q = int(np.argmax(gain))
                if gain[q] <= 0.0:
                    return OPTIMAL
            direction = 1.0 if (d[q] < 0 and can_up[q]) else -1.0
            alpha_q = self.factor.ftran(self._column(q))
            g = -direction * alpha_q  # rate of change of x_B per unit step
            xb = self.x[self.basic]
            lo_b, hi_b = self.lo[self.basic], self.hi[self.basic]
            piv = 1e-9
            up = g > piv
            dn = g < -piv
            lim_tol = np.full(self.m, INF)
            lim_tol[up] = (hi_b[up] - xb[up] + tol_p) / g[up]
            lim_tol[dn] = (lo_b[dn] - xb[dn] - tol_p) / g[dn]
            theta_max = float(np.min(lim_tol, initial=INF))
            flip = hi[q] - lo[q]
            if not np.isfinite(theta_max) and not np.isfinite(flip):
                ray = np.zeros(self.n + self.m)
                ray[q] = direction
                ray[self.basic] = g
                self._ray = ray
                return UNBOUNDED
            if flip <= theta_max:
                self.x[self.basic] += flip * g
                self.x[q] = hi[q] if direction > 0 else lo[q]
                self.iterations += 1
                degenerate = 0
                continue
            lim = np.full(self.m, INF)
            lim[up] = (hi_b[up] - xb[up]) / g[up]
            lim[dn] = (lo_b[dn] - xb[dn]) / g[dn]
            ok = np.flatnonzero(lim <= theta_max)
            r = int(ok[np.argmax(np.abs(g[ok]))])
            theta = max(lim[r], 0.0)
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            p = self.basic[r]
            self.x[self.basic] += theta * g
            self.x[q] += direction * theta
            self.x[p] = hi_b[r] if g[r] > 0 else lo_b[r]
            self._pivot(r, q, alpha_q)
            self.iterations += 1

    # ---------------------------------------------------------------- result
    def _result(self, status: str) -> LPResult:
        if status == OPTIMAL:
            self._factorize()
            self._recompute_primal()
            # basic values may sit a rounding error outside their bounds
            xs = np.clip(self.x[: self.n], self.lo[: self.n], self.hi[: self.n]) * self.col_scale
            at_upper = (~self.is_basic) & (self.x >= self.hi) & (self.x > self.lo)
            return LPResult(OPTIMAL, xs, float(self.c[: self.n] @ self.x[: self.n]),
                            BasisState(self.basic.copy(), at_upper), self.iterations)
        if status == UNBOUNDED:
            ray = self._ray[: self.n] * self.col_scale
            return LPResult(UNBOUNDED, iterations=self.iterations, ray=ray)
        return LPResult(status, iterations=self.iterations)


def solve_lp(c, A, row_lo, row_hi, lb, ub, **kw) -> LPResult:
    """One-shot convenience wrapper around :class:`SimplexLP`."""
    return SimplexLP(c, A, row_lo, row_hi, lb, ub, **kw).solve()
