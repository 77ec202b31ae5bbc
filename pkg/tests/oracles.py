"""Independent reference computations for the tests.

Nothing here calls the package's numerical code. Grids come in as the plain
dicts of the YAML schema, so a bug in the package's assembly or model
building cannot leak into the reference values.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


# ------------------------------------------------------------- fault analysis
def incidence_admittance(grid: dict, u=None) -> np.ndarray:
    """Y = A^T diag(y) A plus subtransient shunts, A the branch-bus incidence."""
    buses = list(grid["buses"])
    pos = {b: i for i, b in enumerate(buses)}
    br = grid["branches"]
    A = np.zeros((len(br), len(buses)))
    for k, b in enumerate(br):
        A[k, pos[b["from"]]] = 1.0
        A[k, pos[b["to"]]] = -1.0
    y = np.array([1.0 / complex(b["r"], b["x"]) for b in br])
    Y = A.T @ np.diag(y) @ A
    if u is not None:
        for g, on in zip(grid["generators"], u):
            if on:
                Y[pos[g["bus"]], pos[g["bus"]]] += 1.0 / (1j * g["x_subtransient"])
    return Y


def fault_current(grid: dict, u, alpha, bus: int) -> float:
    """Fault current at ``bus`` by superposition, from one column of Z."""
    buses = list(grid["buses"])
    pos = {b: i for i, b in enumerate(buses)}
    f = pos[bus]
    inj = [g.get("fault_current_factor", 1.2) * g.get("rated_current", 1.0) * a
           for g, a in zip(grid["ibrs"], alpha)]
    n = len(buses)
    if any(u):
        Y = incidence_admittance(grid, u)
        e = np.zeros(n, dtype=complex)
        e[f] = 1.0
        zcol = np.linalg.solve(Y, e)  # Z is symmetric: column f == row f
        total = 1.0 / abs(zcol[f])
        for c, i in zip(grid["ibrs"], inj):
            total += abs(zcol[pos[c["bus"]]]) / abs(zcol[f]) * i
        return float(total)
    if not any(inj):
        return 0.0
    # no voltage source: ground the faulted bus, push each IBR current through the branches
    Y = incidence_admittance(grid)
    keep = [k for k in range(n) if k != f]
    total = 0.0
    for c, i in zip(grid["ibrs"], inj):
        if pos[c["bus"]] == f:
            total += i
            continue
        rhs = np.zeros(n - 1, dtype=complex)
        rhs[keep.index(pos[c["bus"]])] = 1.0
        v = np.linalg.solve(Y[np.ix_(keep, keep)], rhs)
        # current from the network into the grounded bus
        total += abs(sum(-Y[f, k] * vk for k, vk in zip(keep, v))) * i
    return float(total)


# ------------------------------------------------------------- brute-force UC
def brute_force_uc(grid: dict, demand, price, alpha, dr: dict | None, scc=None):
    """Minimum social cost by enumerating commitments (and SL direction patterns).

    ``dr`` uses the DrSpec dict layout. ``scc`` is ``(k_g, k_c, k_m, pairs,
    threshold)``; with it a commitment is admissible only if every bus/period
    surrogate value (with exact pair products) reaches the threshold.
    Returns ``(objective, u)``.
    """
    gens = grid["generators"]
    ibrs = grid["ibrs"]
    G, C, T = len(gens), len(ibrs), len(demand)
    demand = np.asarray(demand, float)
    price = np.asarray(price, float)
    alpha = np.asarray(alpha, float).reshape(C, T)
    best = (np.inf, None)
    N = len(dr["il_classes"]) if dr else 0
    # SL direction per period: 0 none, 1 shift in, 2 shift out
    z_patterns = list(itertools.product((0, 1, 2), repeat=T)) if dr else [None]
    for bits in itertools.product((0, 1), repeat=G * T):
        u = np.array(bits, float).reshape(G, T)
        if scc is not None and not _scc_ok(u, alpha, scc):
            continue
        fixed = 0.0
        for g, gen in enumerate(gens):
            prev = gen["u0"]
            for t in range(T):
                fixed += gen["c_nl"] * u[g, t]
                fixed += max(0.0, u[g, t] - prev) * gen["k_st"] + max(0.0, prev - u[g, t]) * gen["k_sh"]
                prev = u[g, t]
        for zp in z_patterns:
            val = _dispatch_lp(gens, ibrs, u, demand, price, alpha, dr, N, zp)
            if val is not None and fixed + val < best[0]:
                best = (fixed + val, u)
    return best


def _scc_ok(u, alpha, scc) -> bool:
    k_g, k_c, k_m, pairs, thr = scc
    for t in range(u.shape[1]):
        eta = np.array([u[a, t] * u[b, t] for a, b in pairs])
        val = k_g @ u[:, t] + k_c @ alpha[:, t] + k_m @ eta
        if np.any(val < thr - 1e-9):
            return False
    return True


def _dispatch_lp(gens, ibrs, u, demand, price, alpha, dr, N, zp):
    """Cheapest dispatch + payment for a fixed commitment and SL pattern."""
    G, T = u.shape
    C = len(ibrs)
    # variable layout: p (G*T), w (C*T), curt (N*T), in (T), out (T)
    nv = G * T + C * T + N * T + 2 * T
    ip = lambda g, t: g * T + t
    iw = lambda c, t: G * T + c * T + t
    ic = lambda n, t: G * T + C * T + n * T + t
    ii = lambda t: G * T + C * T + N * T + t
    io = lambda t: G * T + C * T + N * T + T + t
    cost = np.zeros(nv)
    bounds = [(0.0, 0.0)] * nv
    for g, gen in enumerate(gens):
        for t in range(T):
            cost[ip(g, t)] = gen["c_m"]
            bounds[ip(g, t)] = (gen["p_min"] * u[g, t], gen["p_max"] * u[g, t])
    for c, ibr in enumerate(ibrs):
        for t in range(T):
            bounds[iw(c, t)] = (0.0, alpha[c, t] * ibr["p_max"])
    const = float(price @ demand)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    if dr:
        for n, cl in enumerate(dr["il_classes"]):
            for t in range(T):
                cost[ic(n, t)] = -price[t] - cl["compensation"]
                bounds[ic(n, t)] = (0.0, cl["beta"] * demand[t])
                row = np.zeros(nv)
                row[ic(n, t)] = 1.0
                if t > 0:
                    row[ic(n, t - 1)] = 1.0
                A_ub.append(row)
                b_ub.append(dr["beta_window"] * demand[t])
        for t in range(T):
            cost[ii(t)] = price[t] - dr["c_in"]
            cost[io(t)] = -price[t] - dr["c_out"]
            bounds[ii(t)] = (0.0, dr["beta_in"] * demand[t] if zp[t] == 1 else 0.0)
            bounds[io(t)] = (0.0, dr["beta_out"] * demand[t] if zp[t] == 2 else 0.0)
        row = np.zeros(nv)
        for t in range(T):
            row[ii(t)] = 1.0
            row[io(t)] = -1.0
        A_eq.append(row)
        b_eq.append(0.0)
    for t in range(T):
        row = np.zeros(nv)
        for g in range(G):
            row[ip(g, t)] = 1.0
        for c in range(C):
            row[iw(c, t)] = 1.0
        if dr:
            for n in range(N):
                row[ic(n, t)] = 1.0
            row[ii(t)] = -1.0
            row[io(t)] = 1.0
        A_eq.append(row)
        b_eq.append(demand[t])
    res = linprog(cost, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return float(res.fun) + const


# ------------------------------------------------------------- external solver
def highs_solve(mps_path, presolve: bool = True):
    """Solve an MPS file with HiGHS. Returns (status, objective)."""
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 1e-9)
    if not presolve:
        h.setOptionValue("presolve", "off")
    h.readModel(str(mps_path))
    h.run()
    status = h.modelStatusToString(h.getModelStatus()).lower()
    return status, h.getInfo().objective_function_value
