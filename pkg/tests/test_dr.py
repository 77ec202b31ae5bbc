import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sccuc.dr import (DEFAULT_DR, DrDecisions, DrError, DrSpec, IlClass, add_consumer_payment,
                      build_dr_block, consumer_payment, effective_demand)
from sccuc.milp import MilpProblem
from sccuc.solver import SolveOptions, solve_milp


def test_default_dr_values():
    assert [c.beta for c in DEFAULT_DR.il_classes] == [0.1, 0.08, 0.05]
    assert [c.compensation for c in DEFAULT_DR.il_classes] == [50.0, 70.0, 100.0]
    assert (DEFAULT_DR.beta_window, DEFAULT_DR.beta_in, DEFAULT_DR.beta_out) == (0.2, 0.12, 0.12)
    assert (DEFAULT_DR.c_in, DEFAULT_DR.c_out) == (20.0, 30.0)


def test_class_one_bound():
    p = build_dr_block(DEFAULT_DR, [100.0])
    j = p.col("curt", 0, 0)
    assert p.ub[j] == pytest.approx(10.0)
    assert [p.ub[p.col("curt", n, 0)] for n in (1, 2)] == pytest.approx([8.0, 5.0])


def test_block_layout():
    T = 4
    p = build_dr_block(DEFAULT_DR, np.full(T, 50.0))
    assert p.n_cols == 3 * T + 2 * T + 2 * T
    assert p.n_integer == 2 * T
    assert p.n_rows == 3 * T + 3 * T + 1
    # the first window row only sees the first period (earlier curtailment is zero)
    A = p.matrix().tocsr()
    row = A[p.row_registry[("il_window", 1, 0)]]
    assert list(row.indices) == [p.col("curt", 1, 0)]
    row = A[p.row_registry[("il_window", 1, 2)]]
    assert sorted(row.indices) == sorted([p.col("curt", 1, 1), p.col("curt", 1, 2)])
    assert p.rhs[p.row_registry[("il_window", 1, 2)]] == pytest.approx(0.2 * 50.0)


def test_single_period_cannot_shift():
    p = build_dr_block(DEFAULT_DR, [100.0])
    p.add_cost(("sl_in", 0), -1.0)
    p.add_cost(("sl_out", 0), -1.0)
    r = solve_milp(p)
    assert r.status == "optimal"
    assert r.x[p.col("sl_in", 0)] == 0 and r.x[p.col("sl_out", 0)] == 0


def test_zero_response_feasible(series):
    p = build_dr_block(DEFAULT_DR, series.demand)
    assert p.max_violation(np.zeros(p.n_cols)) == 0.0


@pytest.mark.parametrize("baseline", [[], [10.0, 0.0], [-1.0]])
def test_bad_baseline(baseline):
    with pytest.raises(DrError):
        build_dr_block(DEFAULT_DR, baseline)


@pytest.mark.parametrize("kwargs", [
    dict(beta_window=1.5),
    dict(beta_out=0.8),           # 0.23 + 0.8 >= 1
    dict(c_in=-1.0),
])
def test_spec_invariants(kwargs):
    base = dict(il_classes=DEFAULT_DR.il_classes, beta_window=0.2, beta_in=0.12, beta_out=0.12,
                c_in=20.0, c_out=30.0)
    base.update(kwargs)
    with pytest.raises(DrError):
        DrSpec(**base)


def test_spec_dict_round_trip_and_unknown_keys():
    d = DEFAULT_DR.to_dict()
    assert DrSpec.from_dict(d) == DEFAULT_DR
    d["beta_5"] = 0.1
    with pytest.raises(DrError, match="beta_5"):
        DrSpec.from_dict(d)


def test_effective_demand_example():
    d = DrDecisions(np.array([[10.0], [8.0], [5.0]]), np.array([0.0]), np.array([12.0]))
    assert effective_demand([100.0], d)[0] == 65.0
    assert effective_demand([100.0, 50.0], None).tolist() == [100.0, 50.0]
    assert effective_demand([100.0], DrDecisions.zeros(3, 1)).tolist() == [100.0]


def test_payment_examples():
    base = np.array([100.0, 80.0])
    lam = np.array([30.0, 40.0])
    _, zero = consumer_payment(base, DrDecisions.zeros(3, 2), lam, DEFAULT_DR)
    assert zero == 30 * 100 + 40 * 80
    d = DrDecisions.zeros(3, 2)
    d.curtail[0, 0] = 1.0
    per, tot = consumer_payment(base, d, lam, DEFAULT_DR)
    assert zero - tot == 80.0
    assert per[0] == 3000 - 80


def test_objective_terms_match_payment():
    base = np.array([100.0, 80.0, 120.0])
    lam = np.array([30.0, 40.0, 20.0])
    p = build_dr_block(DEFAULT_DR, base)
    add_consumer_payment(p, DEFAULT_DR, base, lam)
    rng = np.random.default_rng(0)
    x = np.zeros(p.n_cols)
    for n in range(3):
        for t in range(3):
            x[p.col("curt", n, t)] = rng.random()
    x[p.col("sl_in", 0)] = 4.0
    x[p.col("sl_out", 2)] = 4.0
    d = DrDecisions(np.array([[x[p.col("curt", n, t)] for t in range(3)] for n in range(3)]),
                    np.array([4.0, 0, 0]), np.array([0, 0, 4.0]))
    assert p.objective(x) == pytest.approx(consumer_payment(base, d, lam, DEFAULT_DR)[1], rel=1e-12)


# ---------------------------------------------------------------- properties
def _random_dr_point(seed, T):
    rng = np.random.default_rng(seed)
    base = rng.uniform(50, 500, T)
    p = build_dr_block(DEFAULT_DR, base)
    for j in range(p.n_cols):
        p.cost[j] = float(rng.normal())
    r = solve_milp(p, SolveOptions(gap=1e-9))
    assert r.status == "optimal"
    return p, base, r.x


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), T=st.integers(1, 4))
def test_feasible_points_keep_demand_positive(seed, T):
    p, base, x = _random_dr_point(seed, T)
    curt = np.array([[x[p.col("curt", n, t)] for t in range(T)] for n in range(3)])
    sin = np.array([x[p.col("sl_in", t)] for t in range(T)])
    sout = np.array([x[p.col("sl_out", t)] for t in range(T)])
    eff = effective_demand(base, DrDecisions(curt, sin, sout))
    assert np.all(eff > 0)
    assert abs(sin.sum() - sout.sum()) <= 1e-9 * base.sum()
    assert np.all(sin * sout == 0)
