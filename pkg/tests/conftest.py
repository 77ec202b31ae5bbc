from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import pytest
import yaml

import sccuc
from sccuc.dr import DrSpec
from sccuc.network import grid_from_dict, load_grid
from sccuc.surrogate import fit_surrogate, generate_samples
from sccuc.uc_model import TimeSeriesInputs, load_series

DATA = Path(sccuc.__file__).parent / "data"
GRID_FILE = DATA / "ieee30.yaml"
SERIES_FILE = DATA / "series24.yaml"

# Three buses, a cheap base unit and a peaker, one wind farm. With a 2.5 p.u.
# threshold the base unit alone is adequate only when the wind blows.
TINY = {
    "name": "tiny3", "base_mva": 100, "scc_threshold": 2.5, "buses": [1, 2, 3],
    "branches": [
        {"from": 1, "to": 2, "r": 0.01, "x": 0.2},
        {"from": 2, "to": 3, "r": 0.01, "x": 0.3},
        {"from": 1, "to": 3, "r": 0.02, "x": 0.25},
    ],
    "generators": [
        {"name": "base", "bus": 1, "p_min": 20, "p_max": 150, "c_nl": 100, "c_m": 10,
         "k_st": 400, "k_sh": 100, "u0": 1, "x_subtransient": 0.3},
        {"name": "peaker", "bus": 3, "p_min": 10, "p_max": 80, "c_nl": 60, "c_m": 25,
         "k_st": 150, "k_sh": 50, "u0": 0, "x_subtransient": 0.4},
    ],
    "ibrs": [{"name": "wind", "bus": 2, "p_max": 50, "rated_current": 0.5}],
}

TINY_DR = {
    "il_classes": [{"name": "I", "beta": 0.1, "compensation": 5.0},
                   {"name": "II", "beta": 0.05, "compensation": 8.0}],
    "beta_window": 0.15, "beta_in": 0.1, "beta_out": 0.1, "c_in": 2.0, "c_out": 3.0,
}

TINY_SERIES = {"demand": [80.0, 160.0, 110.0], "price": [30.0, 45.0, 20.0], "alpha": [[0.2, 1.0, 0.6]]}


def tiny_dict() -> dict:
    return copy.deepcopy(TINY)


@pytest.fixture(scope="session")
def grid_dict():
    return yaml.safe_load(GRID_FILE.read_text())


@pytest.fixture(scope="session")
def grid():
    return load_grid(GRID_FILE)


@pytest.fixture(scope="session")
def series(grid):
    return load_series(SERIES_FILE, grid)


@pytest.fixture(scope="session")
def fixture_samples(grid):
    return generate_samples(grid)


@pytest.fixture(scope="session")
def surrogate(grid, fixture_samples):
    return fit_surrogate(grid, fixture_samples)


@pytest.fixture(scope="session")
def tiny_grid():
    return grid_from_dict(tiny_dict())


@pytest.fixture(scope="session")
def tiny_surrogate(tiny_grid):
    return fit_surrogate(tiny_grid, generate_samples(tiny_grid))


@pytest.fixture(scope="session")
def tiny_inputs():
    return TimeSeriesInputs(TINY_SERIES["demand"], TINY_SERIES["price"], np.array(TINY_SERIES["alpha"]))


@pytest.fixture(scope="session")
def tiny_dr():
    return DrSpec.from_dict(TINY_DR)


def random_lp(seed: int, n: int = 20, m: int = 15):
    """Dense random LP that is feasible (a known interior point) and bounded."""
    from sccuc.milp import INF, MilpProblem

    rng = np.random.default_rng(seed)
    p = MilpProblem(name=f"rand{seed}")
    x0 = rng.uniform(0.5, 4.0, n)
    for j in range(n):
        kind = rng.integers(3)
        lb, ub = (0.0, 5.0) if kind == 0 else (0.0, INF) if kind == 1 else (-2.0, 6.0)
        # unbounded-above columns get a positive cost, so the LP stays bounded
        cost = rng.uniform(0.1, 2.0) if ub == INF else rng.normal()
        p.add_var(("x", j), lb, ub, cost=float(cost))
    A = rng.normal(size=(m, n))
    for i in range(m):
        sense = "LGE"[rng.integers(3)] if i % 5 else "E"
        act = float(A[i] @ x0)
        rhs = act + (rng.uniform(0, 3) if sense == "L" else -rng.uniform(0, 3) if sense == "G" else 0.0)
        p.add_row(("r", i), {("x", j): float(A[i, j]) for j in range(n)}, sense, rhs)
    p.objective_offset = float(rng.normal())
    return p
