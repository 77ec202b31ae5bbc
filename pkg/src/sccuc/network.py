"""Grid data model and three-phase bolted-fault current oracle.

Fault currents use classical superposition on the bus impedance matrix
``Z = Y^-1``, where ``Y`` holds the series branch admittances plus a
subtransient shunt ``1/(j x'')`` for each committed synchronous generator:

* synchronous part: ``|V_pre / Z_bb|`` with ``V_pre = 1`` p.u.;
* inverter part: each IBR is a saturated current source ``kappa * alpha * I_rated``
  reaching the fault through the transfer ratio ``|Z_bc| / |Z_bb|``.

With no generator committed there is no voltage source; the inverter current
then reaches the fault through the branch network with the faulted bus
grounded. All currents are magnitudes in p.u.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

V_PREFAULT = 1.0


class GridError(ValueError):
    """Schema or consistency problem in a grid description."""


class DisconnectedGridError(GridError):
    pass


class DegenerateNetworkError(GridError):
    """The assembled admittance matrix has an all-zero row."""


class UnknownBusError(KeyError):
    pass


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float

    @property
    def admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class SyncGenerator:
    name: str
    bus: int
    p_min: float
    p_max: float
    c_nl: float
    c_m: float
    k_st: float
    k_sh: float
    u0: int
    x_subtransient: float


@dataclass(frozen=True)
class Ibr:
    name: str
    bus: int
    p_max: float
    fault_current_factor: float = 1.2
    rated_current: float = 1.0

    @property
    def fault_current(self) -> float:
        """Fault current at full availability, p.u."""
        return self.fault_current_factor * self.rated_current


@dataclass
class GridModel:
    buses: list[int]
    branches: list[Branch]
    generators: list[SyncGenerator]
    ibrs: list[Ibr]
    scc_threshold: float
    base_mva: float = 100.0
    name: str = "grid"
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._index = {b: i for i, b in enumerate(self.buses)}
        self.validate()

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_ibr(self) -> int:
        return len(self.ibrs)

    def bus_index(self, bus: int) -> int:
        try:
            return self._index[bus]
        except KeyError:
            raise UnknownBusError(f"unknown bus id {bus!r}") from None

    def validate(self) -> None:
        if len(self._index) != len(self.buses) or not self.buses:
            raise GridError("buses: ids must be unique and nonempty")
        if not self.scc_threshold > 0:
            raise GridError("scc_threshold: must be > 0")
        if not self.base_mva > 0:
            raise GridError("base_mva: must be > 0")
        for k, br in enumerate(self.branches):
            for end in (br.from_bus, br.to_bus):
                if end not in self._index:
                    raise GridError(f"branches[{k}]: references nonexistent bus {end}")
            if br.from_bus == br.to_bus:
                raise GridError(f"branches[{k}]: endpoints coincide")
            if abs(complex(br.r, br.x)) == 0.0:
                raise GridError(f"branches[{k}]: zero series impedance")
        for k, g in enumerate(self.generators):
            where = f"generators[{k}]"
            if g.bus not in self._index:
                raise GridError(f"{where}.bus: nonexistent bus {g.bus}")
            if not 0 < g.p_min <= g.p_max:
                raise GridError(f"{where}: need 0 < p_min <= p_max")
            for attr in ("c_nl", "c_m", "k_st", "k_sh"):
                if getattr(g, attr) < 0:
                    raise GridError(f"{where}.{attr}: must be >= 0")
            if g.u0 not in (0, 1):
                raise GridError(f"{where}.u0: must be 0 or 1")
            if not g.x_subtransient > 0:
                raise GridError(f"{where}.x_subtransient: must be > 0")
        for k, c in enumerate(self.ibrs):
            where = f"ibrs[{k}]"
            if c.bus not in self._index:
                raise GridError(f"{where}.bus: nonexistent bus {c.bus}")
            if c.p_max < 0:
                raise GridError(f"{where}.p_max: must be >= 0")
            if not 1.0 <= c.fault_current_factor <= 2.0:
                raise GridError(f"{where}.fault_current_factor: must lie in [1, 2]")
            if c.rated_current < 0:
                raise GridError(f"{where}.rated_current: must be >= 0")
        if not self._connected():
            raise DisconnectedGridError("branch graph is not connected")

    def _connected(self) -> bool:
        adj: dict[int, list[int]] = {b: [] for b in self.buses}
        for br in self.branches:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
        seen = {self.buses[0]}
        todo = deque(seen)
        while todo:
            for nb in adj[todo.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        return len(seen) == len(self.buses)


# --------------------------------------------------------------------- loading
_TOP_KEYS = {"name", "base_mva", "scc_threshold", "buses", "branches", "generators", "ibrs"}
_BRANCH_KEYS = {"from", "to", "r", "x"}
_GEN_KEYS = {"name", "bus", "p_min", "p_max", "c_nl", "c_m", "k_st", "k_sh", "u0", "x_subtransient"}
_IBR_KEYS = {"name", "bus", "p_max", "fault_current_factor", "rated_current"}


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise GridError(f"{where}: expected a mapping")
    unknown = set(obj) - allowed
    if unknown:
        raise GridError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise GridError(f"{where}: missing field(s) {sorted(missing)}")


def grid_from_dict(d: dict) -> GridModel:
    _check_keys(d, _TOP_KEYS, {"scc_threshold", "buses", "branches", "generators", "ibrs"}, "grid")
    branches = []
    for k, b in enumerate(d["branches"]):
        _check_keys(b, _BRANCH_KEYS, _BRANCH_KEYS, f"branches[{k}]")
        branches.append(Branch(int(b["from"]), int(b["to"]), float(b["r"]), float(b["x"])))
    gens = []
    for k, g in enumerate(d["generators"]):
        _check_keys(g, _GEN_KEYS, _GEN_KEYS - {"name"}, f"generators[{k}]")
        gens.append(SyncGenerator(
            name=str(g.get("name", f"g{k + 1}-b{g['bus']}")), bus=int(g["bus"]),
            p_min=float(g["p_min"]), p_max=float(g["p_max"]), c_nl=float(g["c_nl"]),
            c_m=float(g["c_m"]), k_st=float(g["k_st"]), k_sh=float(g["k_sh"]),
            u0=int(g["u0"]), x_subtransient=float(g["x_subtransient"])))
    ibrs = []
    for k, c in enumerate(d["ibrs"]):
        _check_keys(c, _IBR_KEYS, {"bus", "p_max"}, f"ibrs[{k}]")
        ibrs.append(Ibr(
            name=str(c.get("name", f"ibr{k + 1}-b{c['bus']}")), bus=int(c["bus"]),
            p_max=float(c["p_max"]),
            fault_current_factor=float(c.get("fault_current_factor", 1.2)),
            rated_current=float(c.get("rated_current", 1.0))))
    return GridModel(
        buses=[int(b) for b in d["buses"]], branches=branches, generators=gens, ibrs=ibrs,
        scc_threshold=float(d["scc_threshold"]), base_mva=float(d.get("base_mva", 100.0)),
        name=str(d.get("name", "grid")))


def grid_to_dict(grid: GridModel) -> dict:
    """Inverse of :func:`grid_from_dict`."""
    return {
        "name": grid.name, "base_mva": grid.base_mva, "scc_threshold": grid.scc_threshold,
        "buses": list(grid.buses),
        "branches": [{"from": b.from_bus, "to": b.to_bus, "r": b.r, "x": b.x} for b in grid.branches],
        "generators": [{"name": g.name, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                        "c_nl": g.c_nl, "c_m": g.c_m, "k_st": g.k_st, "k_sh": g.k_sh,
                        "u0": g.u0, "x_subtransient": g.x_subtransient} for g in grid.generators],
        "ibrs": [{"name": c.name, "bus": c.bus, "p_max": c.p_max,
                  "fault_current_factor": c.fault_current_factor,
                  "rated_current": c.rated_current} for c in grid.ibrs],
    }


def load_grid(path) -> GridModel:
    """Read and validate a YAML grid description."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"grid file not found: {path}")
    with path.open() as fh:
        data = yaml.safe_load(fh)
    return grid_from_dict(data)


# ---------------------------------------------------------------- fault model
def _branch_admittance(grid: GridModel) -> np.ndarray:
    n = grid.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for br in grid.branches:
        i, j = grid.bus_index(br.from_bus), grid.bus_index(br.to_bus)
        y = br.admittance
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


def build_fault_admittance(grid: GridModel, commitment) -> np.ndarray:
    """Nodal admittance with subtransient shunts of the committed generators."""
    u = np.asarray(commitment)
    if u.shape != (grid.n_gen,):
        raise ValueError(f"commitment has length {u.size}, grid has {grid.n_gen} generators")
    Y = _branch_admittance(grid)
    for g, on in zip(grid.generators, u):
        if on:
            k = grid.bus_index(g.bus)
            Y[k, k] += 1.0 / complex(0.0, g.x_subtransient)
    if np.any(np.all(Y == 0, axis=1)):
        raise DegenerateNetworkError("admittance matrix has an all-zero row")
    return Y


def fault_sensitivities(grid: GridModel, commitment) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus fault current split into its synchronous part and IBR coefficients.

    Returns ``(sync, transfer)`` with ``sync`` of shape ``(B,)`` and
    ``transfer`` of shape ``(B, C)``, such that the fault current at bus
    ``b`` is ``sync[b] + transfer[b] @ (kappa * alpha * I_rated)``.
    """
    u = np.asarray(commitment)
    n, C = grid.n_bus, grid.n_ibr
    ibr_pos = np.array([grid.bus_index(c.bus) for c in grid.ibrs], dtype=int)
    if np.any(u):
        Z = np.linalg.inv(build_fault_admittance(grid, u))
        zbb = np.abs(np.diag(Z))
        sync = V_PREFAULT / zbb
        transfer = np.abs(Z[:, ibr_pos]) / zbb[:, None] if C else np.zeros((n, 0))
        return sync, transfer
    sync = np.zeros(n)
    transfer = np.zeros((n, C))
    if C == 0:
        return sync, transfer
    Yb = _branch_admittance(grid)
    for b in range(n):
        keep = np.array([k for k in range(n) if k != b], dtype=int)
        for ci, pos in enumerate(ibr_pos):
            if pos == b:
                transfer[b, ci] = 1.0
                continue
            # inject 1 p.u. at the IBR bus with bus b grounded; current into the fault
            inj = np.zeros(n - 1, dtype=complex)
            inj[np.searchsorted(keep, pos)] = 1.0
            v = np.linalg.solve(Yb[np.ix_(keep, keep)], inj)
            transfer[b, ci] = abs(-(Yb[b, keep] @ v))
    return sync, transfer


def ibr_injections(grid: GridModel, alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.shape != (grid.n_ibr,):
        raise ValueError(f"alpha has length {a.size}, grid has {grid.n_ibr} IBRs")
    return np.array([c.fault_current for c in grid.ibrs]) * a


def scc_all_buses(grid: GridModel, commitment, alpha) -> np.ndarray:
    """Fault current at every bus (ordered as ``grid.buses``)."""
    sync, transfer = fault_sensitivities(grid, commitment)
    return sync + transfer @ ibr_injections(grid, alpha)


def scc_oracle(grid: GridModel, commitment, alpha, bus: int) -> float:
    """Three-phase bolted-fault current magnitude at ``bus``, p.u."""
    k = grid.bus_index(bus)
    return float(scc_all_buses(grid, commitment, alpha)[k])
