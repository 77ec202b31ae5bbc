"""Linear short-circuit-current surrogate.

Per bus ``b`` the surrogate is::

    I_b(u, alpha) ~= sum_g k_bg u_g + sum_c k_bc alpha_c + sum_m k_bm u_g1 u_g2

with one pair term per unordered generator pair and no intercept. The
coefficients are fitted by ordinary least squares on oracle samples.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .network import GridModel, fault_sensitivities, ibr_injections

DEFAULT_ALPHA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
EXHAUSTIVE_CAP = 10**6


class SamplingError(ValueError):
    pass


class RankDeficientError(ValueError):
    pass


def generator_pairs(n_gen: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n_gen), 2))


def features(u, alpha, pairs) -> np.ndarray:
    """Design matrix rows ``[u | alpha | u_g1 * u_g2]`` (2-D input) or one row (1-D)."""
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    single = u.ndim == 1
    u2, a2 = np.atleast_2d(u), np.atleast_2d(alpha)
    if pairs:
        p = np.asarray(pairs)
        eta = u2[:, p[:, 0]] * u2[:, p[:, 1]]
    else:
        eta = np.zeros((u2.shape[0], 0))
    X = np.hstack([u2, a2, eta])
    return X[0] if single else X


@dataclass(frozen=True)
class SccSample:
    u: np.ndarray
    alpha: np.ndarray
    currents: np.ndarray


@dataclass
class SampleSet:
    """Columnar batch of :class:`SccSample` (row ``i`` is one sample)."""

    u: np.ndarray         # (N, G) int8
    alpha: np.ndarray     # (N, C)
    currents: np.ndarray  # (N, B)

    def __len__(self) -> int:
        return self.u.shape[0]

    def __getitem__(self, i) -> SccSample:
        return SccSample(self.u[i], self.alpha[i], self.currents[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "SampleSet":
        return SampleSet(self.u[idx], self.alpha[idx], self.currents[idx])

    def split(self, frac: float, seed: int) -> tuple["SampleSet", "SampleSet"]:
        """Random ``(train, holdout)`` split with ``frac`` of samples in training."""
        perm = np.random.default_rng(seed).permutation(len(self))
        k = int(round(frac * len(self)))
        return self.subset(np.sort(perm[:k])), self.subset(np.sort(perm[k:]))


def _alpha_lattice(alpha_grid, n_ibr) -> np.ndarray:
    return np.array(list(itertools.product(alpha_grid, repeat=n_ibr)), dtype=float).reshape(-1, n_ibr)


def _evaluate(grid: GridModel, U: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Oracle currents for rows of ``U``/``A``; one Zbus per distinct commitment."""
    out = np.empty((U.shape[0], grid.n_bus))
    kappa_r = np.array([c.fault_current for c in grid.ibrs])
    keys, inverse = np.unique(U, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for k, u in enumerate(keys):
        rows = np.flatnonzero(inverse == k)
        sync, transfer = fault_sensitivities(grid, u)
        out[rows] = sync[None, :] + (A[rows] * kappa_r) @ transfer.T
    return out


def generate_samples(grid: GridModel, strategy="exhaustive", alpha_grid=DEFAULT_ALPHA_GRID, *,
                     count: int | None = None, seed: int = 0, cap: int = EXHAUSTIVE_CAP) -> SampleSet:
    """Oracle samples over commitments and IBR availabilities.

    ``strategy="exhaustive"`` enumerates every commitment vector against every
    point of the ``alpha_grid`` lattice; ``strategy="random"`` draws ``count``
    uniform commitments and grid availabilities from ``seed``.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid:
        raise SamplingError("alpha_grid is empty")
    G, C = grid.n_gen, grid.n_ibr
    if strategy == "exhaustive":
        total = 2**G * len(alpha_grid) ** C
        if total > cap:
            raise SamplingError(f"exhaustive sampling needs {total} samples, cap is {cap}")
        commits = np.array(list(itertools.product((0, 1), repeat=G)), dtype=np.int8).reshape(-1, G)
        lattice = _alpha_lattice(alpha_grid, C)
        U = np.repeat(commits, lattice.shape[0], axis=0)
        A = np.tile(lattice, (commits.shape[0], 1))
    elif strategy == "random":
        if count is None or count < 1:
            raise SamplingError("random sampling needs a positive count")
        rng = np.random.default_rng(seed)
        U = rng.integers(0, 2, size=(count, G)).astype(np.int8)
        A = np.asarray(alpha_grid)[rng.integers(0, len(alpha_grid), size=(count, C))]
    else:
        raise SamplingError(f"unknown strategy {strategy!r}")
    return SampleSet(U, A.reshape(-1, C), _evaluate(grid, U, A.reshape(-1, C)))


# ------------------------------------------------------------------ surrogate
@dataclass
class FitDiagnostics:
    rmse: np.ndarray
    max_abs_error: np.ndarray
    max_overestimate: np.ndarray
    normal_residual: np.ndarray | None = None


@dataclass
class SccSurrogate:
    buses: list[int]
    k_g: np.ndarray      # (B, G)
    k_c: np.ndarray      # (B, C)
    k_m: np.ndarray      # (B, |M|)
    pairs: list[tuple[int, int]]
    diagnostics: FitDiagnostics | None = None
    conservative_shift: np.ndarray = field(default=None)
    use_shift: bool = False

    def __post_init__(self):
        B = len(self.buses)
        if self.conservative_shift is None:
            self.conservative_shift = np.zeros(B)
        self.conservative_shift = np.asarray(self.conservative_shift, dtype=float)
        if np.any(self.conservative_shift < 0):
            raise ValueError("conservative_shift must be >= 0")
        G = self.k_g.shape[1]
        if len(self.pairs) != G * (G - 1) // 2:
            raise ValueError("pair set must hold every unordered generator pair")
        self._bus_pos = {b: i for i, b in enumerate(self.buses)}

    @property
    def n_gen(self) -> int:
        return self.k_g.shape[1]

    @property
    def n_ibr(self) -> int:
        return self.k_c.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        """``(B, G + C + |M|)`` coefficient matrix in feature order."""
        return np.hstack([self.k_g, self.k_c, self.k_m])

    def bus_position(self, bus: int) -> int:
        try:
            return self._bus_pos[bus]
        except KeyError:
            raise KeyError(f"unknown bus id {bus!r}") from None

    def offsets(self) -> np.ndarray:
        return self.conservative_shift if self.use_shift else np.zeros(len(self.buses))

    def with_shift(self, shift=None) -> "SccSurrogate":
        """Copy with the conservative shift enabled (defaults to the training max overestimate)."""
        if shift is None:
            shift = np.maximum(self.diagnostics.max_overestimate, 0.0)
        return SccSurrogate(self.buses, self.k_g, self.k_c, self.k_m, self.pairs,
                            self.diagnostics, np.asarray(shift, float), True)

    def predict(self, u, alpha) -> np.ndarray:
        """Approximate currents at all buses; ``u``/``alpha`` may be 1-D or batched 2-D."""
        X = features(u, alpha, self.pairs)
        return X @ self.coefficients.T - self.offsets()


def evaluate_surrogate(s: SccSurrogate, u, alpha, bus: int) -> float:
    u = np.asarray(u)
    alpha = np.asarray(alpha)
    if u.shape != (s.n_gen,) or alpha.shape != (s.n_ibr,):
        raise ValueError("dimension mismatch between state and surrogate")
    b = s.bus_position(bus)
    x = features(u, alpha, s.pairs)
    return float(x @ s.coefficients[b] - s.offsets()[b])


def _diagnostics(pred: np.ndarray, actual: np.ndarray) -> FitDiagnostics:
    err = pred - actual
    return FitDiagnostics(
        rmse=np.sqrt(np.mean(err**2, axis=0)),
        max_abs_error=np.max(np.abs(err), axis=0),
        max_overestimate=np.max(err, axis=0),
    )


def fit_surrogate(grid: GridModel, samples: SampleSet, *, weights=None,
                  allow_min_norm: bool = False, chunk: int = 65536) -> SccSurrogate:
    """Least-squares fit of every bus's oracle current on ``[u | alpha | u*u]``.

    The normal equations are accumulated in chunks so large exhaustive sample
    sets never materialize the full design matrix. Rank deficiency raises
    unless ``allow_min_norm`` asks for the minimum-norm solution.
    """
    G, C = grid.n_gen, grid.n_ibr
    pairs = generator_pairs(G)
    n_feat = G + C + len(pairs)
    N = len(samples)
    if samples.u.shape[1] != G or samples.alpha.shape[1] != C or samples.currents.shape[1] != grid.n_bus:
        raise ValueError("sample dimensions do not match the grid")
    w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
    if N < n_feat and not allow_min_norm:
        raise RankDeficientError(f"{N} samples for {n_feat} features; pass allow_min_norm=True")
    gram = np.zeros((n_feat, n_feat))
    rhs = np.zeros((n_feat, grid.n_bus))
    for s in range(0, N, chunk):
        X = features(samples.u[s:s + chunk], samples.alpha[s:s + chunk], pairs)
        Xw = X * w[s:s + chunk, None]
        gram += X.T @ Xw
        rhs += Xw.T @ samples.currents[s:s + chunk]
    rank = np.linalg.matrix_rank(gram)
    if rank < n_feat:
        if not allow_min_norm:
            raise RankDeficientError(f"design has rank {rank} < {n_feat} features")
        coef = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    else:
        coef = scipy.linalg.solve(gram, rhs, assume_a="pos")
        # one step of iterative refinement
        coef += scipy.linalg.solve(gram, rhs - gram @ coef, assume_a="pos")
    coef = coef.T  # (B, n_feat)
    scale = np.maximum(np.linalg.norm(rhs, axis=0), np.finfo(float).tiny)
    normal_residual = np.linalg.norm(rhs - gram @ coef.T, axis=0) / scale
    s_ = SccSurrogate(list(grid.buses), coef[:, :G].copy(), coef[:, G:G + C].copy(),
                      coef[:, G + C:].copy(), pairs)
    diag = validation_report(s_, samples)
    diag.normal_residual = normal_residual
    s_.diagnostics = diag
    return s_


def validation_report(s: SccSurrogate, holdout: SampleSet, table_path=None,
                      chunk: int = 65536) -> FitDiagnostics:
    """Per-bus error statistics of ``s`` on ``holdout``.

    With ``table_path`` an actual-vs-approx table (columns bus, actual, approx)
    is written for every sample and bus.
    """
    if len(holdout) == 0:
        raise ValueError("holdout set is empty")
    B = len(s.buses)
    sq = np.zeros(B)
    mabs = np.full(B, -np.inf)
    mover = np.full(B, -np.inf)
    writer = None
    fh = None
    if table_path is not None:
        fh = open(table_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["bus", "actual", "approx"])
    try:
        for st in range(0, len(holdout), chunk):
            sub = holdout.subset(slice(st, st + chunk))
            pred = s.predict(sub.u, sub.alpha)
            err = pred - sub.currents
            sq += np.sum(err**2, axis=0)
            mabs = np.maximum(mabs, np.max(np.abs(err), axis=0))
            mover = np.maximum(mover, np.max(err, axis=0))
            if writer is not None:
                for bi, bus in enumerate(s.buses):
                    writer.writerows((bus, repr(float(a)), repr(float(p))) for a, p in zip(sub.currents[:, bi], pred[:, bi]))
    finally:
        if fh is not None:
            fh.close()
    return FitDiagnostics(np.sqrt(sq / len(holdout)), mabs, mover)


def scatter_table(s: SccSurrogate, samples: SampleSet, bus: int, path) -> Path:
    """Actual-vs-linearized table for one bus (the data behind an approx-vs-actual scatter)."""
    b = s.bus_position(bus)
    pred = s.predict(samples.u, samples.alpha)[:, b]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "actual", "approx"])
        w.writerows((bus, repr(float(a)), repr(float(p))) for a, p in zip(samples.currents[:, b], pred))
    return path


# ---------------------------------------------------------------- persistence
def surrogate_to_dict(s: SccSurrogate) -> dict:
    d = {
        "buses": list(s.buses),
        "pairs": [list(p) for p in s.pairs],
        "k_g": s.k_g.tolist(),
        "k_c": s.k_c.tolist(),
        "k_m": s.k_m.tolist(),
        "conservative_shift": s.conservative_shift.tolist(),
        "use_shift": s.use_shift,
    }
    if s.diagnostics is not None:
        dg = s.diagnostics
        d["diagnostics"] = {
            "rmse": dg.rmse.tolist(),
            "max_abs_error": dg.max_abs_error.tolist(),
            "max_overestimate": dg.max_overestimate.tolist(),
            "normal_residual": None if dg.normal_residual is None else dg.normal_residual.tolist(),
        }
    return d


def surrogate_from_dict(d: dict) -> SccSurrogate:
    G = len(d["k_g"][0]) if d["k_g"] else 0
    C = len(d["k_c"][0]) if d["k_c"] else 0
    B = len(d["buses"])
    diag = None
    if d.get("diagnostics"):
        dg = d["diagnostics"]
        diag = FitDiagnostics(np.array(dg["rmse"]), np.array(dg["max_abs_error"]),
                              np.array(dg["max_overestimate"]),
                              None if dg.get("normal_residual") is None else np.array(dg["normal_residual"]))
    return SccSurrogate(
        buses=[int(b) for b in d["buses"]],
        k_g=np.array(d["k_g"], dtype=float).reshape(B, G),
        k_c=np.array(d["k_c"], dtype=float).reshape(B, C),
        k_m=np.array(d["k_m"], dtype=float).reshape(B, -1),
        pairs=[tuple(p) for p in d["pairs"]],
        diagnostics=diag,
        conservative_shift=np.array(d["conservative_shift"], dtype=float),
        use_shift=bool(d.get("use_shift", False)),
    )


def save_surrogate(s: SccSurrogate, path) -> Path:
    path = Path(path)
    # json writes floats with repr, so the round trip is bit-exact
    path.write_text(json.dumps(surrogate_to_dict(s), indent=1, sort_keys=True) + "\n")
    return path


def load_surrogate(path) -> SccSurrogate:
    return surrogate_from_dict(json.loads(Path(path).read_text()))
