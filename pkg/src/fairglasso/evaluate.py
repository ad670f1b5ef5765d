"""Performance metrics, graph diagnostics, baselines, and the sweep harness."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import datagen, fairness, solver
from .model import (
    ExperimentRecord,
    FairGlassoError,
    GroupAssignment,
    LipschitzMode,
    PenaltyKind,
    SolverConfig,
    as_sym_matrix,
    mask_offdiag,
)

__all__ = [
    "normalized_error",
    "model_fit",
    "modularity",
    "SignRatios",
    "sign_ratios",
    "default_edge_threshold",
    "rwgl_rewire",
    "SweepScenario",
    "SweepGrid",
    "run_sweep",
    "summarize",
]


def normalized_error(theta_hat, theta0) -> float:
    """Squared Frobenius distance between unit-normalized off-diagonal parts.

    Scale-invariant in each argument; ranges over [0, 4] with 0 for matrices
    equal up to positive scaling and 4 for antipodal ones.
    """
    a = mask_offdiag(theta_hat)
    b = mask_offdiag(theta0)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise FairGlassoError("normalized error needs nonzero off-diagonal parts")
    return float(np.linalg.norm(a / na - b / nb) ** 2)


def model_fit(theta_hat, sigma) -> float:
    """``||theta_hat @ sigma - I||_F``: distance from inverting the covariance."""
    theta_hat = as_sym_matrix(theta_hat)
    sigma = as_sym_matrix(sigma)
    if theta_hat.shape != sigma.shape:
        raise FairGlassoError("shape mismatch between precision and covariance")
    return float(np.linalg.norm(theta_hat @ sigma - np.eye(sigma.shape[0])))


def modularity(weights, Z: GroupAssignment) -> float:
    """Newman modularity of the weighted graph with groups as communities.

    Uses absolute edge weights: ``Q = (1/2m) sum_ij (W_ij - k_i k_j / 2m)``
    over same-group pairs.
    """
    W = np.abs(mask_offdiag(weights))
    if len(Z.labels) != W.shape[0]:
        raise FairGlassoError("group assignment does not match matrix size")
    two_m = float(W.sum())
    if two_m == 0.0:
        raise FairGlassoError("modularity undefined for an empty graph")
    k = W.sum(axis=1)
    labels = np.asarray(Z.labels)
    same = labels[:, None] == labels[None, :]
    return float(np.sum((W - np.outer(k, k) / two_m)[same]) / two_m)


@dataclass(frozen=True)
class SignRatios:
    """Counts of positive/negative partial-correlation signs by edge locality.

    The ratio of an edge class with no negative edges is ``inf``; a class
    with no edges at all yields ``nan`` (distinct "no edges" flag).
    """

    within_positive: int
    within_negative: int
    across_positive: int
    across_negative: int

    @staticmethod
    def _ratio(pos: int, neg: int) -> float:
        if pos == 0 and neg == 0:
            return math.nan
        if neg == 0:
            return math.inf
        return pos / neg

    @property
    def within_ratio(self) -> float:
        return self._ratio(self.within_positive, self.within_negative)

    @property
    def across_ratio(self) -> float:
        return self._ratio(self.across_positive, self.across_negative)


def default_edge_threshold(theta_hat) -> float:
    """Edge-presence threshold: ``1e-6 * max off-diagonal magnitude``."""
    off = mask_offdiag(theta_hat)
    return 1e-6 * float(np.max(np.abs(off))) if off.size else 0.0


def sign_ratios(theta_hat, Z: GroupAssignment, threshold: float) -> SignRatios:
    """Positive-to-negative partial-correlation ratios within and across groups.

    An edge exists where ``|theta_ij| > threshold``; the partial correlation
    of edge ``(i, j)`` has the sign of ``-theta_ij``.
    """
    if threshold < 0:
        raise FairGlassoError("threshold must be nonnegative")
    off = mask_offdiag(theta_hat)
    if len(Z.labels) != off.shape[0]:
        raise FairGlassoError("group assignment does not match matrix size")
    labels = np.asarray(Z.labels)
    iu, ju = np.triu_indices(off.shape[0], k=1)
    vals = off[iu, ju]
    present = np.abs(vals) > threshold
    within = labels[iu] == labels[ju]
    pos = -vals > 0
    return SignRatios(
        within_positive=int(np.sum(present & within & pos)),
        within_negative=int(np.sum(present & within & ~pos)),
        across_positive=int(np.sum(present & ~within & pos)),
        across_negative=int(np.sum(present & ~within & ~pos)),
    )


def rwgl_rewire(theta_hat, n_rewire: int, seed: int) -> np.ndarray:
    """Randomly relocate ``n_rewire`` off-diagonal nonzeros to empty positions.

    Values are moved, not altered, and the move is applied symmetrically, so
    the multiset of off-diagonal magnitudes and the total edge count are
    preserved.  The diagonal is untouched.
    """
    if n_rewire < 0:
        raise FairGlassoError("n_rewire must be nonnegative")
    theta = as_sym_matrix(theta_hat)
    if n_rewire == 0:
        return theta
    p = theta.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    occupied = np.nonzero(theta[iu, ju] != 0)[0]
    empty = np.nonzero(theta[iu, ju] == 0)[0]
    if occupied.size < n_rewire:
        raise FairGlassoError(
            f"cannot rewire {n_rewire} edges: only {occupied.size} present"
        )
    if empty.size < n_rewire:
        raise FairGlassoError(
            f"cannot rewire {n_rewire} edges: only {empty.size} empty slots"
        )
    rng = np.random.default_rng(seed)
    src = rng.choice(occupied, size=n_rewire, replace=False)
    dst = rng.choice(empty, size=n_rewire, replace=False)
    out = theta.copy()
    vals = out[iu[src], ju[src]].copy()
    out[iu[src], ju[src]] = 0.0
    out[ju[src], iu[src]] = 0.0
    out[iu[dst], ju[dst]] = vals
    out[ju[dst], iu[dst]] = vals
    return out


class SweepScenario(enum.Enum):
    BIAS = "bias"
    DIM = "dim"
    SAMPLE = "sample"


@dataclass(frozen=True)
class SweepGrid:
    """Grid and fixed parameters of one benchmark sweep.

    The varying axis depends on the scenario: ``betas`` for bias sweeps,
    ``ps`` for dimension sweeps, ``ns`` for sample sweeps; the scalar
    ``p``/``n`` fields hold the fixed values of the non-varying axes.  When
    ``mu2_grid`` has more than one value the penalized methods solve once per
    value and keep the lowest-error estimate (grid-search tuning).
    """

    betas: tuple[float, ...] = (0.0, 0.25, 0.5)
    ps: tuple[int, ...] = (30, 50)
    ns: tuple[int, ...] = (500, 2000)
    p: int = 50
    n: int = 1000
    g: int = 2
    avg_degree: float = 10.0
    graph: str = "er"  # "er" or "karate" (sample scenario only)
    methods: tuple[str, ...] = ("GL", "FGL", "NFGL", "RWGL")
    mu1: float = 0.05
    mu2_grid: tuple[float, ...] = (10.0,)
    epsilon: float = 0.1
    tol: float = 1e-5
    max_iter: int = 1500
    alpha: float | None = None
    # Rewiring count mirrors the N-of-roughly-1000-edges convention:
    # effective count = min(N, round(N * edges / 1000)).
    rwgl_n: int = 150


def _rwgl_count(requested: int, n_edges: int) -> int:
    return max(1, min(requested, round(requested * n_edges / 1000)))


def _base_config(grid: SweepGrid, penalty: PenaltyKind, mu2: float) -> SolverConfig:
    return SolverConfig(
        mu1=grid.mu1,
        mu2=mu2,
        epsilon=grid.epsilon,
        alpha=grid.alpha,
        penalty=penalty,
        max_iter=grid.max_iter,
        tol=grid.tol,
        lipschitz_mode=LipschitzMode.UPPER,
    )


def _ground_truth(
    scenario: SweepScenario, grid: SweepGrid, p: int, seed: int
) -> datagen.GroundTruth:
    if scenario is SweepScenario.SAMPLE and grid.graph == "karate":
        return datagen.karate_ground_truth()
    return datagen.fair_ground_truth(p, grid.g, grid.avg_degree, seed)


def _solve_method(
    method: str,
    sigma_hat: np.ndarray,
    gt: datagen.GroundTruth,
    grid: SweepGrid,
    seed: int,
) -> tuple[np.ndarray, float, float]:
    """Estimate with one method; returns (theta, mu2_used, runtime_s)."""
    if method == "GL":
        cfg = _base_config(grid, PenaltyKind.NONE, 0.0)
        t0 = time.perf_counter()
        res = solver.fista_solve(sigma_hat, gt.Z, cfg)
        return res.theta, 0.0, time.perf_counter() - t0
    if method == "RWGL":
        cfg = _base_config(grid, PenaltyKind.NONE, 0.0)
        t0 = time.perf_counter()
        res = solver.fista_solve(sigma_hat, gt.Z, cfg)
        off = mask_offdiag(res.theta)
        n_edges = int(np.count_nonzero(np.triu(off, k=1)))
        theta = rwgl_rewire(
            res.theta,
            min(_rwgl_count(grid.rwgl_n, n_edges), n_edges),
            datagen.derive_seed(seed, 900),
        )
        return theta, 0.0, time.perf_counter() - t0
    penalty = PenaltyKind.GROUP if method == "FGL" else PenaltyKind.NODE
    if method not in ("FGL", "NFGL"):
        raise FairGlassoError(f"unknown sweep method {method!r}")
    t0 = time.perf_counter()
    best = None
    best_mu2 = grid.mu2_grid[0]
    for mu2 in grid.mu2_grid:
        res = solver.fista_solve(sigma_hat, gt.Z, _base_config(grid, penalty, mu2))
        err = normalized_error(res.theta, gt.theta0)
        if best is None or err < best[1]:
            best = (res.theta, err)
            best_mu2 = mu2
    return best[0], best_mu2, time.perf_counter() - t0


def _grid_points(scenario: SweepScenario, grid: SweepGrid) -> list:
    if scenario is SweepScenario.BIAS:
        return list(grid.betas)
    if scenario is SweepScenario.DIM:
        return list(grid.ps)
    return list(grid.ns)


def run_sweep(
    scenario: SweepScenario,
    grid: SweepGrid,
    n_seeds: int,
    base_seed: int,
) -> list[ExperimentRecord]:
    """Run every (grid point, seed, method) cell and collect records.

    Per-record failures are caught, flagged with NaN error/bias, and do not
    abort the sweep.  Fixed ``base_seed`` gives an identical record table.
    """
    points = _grid_points(scenario, grid)
    if not points:
        raise FairGlassoError("sweep grid is empty")
    if n_seeds < 1:
        raise FairGlassoError("need at least one seed")
    records: list[ExperimentRecord] = []
    for pi, point in enumerate(points):
        for si in range(n_seeds):
            seed = datagen.derive_seed(base_seed, pi, si)
            p = point if scenario is SweepScenario.DIM else grid.p
            n = point if scenario is SweepScenario.SAMPLE else grid.n
            beta = float(point) if scenario is SweepScenario.BIAS else None
            gt = _ground_truth(scenario, grid, p, datagen.derive_seed(seed, 1))
            p_eff = gt.theta0.shape[0]
            if scenario is SweepScenario.BIAS:
                sigma = datagen.inject_bias(gt, beta, datagen.derive_seed(seed, 2))
            else:
                sigma = gt.sigma0
            X = datagen.sample_from_covariance(
                sigma, n, datagen.derive_seed(seed, 3)
            )
            Xc = X - X.mean(axis=0)
            sigma_hat = (Xc.T @ Xc) / n
            for method in grid.methods:
                try:
                    theta, mu2_used, runtime = _solve_method(
                        method, sigma_hat, gt, grid, seed
                    )
                    err = normalized_error(theta, gt.theta0)
                    bias = fairness.normalized_bias(theta, gt.Z)
                except FairGlassoError:
                    err, bias, mu2_used, runtime = (
                        math.nan,
                        math.nan,
                        math.nan,
                        0.0,
                    )
                records.append(
                    ExperimentRecord(
                        method=method,
                        p=p_eff,
                        n=n,
                        g=gt.Z.g,
                        seed=si,
                        mu1=grid.mu1,
                        mu2=mu2_used,
                        error=err,
                        bias=bias,
                        runtime_s=runtime,
                        beta=beta,
                    )
                )
    return records


def summarize(records: list[ExperimentRecord]) -> list[dict]:
    """Aggregate records by (method, grid point): mean and median of metrics.

    The mean is the headline column; medians are emitted alongside because
    they are robust to the occasional non-converged run.
    """
    keys = sorted({(r.method, r.p, r.n, r.beta) for r in records}, key=str)
    out = []
    for method, p, n, beta in keys:
        sel = [
            r
            for r in records
            if (r.method, r.p, r.n, r.beta) == (method, p, n, beta)
        ]
        errs = np.array([r.error for r in sel])
        biases = np.array([r.bias for r in sel])
        runtimes = np.array([r.runtime_s for r in sel])
        out.append(
            {
                "method": method,
                "p": p,
                "n": n,
                "beta": beta,
                "n_records": len(sel),
                "n_failed": int(np.sum(np.isnan(errs))),
                "mean_error": float(np.nanmean(errs)),
                "median_error": float(np.nanmedian(errs)),
                "mean_bias": float(np.nanmean(biases)),
                "median_bias": float(np.nanmedian(biases)),
                "mean_runtime_s": float(np.mean(runtimes)),
                "median_runtime_s": float(np.median(runtimes)),
            }
        )
    return out
