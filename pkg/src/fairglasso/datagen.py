"""Synthetic ground-truth graphs, precision matrices, and Gaussian sampling.

Every generator is a pure function of an integer seed: fixed seed, identical
output, across runs and platforms.  Derived streams are spawned with
:func:`derive_seed` instead of sharing generator state.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import fairness
from .model import FairGlassoError, GroupAssignment, as_sym_matrix

__all__ = [
    "GroundTruth",
    "GroupMode",
    "PrecisionKind",
    "derive_seed",
    "er_graph",
    "assign_groups",
    "precision_from_graph",
    "sample_gaussian",
    "sample_from_covariance",
    "inject_bias",
    "fair_ground_truth",
    "load_karate",
    "karate_ground_truth",
]


class GroupMode(enum.Enum):
    CONTIGUOUS = "contiguous"
    RANDOM = "random"


class PrecisionKind(enum.Enum):
    LAPLACIAN = "laplacian"
    LOADED_ADJACENCY = "loaded_adjacency"


@dataclass(frozen=True)
class GroundTruth:
    """True graph, precision, sampling covariance, and group assignment."""

    adjacency: np.ndarray
    theta0: np.ndarray
    sigma0: np.ndarray
    Z: GroupAssignment


def derive_seed(base: int, *parts: int) -> int:
    """Deterministically derive a child seed from a base seed and index parts."""
    ss = np.random.SeedSequence([int(base), *[int(v) for v in parts]])
    return int(ss.generate_state(1, np.uint64)[0])


def er_graph(p: int, avg_degree: float, seed: int) -> np.ndarray:
    """Symmetric 0/1 adjacency where each edge appears with prob ``avg_degree/(p-1)``."""
    if p < 2:
        raise FairGlassoError("need at least 2 nodes")
    if not 0 <= avg_degree < p:
        raise FairGlassoError(
            f"avg_degree must be in [0, p); got {avg_degree} for p={p}"
        )
    prob = avg_degree / (p - 1)
    rng = np.random.default_rng(seed)
    upper = rng.random((p, p)) < prob
    adj = np.triu(upper, k=1).astype(float)
    return adj + adj.T


def assign_groups(
    p: int,
    g: int,
    mode: GroupMode = GroupMode.CONTIGUOUS,
    seed: int = 0,
) -> GroupAssignment:
    """Balanced assignment of ``p`` nodes to ``g`` groups.

    Contiguous mode labels node ``i`` with ``i * g // p`` (equal blocks up to
    remainder); random mode permutes that multiset uniformly.
    """
    if g < 1:
        raise FairGlassoError("need at least one group")
    if p < 2 * g:
        raise FairGlassoError(
            f"p={p} cannot give {g} groups of size >= 2 (need p >= {2 * g})"
        )
    labels = np.array([i * g // p for i in range(p)])
    if mode is GroupMode.RANDOM:
        labels = labels[np.random.default_rng(seed).permutation(p)]
    return GroupAssignment(tuple(int(v) for v in labels))


def _random_weights(
    adjacency: np.ndarray,
    seed: int,
    low: float = 0.5,
    high: float = 1.5,
    signed: bool = False,
) -> np.ndarray:
    """Uniform edge weights on the support of ``adjacency``, symmetric."""
    p = adjacency.shape[0]
    rng = np.random.default_rng(seed)
    w = rng.uniform(low, high, size=(p, p))
    if signed:
        w *= rng.choice([-1.0, 1.0], size=(p, p))
    w = np.triu(w, k=1) * np.triu(adjacency, k=1)
    return w + w.T


def precision_from_graph(
    adjacency,
    mode: PrecisionKind,
    weights_seed: int | None = None,
    diag_load: float = 0.5,
) -> np.ndarray:
    """True precision matrix built from a graph.

    With ``weights_seed`` the 0/1 support is given uniform random weights in
    [0.5, 1.5]; otherwise the adjacency entries are used as weights.
    Laplacian mode returns degree-minus-weights (PSD, singular); loaded
    adjacency adds ``|lambda_min| + diag_load`` to the diagonal (PD).
    """
    adjacency = as_sym_matrix(adjacency)
    if float(np.max(np.abs(np.diag(adjacency)))) != 0.0:
        raise FairGlassoError("adjacency must have zero diagonal")
    if weights_seed is not None:
        W = _random_weights((adjacency != 0).astype(float), weights_seed)
    else:
        W = adjacency.copy()
    if mode is PrecisionKind.LAPLACIAN:
        return np.diag(W.sum(axis=1)) - W
    lam_min = float(np.linalg.eigvalsh(W)[0])
    return W + (abs(lam_min) + diag_load) * np.eye(W.shape[0])


def sample_from_covariance(sigma, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` iid zero-mean Gaussian rows with covariance ``sigma``."""
    sigma = as_sym_matrix(sigma)
    if n < 1:
        raise FairGlassoError("need at least one sample")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise FairGlassoError("covariance is not positive definite") from exc
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, sigma.shape[0])) @ chol.T


def sample_gaussian(theta0, n: int, ridge: float, seed: int) -> np.ndarray:
    """Draw ``n`` samples from the Gaussian with precision ``theta0 + ridge*I``.

    The ridge keeps singular precisions (graph Laplacians) invertible; it
    must leave the matrix PD.
    """
    theta0 = as_sym_matrix(theta0)
    p = theta0.shape[0]
    shifted = theta0 + ridge * np.eye(p)
    try:
        np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError as exc:
        raise FairGlassoError(
            "precision is not PD even after the ridge"
        ) from exc
    cov = np.linalg.inv(shifted)
    return sample_from_covariance((cov + cov.T) / 2.0, n, seed)


def inject_bias(
    gt: GroundTruth,
    beta: float,
    seed: int,
    rate: float = 0.2,
    ridge: float = 1e-2,
) -> np.ndarray:
    """Covariance homotopy from the fair ground truth toward an unfair model.

    Builds an unfair precision by adding weight ``-b`` (``b`` = mean nonzero
    off-diagonal magnitude, so more-negative precision entries mean stronger
    positive partial correlations) to every existing within-group edge and to
    a random ``rate`` fraction of within-group non-edges, then returns
    ``(1-beta) * sigma0 + beta * sigma_unfair``.  Each biased pair enters as
    a PSD edge term ``b (e_i - e_j)(e_i - e_j)^T``, so the unfair precision
    stays PD without a washing-out global diagonal shift and both homotopy
    endpoints (hence every convex combination) are PD.
    """
    if not 0.0 <= beta <= 1.0:
        raise FairGlassoError("beta must lie in [0, 1]")
    if not 0.0 <= rate <= 1.0:
        raise FairGlassoError("rate must lie in [0, 1]")
    theta0 = gt.theta0
    p = theta0.shape[0]
    off = theta0.copy()
    np.fill_diagonal(off, 0.0)
    nz = np.abs(off) > 0
    if not nz.any():
        raise FairGlassoError("ground truth has no edges to bias")
    b = float(np.mean(np.abs(off[nz])))

    labels = np.asarray(gt.Z.labels)
    same = labels[:, None] == labels[None, :]
    iu, ju = np.triu_indices(p, k=1)
    within = same[iu, ju]
    edge = nz[iu, ju]
    rng = np.random.default_rng(seed)
    extra = within & ~edge & (rng.random(iu.shape) < rate)
    chosen = (within & edge) | extra

    B = np.zeros((p, p))
    B[iu[chosen], ju[chosen]] = -b
    B += B.T
    np.fill_diagonal(B, -B.sum(axis=1))  # Laplacian-style PSD edge terms
    theta_unfair = theta0 + B + ridge * np.eye(p)
    cov = np.linalg.inv(theta_unfair)
    sigma_unfair = (cov + cov.T) / 2.0
    return (1.0 - beta) * gt.sigma0 + beta * sigma_unfair


def fair_ground_truth(
    p: int,
    g: int,
    avg_degree: float,
    seed: int,
    diag_load: float = 0.5,
    max_attempts: int = 100,
) -> GroundTruth:
    """Ground truth with no preferential connections between groups.

    Plain ER topology (edge probability identical within and across groups)
    with sign-balanced uniform weights, resampled until the group bias metric
    is at most 5% of the mean squared edge weight and the normalized bias is
    below 0.1.
    """
    Z = assign_groups(p, g, GroupMode.CONTIGUOUS)
    msw_cap = 0.05
    for attempt in range(max_attempts):
        adj = er_graph(p, avg_degree, derive_seed(seed, 1, attempt))
        W = _random_weights(adj, derive_seed(seed, 2, attempt), signed=True)
        nz = np.abs(W) > 0
        if not nz.any():
            continue
        lam_min = float(np.linalg.eigvalsh(W)[0])
        theta0 = W + (abs(lam_min) + diag_load) * np.eye(p)
        msw = float(np.mean(W[nz] ** 2))
        if fairness.bias_group(theta0, Z) > msw_cap * msw:
            continue
        if fairness.normalized_bias(theta0, Z) >= 0.1:
            continue
        cov = np.linalg.inv(theta0)
        return GroundTruth(
            adjacency=adj,
            theta0=theta0,
            sigma0=(cov + cov.T) / 2.0,
            Z=Z,
        )
    raise FairGlassoError(
        f"no sufficiently fair ground truth found in {max_attempts} attempts"
    )


def load_karate() -> tuple[np.ndarray, list[int]]:
    """Bundled 34-node social network adjacency and its two-faction labels."""
    pkg = resources.files("fairglasso.data")
    with (pkg / "karate_adjacency.csv").open("r") as f:
        adj = np.loadtxt(f, delimiter=",", dtype=float)
    labels = [
        int(line)
        for line in (pkg / "karate_groups.csv").read_text().splitlines()
        if line.strip()
    ]
    return adj, labels


def karate_ground_truth(diag_load: float = 0.5) -> GroundTruth:
    """Loaded-adjacency precision on the bundled 34-node social network."""
    adj, labels = load_karate()
    theta0 = precision_from_graph(
        adj, PrecisionKind.LOADED_ADJACENCY, weights_seed=None, diag_load=diag_load
    )
    cov = np.linalg.inv(theta0)
    return GroundTruth(
        adjacency=adj,
        theta0=theta0,
        sigma0=(cov + cov.T) / 2.0,
        Z=GroupAssignment(tuple(labels)),
    )
