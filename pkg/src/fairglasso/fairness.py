"""Bias metrics on precision matrices, their gradients, and step-size constants.

The group metric averages, over ordered group pairs ``(a, b)``, the squared
gap between the mean within-group-``a`` edge weight and the mean ``a``-to-``b``
edge weight.  The node metric is the stricter per-node analogue.  Both look
only at off-diagonal entries, so they are invariant to diagonal shifts.

Gradients are returned symmetrized, ``(G + G^T)/2``: iterates of the solver
live in the symmetric subspace and the symmetrized gradient is exactly the
gradient of each metric restricted to that subspace (validated against a
symmetric-perturbation finite-difference oracle in the test suite).
"""
from __future__ import annotations

import functools

import numpy as np

from .model import (
    FairGlassoError,
    GroupAssignment,
    LipschitzMode,
    as_sym_matrix,
    mask_offdiag,
)

__all__ = [
    "pair_matrix",
    "node_matrix",
    "bias_group",
    "bias_node",
    "grad_bias_group",
    "grad_bias_node",
    "lipschitz_group",
    "lipschitz_node",
    "normalized_bias",
]


def _require_groups(Z: GroupAssignment) -> None:
    if Z.g < 2:
        raise FairGlassoError("bias metrics need at least 2 groups")


@functools.lru_cache(maxsize=256)
def _pair_matrix_cached(Z: GroupAssignment, a: int, b: int) -> np.ndarray:
    za = Z.indicator(a)
    zb = Z.indicator(b)
    pa = float(Z.sizes[a])
    pb = float(Z.sizes[b])
    C = np.outer(za, za) / (pa * pa - pa) - np.outer(za, zb) / (pa * pb)
    np.fill_diagonal(C, 0.0)
    return C


def pair_matrix(Z: GroupAssignment, a: int, b: int) -> np.ndarray:
    """Comparison matrix of ordered group pair ``(a, b)``.

    Within-group-``a`` off-diagonal entries are ``1/(p_a^2 - p_a)`` and the
    ``(a, b)`` cross-block entries are ``-1/(p_a p_b)``, so that
    ``trace(C @ theta)`` is the mean within-``a`` weight minus the mean
    ``a``-to-``b`` weight of any zero-diagonal ``theta``.  Cached per
    ``(Z, a, b)``: the matrix depends only on the assignment.
    """
    if a == b:
        raise FairGlassoError("pair matrix requires two distinct groups")
    return _pair_matrix_cached(Z, a, b).copy()


def _node_directions(Z: GroupAssignment) -> np.ndarray:
    """Columns ``v_a = sum_{b != a} (z_a/p_a - z_b/p_b)``, shape ``(p, g)``."""
    Zm = Z.indicator_matrix
    scaled = Zm / Z.sizes  # column a is z_a / p_a
    total = scaled.sum(axis=1, keepdims=True)
    return Z.g * scaled - total


@functools.lru_cache(maxsize=256)
def _node_matrix_cached(Z: GroupAssignment) -> np.ndarray:
    V = _node_directions(Z)
    return (V @ V.T) / (Z.p * Z.g * (Z.g - 1) ** 2)


def node_matrix(Z: GroupAssignment) -> np.ndarray:
    """Symmetric PSD matrix ``A`` of the node-wise penalty quadratic form.

    ``A = sum_a v_a v_a^T / (p g (g-1)^2)`` with ``v_a`` the per-group
    imbalance direction; the node metric is ``trace(theta_off A theta_off)``.
    """
    _require_groups(Z)
    return _node_matrix_cached(Z).copy()


def _pair_gaps(theta_off: np.ndarray, Z: GroupAssignment) -> np.ndarray:
    """Matrix of ``trace(C_ab @ theta_off)`` for all ordered pairs; diagonal 0."""
    Zm = Z.indicator_matrix
    S = Zm.T @ theta_off @ Zm  # g x g block sums
    sizes = Z.sizes
    within = np.diag(S) / (sizes * sizes - sizes)  # mean within weight per group
    across = S / np.outer(sizes, sizes)  # mean cross weight per ordered pair
    gaps = within[:, None] - across
    np.fill_diagonal(gaps, 0.0)
    return gaps


def bias_group(theta, Z: GroupAssignment) -> float:
    """Group-wise bias: mean squared within-vs-across weight gap over ordered pairs."""
    _require_groups(Z)
    theta_off = mask_offdiag(theta)
    gaps = _pair_gaps(theta_off, Z)
    g = Z.g
    return float(np.sum(gaps**2) / (g * g - g))


def bias_node(theta, Z: GroupAssignment) -> float:
    """Node-wise bias: every node's mean connection weight compared across groups."""
    _require_groups(Z)
    theta_off = mask_offdiag(theta)
    V = _node_directions(Z)
    M = theta_off @ V
    return float(np.sum(M**2) / (Z.p * Z.g * (Z.g - 1) ** 2))


def grad_bias_group(theta, Z: GroupAssignment) -> np.ndarray:
    """Symmetrized gradient of :func:`bias_group`; zero diagonal."""
    _require_groups(Z)
    theta_off = mask_offdiag(theta)
    gaps = _pair_gaps(theta_off, Z)
    sizes = Z.sizes
    g = Z.g
    # sum_{a != b} gap_ab * C_ab^T collapses to Z K Z^T in group space:
    # K[a, a] = sum_{b != a} gap_ab / (p_a^2 - p_a),  K[b, a] = -gap_ab / (p_a p_b).
    K = -(gaps / np.outer(sizes, sizes)).T
    np.fill_diagonal(K, gaps.sum(axis=1) / (sizes * sizes - sizes))
    Zm = Z.indicator_matrix
    G = Zm @ K @ Zm.T
    np.fill_diagonal(G, 0.0)
    G *= 2.0 / (g * g - g)
    return (G + G.T) / 2.0


def grad_bias_node(theta, Z: GroupAssignment) -> np.ndarray:
    """Symmetrized gradient of :func:`bias_node`; zero diagonal."""
    _require_groups(Z)
    theta_off = mask_offdiag(theta)
    V = _node_directions(Z)
    AT = V @ (V.T @ theta_off) / (Z.p * Z.g * (Z.g - 1) ** 2)
    np.fill_diagonal(AT, 0.0)
    return AT + AT.T  # (2 [A theta_off]_offdiag + transpose) / 2


def _pair_matrices(Z: GroupAssignment) -> list[np.ndarray]:
    # read-only views of the cached matrices; do not mutate
    return [
        _pair_matrix_cached(Z, a, b)
        for a in range(Z.g)
        for b in range(Z.g)
        if a != b
    ]


def _penalty_curvature_exact(Z: GroupAssignment) -> float:
    """Largest eigenvalue of the map ``X -> sum_ab trace(C_ab X) C_ab^T``.

    That map equals ``sum_ab vec(C_ab^T) vec(C_ab^T)^T`` on vectorized
    matrices, so its top eigenvalue is the top eigenvalue of the small
    ``g(g-1)``-dimensional Gram matrix of the pair matrices; the huge
    ``p^2 x p^2`` operator is never materialized.
    """
    Cs = _pair_matrices(Z)
    m = len(Cs)
    gram = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            gram[i, j] = gram[j, i] = float(np.sum(Cs[i] * Cs[j]))
    return float(np.linalg.eigvalsh(gram)[-1])


def _penalty_curvature_upper(Z: GroupAssignment) -> float:
    """Sum of squared largest singular values of the pair matrices.

    An upper bound on the exact curvature for balanced groups; severely
    unbalanced group sizes can make it undershoot slightly, in which case
    exact mode is the safe choice.
    """
    return float(sum(np.linalg.norm(C, 2) ** 2 for C in _pair_matrices(Z)))


def lipschitz_group(
    Z: GroupAssignment,
    mu2: float,
    epsilon: float,
    mode: LipschitzMode = LipschitzMode.UPPER,
) -> float:
    """Lipschitz constant of the smooth objective gradient under the group penalty."""
    if not epsilon > 0:
        raise FairGlassoError("epsilon must be positive")
    if mu2 < 0:
        raise FairGlassoError("mu2 must be nonnegative")
    base = 1.0 / epsilon**2
    if mu2 == 0:
        return base
    _require_groups(Z)
    g = Z.g
    if mode is LipschitzMode.EXACT:
        curv = _penalty_curvature_exact(Z)
    else:
        curv = _penalty_curvature_upper(Z)
    return base + 2.0 * mu2 / (g * g - g) * curv


def lipschitz_node(Z: GroupAssignment, mu2: float, epsilon: float) -> float:
    """Lipschitz constant of the smooth objective gradient under the node penalty."""
    if not epsilon > 0:
        raise FairGlassoError("epsilon must be positive")
    if mu2 < 0:
        raise FairGlassoError("mu2 must be nonnegative")
    base = 1.0 / epsilon**2
    if mu2 == 0:
        return base
    _require_groups(Z)
    V = _node_directions(Z)
    # lam_max(V V^T) = lam_max(V^T V); the Gram is only g x g.
    lam = float(np.linalg.eigvalsh(V.T @ V)[-1]) / (Z.p * Z.g * (Z.g - 1) ** 2)
    return base + 2.0 * mu2 * lam


def normalized_bias(theta, Z: GroupAssignment) -> float:
    """Scale-free bias score ``2 sqrt(bias_group) / ||theta_offdiag||_1``."""
    theta_off = mask_offdiag(theta)
    denom = float(np.sum(np.abs(theta_off)))
    if denom == 0.0:
        raise FairGlassoError(
            "degenerate estimate: all off-diagonal entries are zero"
        )
    return 2.0 * float(np.sqrt(bias_group(theta_off, Z))) / denom
