"""Penalized maximum-likelihood objective and its accelerated proximal solver.

The estimator minimizes

    trace(S @ theta) - log det(theta + eps*I) + mu1 * ||theta_offdiag||_1
                     + mu2 * R(theta)

over symmetric PSD matrices with squared spectral norm at most ``alpha``,
where ``R`` is one of the bias penalties from :mod:`fairglasso.fairness`.
Each iteration takes a gradient step on the smooth part with step size
``1/L``, soft-thresholds the off-diagonal entries, projects onto the feasible
set by eigenvalue clipping, and applies the standard momentum extrapolation
with ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import fairness
from .model import (
    EstimateResult,
    FairGlassoError,
    GroupAssignment,
    PenaltyKind,
    SolverConfig,
    StopRule,
    as_sym_matrix,
)

__all__ = [
    "objective",
    "smooth_grad",
    "soft_threshold",
    "project_feasible",
    "default_alpha",
    "t_update",
    "fista_solve",
    "SolverState",
]

# Eigenvalue slack accepted when validating PSD inputs.
PSD_TOL = 1e-8


def _effective_mu2(cfg: SolverConfig) -> float:
    # PenaltyKind.NONE is plain graphical lasso regardless of mu2.
    return 0.0 if cfg.penalty is PenaltyKind.NONE else cfg.mu2


def _penalty_value(theta_off, Z, cfg: SolverConfig) -> float:
    mu2 = _effective_mu2(cfg)
    if mu2 == 0.0:
        return 0.0
    if cfg.penalty is PenaltyKind.GROUP:
        return mu2 * fairness.bias_group(theta_off, Z)
    return mu2 * fairness.bias_node(theta_off, Z)


def objective(theta, sigma_hat, Z: GroupAssignment, cfg: SolverConfig) -> float:
    """Full objective value at ``theta``; errors if ``theta + eps*I`` is not PD."""
    theta = as_sym_matrix(theta)
    sigma_hat = as_sym_matrix(sigma_hat)
    p = theta.shape[0]
    shifted = theta + cfg.epsilon * np.eye(p)
    try:
        chol = np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError as exc:
        raise FairGlassoError(
            "objective undefined: log det of non-PD matrix"
        ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    theta_off = theta.copy()
    np.fill_diagonal(theta_off, 0.0)
    val = float(np.sum(sigma_hat * theta)) - logdet
    val += cfg.mu1 * float(np.sum(np.abs(theta_off)))
    val += _penalty_value(theta_off, Z, cfg)
    return val


def _sym_inverse(shifted: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric matrix: Cholesky when PD, eigendecomposition fallback."""
    try:
        c, low = scipy.linalg.cho_factor(shifted, lower=True)
        return scipy.linalg.cho_solve((c, low), np.eye(shifted.shape[0]))
    except scipy.linalg.LinAlgError:
        pass
    # Momentum extrapolation can leave the PSD cone; the gradient only needs
    # invertibility, not definiteness.
    vals, vecs = np.linalg.eigh(shifted)
    if np.min(np.abs(vals)) <= 1e-14 * max(1.0, float(np.max(np.abs(vals)))):
        raise FairGlassoError("singular matrix: smooth gradient undefined")
    return (vecs / vals) @ vecs.T


def smooth_grad(theta, sigma_hat, Z: GroupAssignment, cfg: SolverConfig) -> np.ndarray:
    """Gradient of the smooth objective part (data fit, log-det, bias penalty)."""
    theta = as_sym_matrix(theta)
    sigma_hat = as_sym_matrix(sigma_hat)
    p = theta.shape[0]
    inv = _sym_inverse(theta + cfg.epsilon * np.eye(p))
    grad = sigma_hat - inv
    mu2 = _effective_mu2(cfg)
    if mu2 != 0.0:
        if cfg.penalty is PenaltyKind.GROUP:
            grad = grad + mu2 * fairness.grad_bias_group(theta, Z)
        else:
            grad = grad + mu2 * fairness.grad_bias_node(theta, Z)
    return (grad + grad.T) / 2.0


def soft_threshold(X, lam: float) -> np.ndarray:
    """Shrink off-diagonal entries toward zero by ``lam``; diagonal unchanged.

    The l1 penalty covers only off-diagonal entries, so the prox is the
    identity on the diagonal.
    """
    if lam < 0:
        raise FairGlassoError("threshold must be nonnegative")
    X = as_sym_matrix(X)
    diag = np.diag(X).copy()
    out = np.sign(X) * np.maximum(np.abs(X) - lam, 0.0)
    np.fill_diagonal(out, diag)
    return out


def project_feasible(X, alpha: float) -> np.ndarray:
    """Frobenius-nearest symmetric matrix with eigenvalues in ``[0, sqrt(alpha)]``."""
    if not alpha > 0:
        raise FairGlassoError("alpha must be positive")
    X = as_sym_matrix(X)
    vals, vecs = np.linalg.eigh(X)
    clipped = np.clip(vals, 0.0, math.sqrt(alpha))
    out = (vecs * clipped) @ vecs.T
    return (out + out.T) / 2.0


def default_alpha(sigma_hat) -> float:
    """Spectral cap derived from the sample covariance.

    Overshoots the plausible top eigenvalue of the precision matrix,
    ``alpha = (10 / max(lambda_min(sigma), 1e-3))^2``, so the constraint only
    guards against runaway iterates.
    """
    sigma_hat = as_sym_matrix(sigma_hat)
    lam_min = float(np.linalg.eigvalsh(sigma_hat)[0])
    return (10.0 / max(lam_min, 1e-3)) ** 2


def _lipschitz(Z: GroupAssignment, cfg: SolverConfig) -> float:
    mu2 = _effective_mu2(cfg)
    if cfg.penalty is PenaltyKind.GROUP and mu2 > 0:
        return fairness.lipschitz_group(Z, mu2, cfg.epsilon, cfg.lipschitz_mode)
    if cfg.penalty is PenaltyKind.NODE and mu2 > 0:
        return fairness.lipschitz_node(Z, mu2, cfg.epsilon)
    return 1.0 / cfg.epsilon**2


def t_update(t: float) -> float:
    """Momentum scalar recursion ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


@dataclass
class SolverState:
    """Loop state: previous/current estimates, extrapolated point, momentum scalar."""

    theta_prev: np.ndarray
    theta_curr: np.ndarray
    theta_momentum: np.ndarray
    t_curr: float
    k: int


def _check_feasible(theta: np.ndarray, alpha: float, what: str) -> None:
    vals = np.linalg.eigvalsh(theta)
    if vals[0] < -PSD_TOL:
        raise FairGlassoError(f"{what} is not PSD (min eigenvalue {vals[0]:.3e})")
    if vals[-1] > math.sqrt(alpha) + PSD_TOL:
        raise FairGlassoError(
            f"{what} violates the spectral cap (||.||_2 = {vals[-1]:.3e} "
            f"> sqrt(alpha) = {math.sqrt(alpha):.3e})"
        )


def fista_solve(
    sigma_hat,
    Z: GroupAssignment,
    cfg: SolverConfig,
    init=None,
) -> EstimateResult:
    """Run the accelerated proximal-gradient loop to estimate a precision matrix.

    Parameters
    ----------
    sigma_hat : array
        Sample covariance, symmetric PSD.
    Z : GroupAssignment
        Node groups; only consulted when the configured penalty is active.
    cfg : SolverConfig
        Hyperparameters; ``cfg.alpha = None`` derives the spectral cap from
        ``sigma_hat``.
    init : array, optional
        Feasible starting point.  Defaults to the projected diagonal matrix
        of inverse sample variances.

    Returns
    -------
    EstimateResult
        Feasible estimate with the per-iteration objective trace.
    """
    sigma_hat = as_sym_matrix(sigma_hat)
    p = sigma_hat.shape[0]
    if float(np.linalg.eigvalsh(sigma_hat)[0]) < -PSD_TOL:
        raise FairGlassoError("sample covariance must be PSD")
    alpha = cfg.alpha if cfg.alpha is not None else default_alpha(sigma_hat)
    L = _lipschitz(Z, cfg)
    if not (L > 0 and math.isfinite(L)):
        raise FairGlassoError(f"invalid Lipschitz constant {L}")

    if init is None:
        start = np.diag(1.0 / (np.diag(sigma_hat) + cfg.epsilon))
        theta0 = project_feasible(start, alpha)
    else:
        theta0 = as_sym_matrix(init)
        if theta0.shape[0] != p:
            raise FairGlassoError("init shape does not match sigma_hat")
        _check_feasible(theta0, alpha, "init")

    state = SolverState(
        theta_prev=theta0,
        theta_curr=theta0,
        theta_momentum=theta0,
        t_curr=1.0,
        k=0,
    )
    trace = [objective(theta0, sigma_hat, Z, cfg)]
    iterates = [theta0.copy()] if cfg.record_iterates else None
    converged = False

    for k in range(1, cfg.max_iter + 1):
        grad = smooth_grad(state.theta_momentum, sigma_hat, Z, cfg)
        stepped = state.theta_momentum - grad / L
        theta_next = project_feasible(soft_threshold(stepped, cfg.mu1 / L), alpha)
        t_next = t_update(state.t_curr)
        momentum = theta_next + ((state.t_curr - 1.0) / t_next) * (
            theta_next - state.theta_curr
        )
        value = objective(theta_next, sigma_hat, Z, cfg)
        if cfg.restart and value > trace[-1]:
            # extension beyond the base scheme: drop momentum when the
            # objective increases
            t_next = 1.0
            momentum = theta_next
        if cfg.stop_rule is StopRule.ITERATE:
            num = float(np.linalg.norm(theta_next - state.theta_curr))
            den = max(float(np.linalg.norm(state.theta_curr)), 1e-12)
        else:
            num = abs(value - trace[-1])
            den = max(abs(trace[-1]), 1e-12)
        trace.append(value)
        if iterates is not None:
            iterates.append(theta_next.copy())
        state = SolverState(
            theta_prev=state.theta_curr,
            theta_curr=theta_next,
            theta_momentum=momentum,
            t_curr=t_next,
            k=k,
        )
        if num / den < cfg.tol:
            converged = True
            break

    return EstimateResult(
        theta=state.theta_curr,
        iterations=state.k,
        converged=converged,
        objective_trace=trace,
        final_objective=trace[-1],
        lipschitz_used=L,
        alpha_used=alpha,
        iterates=iterates,
    )
