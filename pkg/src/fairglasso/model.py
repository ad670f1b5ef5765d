"""Shared domain types: group assignments, symmetric-matrix validation, configs.

Precision matrices, covariances and gradients are plain dense float64
``numpy`` arrays; :func:`as_sym_matrix` is the validating constructor used at
every public API boundary.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FairGlassoError",
    "SYM_RTOL",
    "as_sym_matrix",
    "mask_offdiag",
    "GroupAssignment",
    "PenaltyKind",
    "LipschitzMode",
    "StopRule",
    "SolverConfig",
    "EstimateResult",
    "ExperimentRecord",
]

# Maximum tolerated relative asymmetry before a matrix is rejected outright.
SYM_RTOL = 1e-12


class FairGlassoError(ValueError):
    """Invalid input, configuration, or numerically degenerate state."""


def as_sym_matrix(x, rtol: float = SYM_RTOL) -> np.ndarray:
    """Validate a dense square matrix and return its symmetrized float64 copy.

    Entries must be finite and the asymmetry ``max|X - X^T|`` must not exceed
    ``rtol * max(1, max|X|)``.  Asymmetry below the tolerance (e.g. 1e-16
    noise from gradient arithmetic) is silently repaired via ``(X + X^T)/2``;
    anything larger raises, which keeps genuinely wrong inputs from being
    laundered into symmetric ones.
    """
    arr = np.array(x, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise FairGlassoError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FairGlassoError("matrix contains NaN or Inf entries")
    scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
    gap = float(np.max(np.abs(arr - arr.T))) if arr.size else 0.0
    if gap > rtol * scale:
        raise FairGlassoError(
            f"matrix is asymmetric beyond tolerance (max gap {gap:.3e}, "
            f"allowed {rtol * scale:.3e})"
        )
    return (arr + arr.T) / 2.0


def mask_offdiag(x) -> np.ndarray:
    """Return a copy of ``x`` with the diagonal zeroed (off-diagonal part)."""
    arr = as_sym_matrix(x)
    np.fill_diagonal(arr, 0.0)
    return arr


@dataclass(frozen=True)
class GroupAssignment:
    """Partition of ``p`` nodes into ``g`` non-overlapping sensitive groups.

    ``labels[i]`` is the dense group index of node ``i`` in ``0..g-1``.  Every
    group must contain at least two nodes: the within-group averaging
    denominator ``p_a^2 - p_a`` of the group bias metric vanishes for
    singleton groups.
    """

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise FairGlassoError("group assignment needs at least one node")
        g = max(labels) + 1
        if min(labels) < 0:
            raise FairGlassoError("group labels must be nonnegative")
        counts = np.bincount(np.asarray(labels), minlength=g)
        missing = np.nonzero(counts == 0)[0]
        if missing.size:
            raise FairGlassoError(
                f"group labels must be dense 0..{g - 1}; missing {missing.tolist()} "
                "(use GroupAssignment.from_labels to remap arbitrary labels)"
            )
        small = np.nonzero(counts < 2)[0]
        if small.size:
            raise FairGlassoError(
                f"every group needs at least 2 members; groups {small.tolist()} "
                f"have sizes {counts[small].tolist()}"
            )

    @classmethod
    def from_labels(cls, raw: Iterable) -> "GroupAssignment":
        """Map arbitrary hashable labels to dense indices in sorted label order."""
        raw = list(raw)
        if not raw:
            raise FairGlassoError("group assignment needs at least one node")
        mapping = {lab: i for i, lab in enumerate(sorted(set(raw), key=str))}
        if len(mapping) < 2:
            raise FairGlassoError("need at least 2 distinct group labels")
        return cls(tuple(mapping[lab] for lab in raw))

    @property
    def p(self) -> int:
        return len(self.labels)

    @property
    def g(self) -> int:
        return max(self.labels) + 1

    @cached_property
    def sizes(self) -> np.ndarray:
        """Group sizes ``p_a``, shape ``(g,)``."""
        return np.bincount(np.asarray(self.labels), minlength=self.g).astype(float)

    @cached_property
    def indicator_matrix(self) -> np.ndarray:
        """The 0/1 membership matrix, shape ``(p, g)``; column ``a`` is ``z_a``."""
        Z = np.zeros((self.p, self.g))
        Z[np.arange(self.p), np.asarray(self.labels)] = 1.0
        return Z

    def indicator(self, a: int) -> np.ndarray:
        """The 0/1 membership vector ``z_a`` of group ``a``."""
        if not 0 <= a < self.g:
            raise FairGlassoError(f"group index {a} out of range [0, {self.g})")
        return self.indicator_matrix[:, a].copy()


class PenaltyKind(enum.Enum):
    """Which bias penalty the estimator applies (or none: plain graphical lasso)."""

    NONE = "none"
    GROUP = "group"
    NODE = "node"


class LipschitzMode(enum.Enum):
    """Exact smooth-gradient Lipschitz constant vs the cheap per-pair upper bound."""

    EXACT = "exact"
    UPPER = "upper"


class StopRule(enum.Enum):
    """Stop on relative iterate change (default) or relative objective change."""

    ITERATE = "iterate"
    OBJECTIVE = "objective"


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of the penalized estimator and its accelerated solver.

    ``alpha`` is the squared spectral-norm cap of the feasible set; ``None``
    derives it from the sample covariance at solve time as
    ``(10 / max(lambda_min, 1e-3))**2``.  Note the gradient step size is
    ``1/L`` with ``L >= 1/epsilon**2``, so very small ``epsilon`` values make
    individual steps tiny.
    """

    mu1: float = 0.1
    mu2: float = 1.0
    epsilon: float = 1e-4
    alpha: float | None = None
    penalty: PenaltyKind = PenaltyKind.GROUP
    max_iter: int = 1000
    tol: float = 1e-6
    lipschitz_mode: LipschitzMode = LipschitzMode.UPPER
    stop_rule: StopRule = StopRule.ITERATE
    # Function-value restart of the momentum sequence. Off by default: the
    # base accelerated scheme has no restart; this is an optional extension.
    restart: bool = False
    record_iterates: bool = False

    def __post_init__(self):
        if self.mu1 < 0 or self.mu2 < 0:
            raise FairGlassoError("mu1 and mu2 must be nonnegative")
        if not self.epsilon > 0:
            raise FairGlassoError("epsilon must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise FairGlassoError("alpha must be positive")
        if self.max_iter < 1:
            raise FairGlassoError("max_iter must be a positive integer")
        if not self.tol > 0:
            raise FairGlassoError("tol must be positive")


@dataclass
class EstimateResult:
    """Estimated precision matrix plus convergence metadata.

    ``objective_trace[0]`` is the objective at the initial point and
    ``objective_trace[k]`` the objective after iteration ``k``; ``iterates``
    mirrors that indexing when recording is enabled.
    """

    theta: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list[float]
    final_objective: float
    lipschitz_used: float
    alpha_used: float
    iterates: list[np.ndarray] | None = None


@dataclass
class ExperimentRecord:
    """One row of a benchmark sweep.

    ``error``/``bias`` are NaN for records whose solve failed; the sweep
    never aborts on per-record errors.
    """

    method: str
    p: int
    n: int
    g: int
    seed: int
    mu1: float
    mu2: float
    error: float
    bias: float
    runtime_s: float
    beta: float | None = None

    def __post_init__(self):
        for name in ("error", "bias"):
            v = getattr(self, name)
            if not math.isnan(v) and v < 0:
                raise FairGlassoError(f"{name} must be nonnegative, got {v}")
