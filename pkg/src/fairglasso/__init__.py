"""Sparse Gaussian graphical model estimation with group-fairness penalties."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    EstimateResult,
    ExperimentRecord,
    FairGlassoError,
    GroupAssignment,
    LipschitzMode,
    PenaltyKind,
    SolverConfig,
    StopRule,
    as_sym_matrix,
    mask_offdiag,
)
from .fairness import (  # noqa: F401
    bias_group,
    bias_node,
    grad_bias_group,
    grad_bias_node,
    lipschitz_group,
    lipschitz_node,
    node_matrix,
    normalized_bias,
    pair_matrix,
)
from .solver import (  # noqa: F401
    fista_solve,
    objective,
    project_feasible,
    smooth_grad,
    soft_threshold,
)
from .datagen import (  # noqa: F401
    GroundTruth,
    assign_groups,
    er_graph,
    fair_ground_truth,
    inject_bias,
    precision_from_graph,
    sample_gaussian,
)
from .evaluate import (  # noqa: F401
    SweepGrid,
    SweepScenario,
    model_fit,
    modularity,
    normalized_error,
    run_sweep,
    rwgl_rewire,
    sign_ratios,
)
