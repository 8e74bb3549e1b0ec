"""compnull: composite null hypothesis testing for sets of z-statistics.

Fits a sign-symmetric Gaussian mixture over multidimensional z-statistics,
computes local false discovery rates against a composite null (at least one
dimension without an effect), applies an FDR-controlling rejection rule, and
audits the output for dominance/significance inconsistencies.  Includes a
simulation engine for two- and three-dimensional genetic association
scenarios.

Numerical hot paths run on a compiled extension when available; set
COMPNULL_KERNELS=numpy (or =compiled) before import to force a backend.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .configs import Config, ConfigSet, binary_representation, enumerate_configurations
from .estimate import (
    FitOptions,
    FitResult,
    e_step,
    em_fit,
    estimate_correlation,
    initialize_params,
    m_step,
    symmetrize,
)
from .inference import (
    AuditReport,
    EvalMetrics,
    RejectionResult,
    fdp_power,
    incongruence_audit,
    reject,
)
from .model import (
    ModelParams,
    ModelSpec,
    ZMatrix,
    component_log_density,
    lfdr,
    lfdr_batch,
    make_params,
    validate_params,
)
from .simulate import (
    ScenarioSpec,
    SimOutput,
    TruthLabels,
    draw_genotypes,
    linear_score_stat,
    logistic_score_stat,
    run_replicates,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "Config",
    "ConfigSet",
    "EvalMetrics",
    "FitOptions",
    "FitResult",
    "KERNEL_BACKEND",
    "ModelParams",
    "ModelSpec",
    "RejectionResult",
    "ScenarioSpec",
    "SimOutput",
    "TruthLabels",
    "ZMatrix",
    "binary_representation",
    "component_log_density",
    "draw_genotypes",
    "e_step",
    "em_fit",
    "enumerate_configurations",
    "estimate_correlation",
    "fdp_power",
    "incongruence_audit",
    "initialize_params",
    "lfdr",
    "lfdr_batch",
    "linear_score_stat",
    "logistic_score_stat",
    "m_step",
    "make_params",
    "reject",
    "run_replicates",
    "simulate",
    "symmetrize",
    "validate_params",
    "__version__",
]
