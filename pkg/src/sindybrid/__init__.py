"""Locate equation-level model mismatch and compensate it symbolically.

Pipeline: simulate batch campaigns from a mechanistic model carrying a
synthetic deviation, form per-sample residuals between numeric derivatives
and the undisturbed model, then solve a mixed-integer program that picks
the fewest state equations (and sparsest library coefficients) explaining
the residuals.  The result is a hybrid model whose right-hand side is the
mechanistic part plus the learned correction.
"""
from .cases import CASE_IDS, CaseModel, make_case
from .datagen import (
    CampaignConfig,
    CampaignError,
    Dataset,
    build_dataset,
    load_dataset,
    nominal_config,
    save_dataset,
)
from .hybrid import EvalReport, HybridModel, assemble_hybrid, evaluate, identified_locations
from .library import (
    CandidateFunction,
    ConfigurationError,
    LibraryEvaluationError,
    LibrarySpec,
    build_library,
    evaluate_library,
    scale_columns,
)
from .milp import Hyperparams, MilpProblem, MilpSolution, assemble, solve
from .odes import DeviationSpec, IntegrationError, OdeSystem, Trajectory, integrate
from .residuals import ResidualError, ResidualMatrix, numeric_derivative, residual_matrix
from .harness import (
    StageError,
    SweepSpec,
    normalize_hyperparams,
    residual_distribution_report,
    run_identification,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CASE_IDS",
    "CampaignConfig",
    "CampaignError",
    "CandidateFunction",
    "CaseModel",
    "ConfigurationError",
    "Dataset",
    "DeviationSpec",
    "EvalReport",
    "HybridModel",
    "Hyperparams",
    "IntegrationError",
    "LibraryEvaluationError",
    "LibrarySpec",
    "MilpProblem",
    "MilpSolution",
    "OdeSystem",
    "ResidualError",
    "ResidualMatrix",
    "StageError",
    "SweepSpec",
    "Trajectory",
    "assemble",
    "assemble_hybrid",
    "build_dataset",
    "build_library",
    "evaluate",
    "evaluate_library",
    "identified_locations",
    "integrate",
    "load_dataset",
    "make_case",
    "nominal_config",
    "normalize_hyperparams",
    "numeric_derivative",
    "residual_distribution_report",
    "residual_matrix",
    "run_identification",
    "run_sweep",
    "save_dataset",
    "scale_columns",
    "solve",
    "__version__",
]
