"""Data-driven identification of drift and diffusion in stochastic systems.

Simulate Ito diffusions, build delayed regression designs over term
dictionaries, assemble finite-difference / multistep normal systems for
the drift and the noise covariance, solve them densely or with
sequential thresholding, and sweep sampling parameters to measure
convergence.
"""

from .backend import ACTIVE_NAME as active_backend_name
from .backend import HAVE_COMPILED as have_compiled_backend
from .basis import (
    BasisSizeError,
    TermBasis,
    basis_size,
    full_basis,
    grlex_exponents,
    parse_label,
    term_label,
)
from .dictionary import (
    DesignSet,
    Dictionary,
    build_design_set,
    monomial_dictionary,
    trig_monomial_dictionary,
    truncate_design,
)
from .estimators import (
    DIFF_DRIFT_SUB,
    DIFF_FD1,
    DIFF_FD2,
    DIFF_TRAP,
    DIFFUSION_KINDS,
    DRIFT_FD1,
    DRIFT_FD2,
    DRIFT_KINDS,
    DRIFT_TRAP,
    METHOD_KINDS,
    LinearSystem,
    MethodSpec,
    diffusion_drift_sub,
    diffusion_fd1,
    diffusion_fd2,
    diffusion_trapezoidal,
    drift_fd1,
    drift_fd2,
    drift_general,
    drift_trapezoidal,
    sigma_pairs,
)
from .harness import (
    ConfigError,
    DictionarySpec,
    ExperimentConfig,
    InlineModelSpec,
    emit_csv,
    emit_plot_data,
    load_config,
    run_experiment,
    run_trial,
    validate_config,
)
from .metrics import (
    ErrorReport,
    NotRepresentableError,
    TrialEnsemble,
    aggregate,
    fit_order,
    true_coefficients,
    true_diffusion_coefficients,
    true_drift_coefficients,
)
from .models import (
    DriftTable,
    SdeModel,
    SigmaTable,
    ZOO_NAMES,
    build_table_model,
    model_zoo,
    true_sigma_matrix,
)
from .simulate import (
    DIVERGENCE_LIMIT,
    DivergenceError,
    Trajectory,
    euler_maruyama,
    subsample,
)
from .sparse import (
    CONDITION_LIMIT,
    SingularSystemError,
    SparseSolution,
    solve_dense,
    stls,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSizeError",
    "CONDITION_LIMIT",
    "ConfigError",
    "DIFF_DRIFT_SUB",
    "DIFF_FD1",
    "DIFF_FD2",
    "DIFF_TRAP",
    "DIFFUSION_KINDS",
    "DIVERGENCE_LIMIT",
    "DRIFT_FD1",
    "DRIFT_FD2",
    "DRIFT_KINDS",
    "DRIFT_TRAP",
    "DesignSet",
    "Dictionary",
    "DictionarySpec",
    "DivergenceError",
    "DriftTable",
    "ErrorReport",
    "ExperimentConfig",
    "InlineModelSpec",
    "LinearSystem",
    "METHOD_KINDS",
    "MethodSpec",
    "NotRepresentableError",
    "SdeModel",
    "SigmaTable",
    "SingularSystemError",
    "SparseSolution",
    "TermBasis",
    "Trajectory",
    "TrialEnsemble",
    "ZOO_NAMES",
    "active_backend_name",
    "aggregate",
    "basis_size",
    "build_design_set",
    "build_table_model",
    "diffusion_drift_sub",
    "diffusion_fd1",
    "diffusion_fd2",
    "diffusion_trapezoidal",
    "drift_fd1",
    "drift_fd2",
    "drift_general",
    "drift_trapezoidal",
    "emit_csv",
    "emit_plot_data",
    "euler_maruyama",
    "fit_order",
    "full_basis",
    "grlex_exponents",
    "have_compiled_backend",
    "load_config",
    "model_zoo",
    "monomial_dictionary",
    "parse_label",
    "run_experiment",
    "run_trial",
    "sigma_pairs",
    "solve_dense",
    "stls",
    "subsample",
    "term_label",
    "trig_monomial_dictionary",
    "true_coefficients",
    "true_diffusion_coefficients",
    "true_drift_coefficients",
    "true_sigma_matrix",
    "truncate_design",
    "validate_config",
]
