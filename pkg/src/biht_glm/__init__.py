"""Binary iterative hard thresholding for sparse binary GLMs."""
from .errors import (
    BihtError,
    DegenerateDirection,
    DegenerateIterate,
    ExperimentFailed,
    InvalidLink,
    InvalidParams,
    UnsupportedLink,
)
from .experiments import ExperimentConfig, run_experiment, run_variants, sweep_n
from .glm import (
    LinkModel,
    ModelQuantities,
    alpha,
    alpha0,
    gamma,
    gamma_stein,
    model_quantities,
    sample_responses,
)
from .linalg import (
    GaussianDesign,
    SparseUnitVector,
    gaussian_design,
    normalize,
    random_sparse_unit,
    sign_of,
    subset_threshold,
    top_k_threshold,
)
from .solver import BihtConfig, TrialTrace, biht_run, biht_step, relu_loss
from .theory import theoretical_error_curve

__version__ = "0.1.0"
