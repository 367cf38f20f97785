"""Shot noise processes with regularly varying responses and their fractionally integrated Gaussian limits."""

from .counting import (
    MODELS,
    ModelSpec,
    NormalizationTriple,
    ShotTimes,
    count,
    gen_branching_gen_k,
    gen_inhom_poisson,
    gen_long_memory_walk,
    gen_perturbed_walk,
    gen_random_walk,
    normalization_for,
    simulate_shots,
)
from .errors import (
    AssumptionError,
    BudgetError,
    ConfigError,
    DomainError,
    NumericalError,
    ShotLimitError,
    UnsupportedModelError,
)
from .fracint import FracIntSpec, frac_integrate, holder_estimate, limit_cov, rl_convolution_identity_check
from .gauss_paths import (
    BM,
    Driver,
    GaussianPath,
    TimeGrid,
    bm_cov,
    fbm_cov,
    rl_cov,
    sample_path,
    sample_paths,
    timechanged_cov,
)
from .laws import Law
from .response import ResponseFn, check_regular_variation
from .shotnoise import centering, eval_X, normalize
from .verify import ExperimentSpec, VerificationReport, convergence_sweep, lemma2_numeric_check, run_experiment

__version__ = "0.1.0"
