"""Box-Elastic Net under measurement-matrix uncertainty: solver, asymptotic theory, simulation."""

__version__ = "0.1.0"

from .kernels import ThresholdParams, e_val, eta, q_func, soft_threshold
from .model import (
    ConfigError,
    EmpiricalSummary,
    Instance,
    Prior,
    ProblemConfig,
    empirical_mse,
    empirical_support,
    generate_instance,
)
from .solver import SolveReport, SolverOptions, solve_box_en, solve_standard_en
from .theory import (
    SaddleError,
    SaddlePoint,
    TheoryPrediction,
    d_objective,
    expected_e,
    predict,
    predict_mse,
    predict_support,
    solve_saddle,
    upsilon,
)
from .tuning import LogGrid, TuneObjective, TuneResult, tune
