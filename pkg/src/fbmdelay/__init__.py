"""Simulation and kernel trend estimation for small-noise delay SDEs driven by fBm."""
from ._backend import BACKEND
from .ddesolve import (
    DelaySpec,
    TrendField,
    crossing_time,
    fundamental_solution_linear,
    simulate_delay_sde,
    solve_delay_ode,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    EdgeError,
    FbmDelayError,
    GenerationError,
    KernelError,
    OutOfRangeError,
)
from .estimator import (
    EstimatorConfig,
    TrendEstimate,
    bandwidth_smooth,
    bandwidth_theorem31,
    estimate_trend_at_level,
    estimate_trend_at_time,
    hitting_time,
    stieltjes_convolution,
)
from .fbm import (
    HurstIndex,
    SamplePath,
    TimeGrid,
    fbm_covariance,
    path_supremum,
    sample_fbm_cholesky,
    sample_fbm_davies_harte,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    check_lemma31,
    export_report,
    fit_rate,
    run_mse_experiment,
)
from .kernels import (
    KernelSpec,
    eval_kernel,
    kernel_moment,
    make_higher_order_kernel,
    make_standard_kernel,
)

__version__ = "0.1.0"
