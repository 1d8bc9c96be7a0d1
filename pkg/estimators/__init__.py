from .integrands import Integrand, INTEGRAND_NAMES, make_integrand, integrand_from_dict
from .estimators import (
    BLOCK_SIZE,
    EstimateResult,
    EstimatorConfig,
    EstimatorMode,
    MseResult,
    batch_means_std_error,
    empirical_mse,
    mse_from_values,
    multi_run,
    run_estimator,
    sample_initial,
    single_run,
)
