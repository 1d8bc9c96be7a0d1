from har import QuadratureError
from .quadrature import (
    body_cells,
    gauss_legendre_grid,
    quadrature_expectation,
    quadrature_log_integral,
)
from .oracles import (
    OracleReport,
    check_kappa_condition,
    check_level_set_ball,
    detailed_balance_residual,
    empirical_tv,
    kernel_normalization,
    ks_statistic,
    ks_two_sample,
    ks_two_sample_threshold,
)
from .suite import run_oracle_suite
