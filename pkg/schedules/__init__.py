from .bounds import (
    Schedule,
    TvBound,
    mse_bound,
    schedule_bounded,
    schedule_average,
    schedule_for,
    tractability_cost,
    tv_steps_bounded,
    tv_steps_average,
    tv_bound_explicit,
    tv_bound_mixed,
    tv_bound_warm,
    conductance_lower_bound,
    warmness_from_l2,
    gap_error_bound,
    log_n0_bounded,
    log_n0_average,
)
