from .rng import RandomStream, as_generator
from .line_sampler import (
    InvalidDensityError,
    LineDensity,
    LineFamily,
    AdaptiveRejectionSampler,
    sample_line,
    truncated_normal,
    truncated_exponential,
)
from .hit_and_run import (
    ChainState,
    QuadratureError,
    sample_direction,
    har_step,
    run_chain,
    transition_log_density,
)
