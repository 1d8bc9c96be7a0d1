from .special_functions import (
    RStarResult,
    regularized_lower_gamma,
    regularized_upper_gamma,
    r_star,
    r_star_table,
    level_set_mass,
    log_unit_sphere_area,
    log_unit_ball_volume,
)
from .abstract_density import AbstractDensity
from .log_concave import (
    GaussianDensity,
    UniformDensity,
    LinearTiltDensity,
    BlackboxDensity,
    log_density,
    restrict_to_line,
    check_log_concavity,
    density_from_dict,
)
from .class_params import (
    ClassParams,
    ClassVariant,
    gaussian_class_params,
    gaussian_log_kappa,
    gaussian_radius_ratio,
    gaussian_spectrum,
    centroid_second_moment,
)
from .expression import compile_expression
from har.line_sampler import InvalidDensityError
