"""
Calculators for the explicit error, mixing and schedule bounds of hit-and-run integration.

q = d R / r throughout. Logarithms are natural. Everything is evaluated in log space, so
kappa (or the warmness D) may be passed as its logarithm and exceed the float range.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from densities import ClassParams, ClassVariant
from estimators import EstimatorMode

logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1
LOG_INT64_MAX = math.log(INT64_MAX)

BOUNDED_CONSTANT = 1e27
AVERAGE_CONSTANT = 4e30
CONDUCTANCE_CONSTANT = 1e-13
MIXING_RATE_CONSTANT = 1e-26
BETA_CONSTANT = 1e-9
CORNER_CONSTANT = 12.0


class TvBound(NamedTuple):
    """A total-variation bound clamped at 1, with the unclamped value and its logarithm."""

    value: float
    raw: float
    log_raw: float

    def __float__(self):
        return self.value


@dataclass
class Schedule:
    n: int
    n0: int | float
    cost: int | float
    mode: EstimatorMode
    epsilon: float
    params: ClassParams
    log_n0: float = 0.0
    log_cost: float = 0.0
    # n0 or cost do not fit a signed 64-bit integer and are reported as floats
    impractical: bool = False
    trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "n0": self.n0, "cost": self.cost, "impractical": self.impractical,
                "mode": self.mode.value, "epsilon": self.epsilon, "log_n0": self.log_n0,
                "log_cost": self.log_cost}


def _check_q(d, r, R) -> float:
    if not (r > 0 and R > 0 and d >= 1):
        raise ValueError(f"need d >= 1 and positive r, R; got d={d}, r={r}, R={R}")
    q = d * R / r
    if q < 3.0 * (1.0 - 1e-12):
        raise ValueError(f"bounds need d*R/r >= 3, got {q}")
    return q


def _check_eps(eps):
    if not 0.0 < eps < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {eps}")


def _log_of(value, log_value, name, minimum=1.0) -> float:
    if log_value is None:
        if value is None:
            raise ValueError(f"{name} or log_{name} is required")
        if not value >= minimum:
            raise ValueError(f"{name} must be at least {minimum}, got {value}")
        return math.log(value)
    if log_value < math.log(minimum) - 1e-12:
        raise ValueError(f"{name} must be at least {minimum}, got exp({log_value})")
    return float(log_value)


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < 709.0 else math.inf


def _count(log_value: float, exact: float | None = None) -> tuple[int | float, bool]:
    """Ceiling of exp(log_value) as an int, or as a float when it does not fit int64."""
    if log_value >= LOG_INT64_MAX:
        return _exp(log_value), True
    value = exact if exact is not None else math.exp(log_value)
    return int(math.ceil(value)), False


def _clamped(log_raw: float) -> TvBound:
    raw = _exp(log_raw)
    return TvBound(value=min(1.0, raw), raw=raw, log_raw=log_raw)


def mse_bound(n: int, tv: float, f_inf: float) -> float:
    """Mean squared error bound f_inf^2 / n + 2 f_inf^2 tv of the multi-run estimator."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 <= tv <= 1.0:
        raise ValueError(f"tv must lie in [0, 1], got {tv}")
    if f_inf < 0:
        raise ValueError(f"f_inf must be nonnegative, got {f_inf}")
    return f_inf**2 / n + 2.0 * f_inf**2 * tv


def _schedule(eps, params, log_n0, mode, trace) -> Schedule:
    mode = EstimatorMode(mode) if not isinstance(mode, EstimatorMode) else mode
    n = int(math.ceil(1.0 / eps**2 - 1e-9))
    n0, huge = _count(log_n0)
    if mode == EstimatorMode.multi:
        log_cost = math.log(n) + log_n0
        cost = n * n0 if not huge and log_cost < LOG_INT64_MAX else _exp(log_cost)
    else:
        log_cost = _log_add(math.log(n), log_n0)
        cost = n + n0 if not huge else _exp(log_cost)
    impractical = huge or isinstance(cost, float)
    trace = trace + [
        f"n = ceil(eps^-2) = {n}",
        f"log n0 = {log_n0:.10g}, n0 = {n0:.10g}" if isinstance(n0, float) else f"n0 = {n0}",
        f"cost t(n, n0) = {'n * n0' if mode == EstimatorMode.multi else 'n + n0'} = {cost:.10g}",
    ]
    if impractical:
        logger.warning(f"schedule needs about 10^{log_cost / math.log(10):.1f} kernel steps, flagged impractical")
    return Schedule(n=n, n0=n0, cost=cost, mode=mode, epsilon=eps, params=params, log_n0=log_n0,
                    log_cost=log_cost, impractical=impractical, trace=trace)


def log_n0_bounded(q: float, log_kappa: float, eps: float) -> float:
    log_eps2 = 2.0 * math.log(eps)
    l1 = math.log(8.0) + math.log(q) + log_kappa - log_eps2
    l2 = math.log(4.0) + log_kappa - log_eps2
    return math.log(BOUNDED_CONSTANT) + 2.0 * math.log(q) + 2.0 * math.log(l1) + math.log(l2)


def log_n0_average(q: float, log_kappa: float, eps: float) -> float:
    log_eps2 = 2.0 * math.log(eps)
    l1 = math.log(2.0) + math.log(q) + log_kappa - log_eps2
    l2 = log_kappa - log_eps2
    return math.log(AVERAGE_CONSTANT) + 2.0 * math.log(q) + 2.0 * math.log(l1) + 3.0 * math.log(l2)


def schedule_bounded(eps: float, params: ClassParams, mode=EstimatorMode.multi) -> Schedule:
    """
    Multi-run schedule with worst-case error <= 3 eps over the bounded-support class:
    n = ceil(eps^-2), n0 = ceil(1e27 q^2 log^2(8 q kappa / eps^2) log(4 kappa / eps^2)).
    """
    _check_eps(eps)
    if params.variant != ClassVariant.bounded:
        raise ValueError("schedule_bounded needs class parameters of the bounded variant")
    q = _check_q(params.d, params.r, params.R)
    log_n0 = log_n0_bounded(q, params.log_kappa, eps)
    trace = [
        "bounded-support class: error of the multi-run estimator <= 3 eps",
        "  for n >= eps^-2 and n0 >= 1e27 q^2 log^2(8 q kappa eps^-2) log(4 kappa eps^-2)",
        f"q = d R / r = {q:.10g}, log kappa = {params.log_kappa:.10g}, eps = {eps}",
    ]
    return _schedule(eps, params, log_n0, mode, trace)


def schedule_average(eps: float, params: ClassParams, mode=EstimatorMode.multi) -> Schedule:
    """
    As schedule_bounded for the bounded-second-moment class:
    n0 = ceil(4e30 q^2 log^2(2 q kappa / eps^2) log^3(kappa / eps^2)).
    """
    _check_eps(eps)
    if params.variant != ClassVariant.average:
        raise ValueError("schedule_average needs class parameters of the average variant")
    q = _check_q(params.d, params.r, params.R)
    log_n0 = log_n0_average(q, params.log_kappa, eps)
    trace = [
        "bounded-second-moment class: error of the multi-run estimator <= 3 eps",
        "  for n >= eps^-2 and n0 >= 4e30 q^2 log^2(2 q kappa eps^-2) log^3(kappa eps^-2)",
        f"q = d R / r = {q:.10g}, log kappa = {params.log_kappa:.10g}, eps = {eps}",
    ]
    return _schedule(eps, params, log_n0, mode, trace)


def schedule_for(eps: float, params: ClassParams, mode=EstimatorMode.multi) -> Schedule:
    if params.variant == ClassVariant.bounded:
        return schedule_bounded(eps, params, mode)
    return schedule_average(eps, params, mode)


def tractability_cost(schedule: Schedule) -> int | float:
    """Total kernel steps t(n, n0) of a schedule: n * n0 (multi) or n + n0 (single)."""
    return schedule.cost


def tv_steps_bounded(d, r, R, D, eps, log_D=None) -> tuple[int | float, float]:
    """
    Steps after which a D-warm start (outside an eps-set) is 2 eps-close in total variation,
    bounded-support class: n0 > 1e27 q^2 log^2(8 D q / eps) log(4 D / eps). Returns (n0, log n0).
    """
    _check_eps(eps)
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    l1 = math.log(8.0) + log_D + math.log(q) - math.log(eps)
    l2 = math.log(4.0) + log_D - math.log(eps)
    log_n0 = math.log(BOUNDED_CONSTANT) + 2.0 * math.log(q) + 2.0 * math.log(l1) + math.log(l2)
    if log_n0 >= LOG_INT64_MAX:
        return _exp(log_n0), log_n0
    return int(math.floor(math.exp(log_n0))) + 1, log_n0


def tv_steps_average(d, r, R, D, eps, log_D=None) -> tuple[int | float, float]:
    """Bounded-second-moment analogue: n0 >= 4e30 q^2 log^2(2 D q / eps) log^3(D / eps)."""
    _check_eps(eps)
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    l1 = math.log(2.0) + log_D + math.log(q) - math.log(eps)
    l2 = log_D - math.log(eps)
    log_n0 = math.log(AVERAGE_CONSTANT) + 2.0 * math.log(q) + 2.0 * math.log(l1) + 3.0 * math.log(l2)
    return _count(log_n0)[0], log_n0


def tv_bound_explicit(n0: int, d, r, R, D, log_D=None) -> TvBound:
    """C beta^(n0^(1/3)) with C = 12 q D and beta = exp(-1e-9 / q^(2/3)), clamped at 1."""
    if n0 < 0:
        raise ValueError(f"n0 must be nonnegative, got {n0}")
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    log_beta = -BETA_CONSTANT / q ** (2.0 / 3.0)
    log_raw = math.log(CORNER_CONSTANT * q) + log_D + log_beta * float(n0) ** (1.0 / 3.0)
    return _clamped(log_raw)


def _mixing_exponent(n, q, log_D, eps, corner):
    log_arg = math.log(corner) + math.log(q) + log_D - math.log(eps)
    return -MIXING_RATE_CONSTANT * float(n) / (8.0 * q**2 * log_arg**2)


def tv_bound_mixed(n: int, d, r, R, D, eps, log_D=None) -> TvBound:
    """
    Total variation after n steps from a start that is D-warm outside a set of mass eps:
    3 eps / 2 + 2 D exp(-1e-26 n / (8 q^2 log^2(8 q D / eps))), clamped at 1.
    """
    _check_eps(eps)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    log_tail = math.log(2.0) + log_D + _mixing_exponent(n, q, log_D, eps, 8.0)
    return _clamped(_log_add(math.log(1.5 * eps), log_tail))


def tv_bound_warm(n: int, d, r, R, D, eps, log_D=None) -> TvBound:
    """
    Total variation after n steps from a D-warm start:
    eps / 2 + D exp(-1e-26 n / (8 q^2 log^2(4 q D / eps))), clamped at 1.
    """
    _check_eps(eps)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    log_tail = log_D + _mixing_exponent(n, q, log_D, eps, 4.0)
    return _clamped(_log_add(math.log(0.5 * eps), log_tail))


def _log_add(a: float, b: float) -> float:
    hi, lo = max(a, b), min(a, b)
    return hi + math.log1p(math.exp(lo - hi))


def conductance_lower_bound(d, r, R, D, eps, log_D=None) -> float:
    """s-conductance lower bound 1e-13 / (2 q log(4 q D / eps)) for s = eps / (2 D)."""
    _check_eps(eps)
    q = _check_q(d, r, R)
    log_D = _log_of(D, log_D, "D")
    return CONDUCTANCE_CONSTANT / (2.0 * q * (math.log(4.0 * q) + log_D - math.log(eps)))


def warmness_from_l2(l2_norm: float, eps: float) -> float:
    """Warmness D = ||d nu / d pi||_2^2 / eps for square-integrable initial densities."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    if not l2_norm >= 1.0:
        raise ValueError(f"the L2 norm of a probability density ratio is at least 1, got {l2_norm}")
    return l2_norm**2 / eps


def gap_error_bound(n: int, gap: float, f4_norm: float, nu_l2_dist: float) -> tuple[float, int]:
    """
    Single-run bound from a spectral gap: (4 f4_norm / (n gap), ceil(log(64 nu_l2_dist) / gap)),
    the error bound holding once the burn-in reaches the second value.
    """
    if not 0.0 < gap <= 1.0:
        raise ValueError(f"spectral gap must lie in (0, 1], got {gap}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if f4_norm < 0:
        raise ValueError(f"f4_norm must be nonnegative, got {f4_norm}")
    if not nu_l2_dist > 0:
        raise ValueError(f"nu_l2_dist must be positive, got {nu_l2_dist}")
    n0_min = max(0, int(math.ceil(math.log(64.0 * nu_l2_dist) / gap)))
    return 4.0 * f4_norm / (n * gap), n0_min
