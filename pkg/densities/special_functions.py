"""
Gamma-family special functions for the Gaussian example: the regularized incomplete
gamma function, the level-set radius r*(d) and the mass of Gaussian level sets.

All logarithms are natural.
"""
import math
from dataclasses import dataclass

MACHEP = 1.11022302462515654042e-16
MAX_TERMS = 100000
LEVEL_SET_MASS = 0.125


@dataclass(frozen=True)
class RStarResult:
    d: int
    r_star: float
    residual: float


def _log_prefactor(a, x):
    # log of x^a e^{-x} / Gamma(a)
    return a * math.log(x) - x - math.lgamma(a)


def _lower_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) <= abs(total) * MACHEP:
            break
    return total * math.exp(_log_prefactor(a, x))


def _upper_continued_fraction(a, x):
    # modified Lentz evaluation of the continued fraction for Gamma(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= MACHEP:
            break
    return math.exp(_log_prefactor(a, x)) * h


def _check_args(a, x):
    if not a > 0:
        raise ValueError(f"shape parameter a must be positive, got {a}")
    if not x >= 0:
        raise ValueError(f"argument x must be nonnegative, got {x}")


def regularized_lower_gamma(a: float, x: float) -> float:
    """
    P(a, x) = gamma(x, a) / Gamma(a): power series for x < a + 1, continued fraction otherwise.
    """
    _check_args(a, x)
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return max(0.0, 1.0 - _upper_continued_fraction(a, x))


def regularized_upper_gamma(a: float, x: float) -> float:
    _check_args(a, x)
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_continued_fraction(a, x))


def lower_gamma_density(a: float, x: float) -> float:
    """d/dx P(a, x)."""
    if x <= 0:
        return math.inf if a < 1 else (1.0 if a == 1 else 0.0)
    return math.exp((a - 1.0) * math.log(x) - x - math.lgamma(a))


def r_star(d: int, max_iter: int = 100) -> RStarResult:
    """
    Smallest r with P(d/2, r) >= 1/8: bracketing followed by Newton steps that fall back
    to bisection whenever they leave the bracket.
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    a = d / 2.0

    def f(r):
        return regularized_lower_gamma(a, r) - LEVEL_SET_MASS

    lo, hi = 0.0, max(a, 1.0)
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi

    # Wilson-Hilferty start, z = Phi^{-1}(1/8)
    z = -1.1503493803760079
    r = a * (1.0 - 1.0 / (9.0 * a) + z * math.sqrt(1.0 / (9.0 * a))) ** 3
    if not lo < r < hi:
        r = 0.5 * (lo + hi)

    for _ in range(max_iter):
        value = f(r)
        if value == 0.0:
            break
        if value < 0:
            lo = r
        else:
            hi = r
        slope = lower_gamma_density(a, r)
        step = r - value / slope if slope > 0 and math.isfinite(slope) else math.nan
        r_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(r_new - r) <= 4 * MACHEP * max(r, 1e-300) or hi - lo <= 4 * MACHEP * hi:
            r = r_new
            break
        r = r_new
    return RStarResult(d=d, r_star=r, residual=abs(f(r)))


def r_star_table(d_max: int) -> list[RStarResult]:
    if d_max < 1:
        raise ValueError(f"d_max must be at least 1, got {d_max}")
    return [r_star(d) for d in range(1, d_max + 1)]


def level_set_mass(s: float, d: int) -> float:
    """
    pi(K(s)) for the standard Gaussian level set K(s) = {rho >= s}: P(d/2, log(1/s)).
    """
    if not 0 < s <= 1:
        raise ValueError(f"level s must lie in (0, 1], got {s}")
    return regularized_lower_gamma(d / 2.0, -math.log(s))


def log_unit_sphere_area(d: int) -> float:
    """log vol_{d-1}(boundary of B_d) = log(2 pi^{d/2} / Gamma(d/2))."""
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d)


def log_unit_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)
