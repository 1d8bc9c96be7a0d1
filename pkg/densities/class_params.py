"""
Class parameters (d, r, R, kappa) of the bounded-support and bounded-second-moment classes,
and their closed forms for centered Gaussians.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import torch

from geometry import AbstractConvexBody, Ball, body_from_dict
from utils import DTYPE
from .log_concave import GaussianDensity
from .special_functions import r_star

logger = logging.getLogger(__name__)

KAPPA_MIN = 3.0
RADIUS_RATIO_MIN = 3.0


class ClassVariant(Enum):
    bounded = "bounded"
    average = "average"


def _as_variant(variant) -> ClassVariant:
    if isinstance(variant, ClassVariant):
        return variant
    try:
        return ClassVariant(variant)
    except ValueError:
        raise ValueError(f"class variant has to be bounded or average, got {variant!r}") from None


@dataclass(frozen=True)
class ClassParams:
    """
    Exactly one of kappa / log_kappa needs to be given; the other is derived. kappa is
    +inf when it does not fit a float, log_kappa always stays finite.
    """

    d: int
    r: float
    R: float
    kappa: float | None = None
    log_kappa: float | None = None
    variant: ClassVariant = ClassVariant.bounded
    G: AbstractConvexBody | None = field(default=None, compare=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("variant", _as_variant(self.variant))
        if self.kappa is None and self.log_kappa is None:
            raise ValueError("class parameters need kappa or log_kappa")
        if self.log_kappa is None:
            if not self.kappa > 0:
                raise ValueError(f"kappa must be positive, got {self.kappa}")
            set_("log_kappa", math.log(self.kappa))
        elif self.kappa is None:
            set_("kappa", math.exp(self.log_kappa) if self.log_kappa < 709.0 else math.inf)
        if self.G is None:
            set_("G", Ball(torch.zeros(self.d, dtype=DTYPE), 1.0))
        if self.d < 1:
            raise ValueError(f"dimension must be at least 1, got {self.d}")
        if not 0 < self.r <= self.R:
            raise ValueError(f"class parameters need 0 < r <= R, got r={self.r}, R={self.R}")
        if self.log_kappa < math.log(KAPPA_MIN) - 1e-12:
            raise ValueError(f"kappa must be at least {KAPPA_MIN}, got {self.kappa}")
        if self.q < RADIUS_RATIO_MIN * (1.0 - 1e-12):
            raise ValueError(f"class parameters need d*R/r >= {RADIUS_RATIO_MIN}, got {self.q}")
        if self.G.dim != self.d:
            raise ValueError(f"dimension mismatch: G is {self.G.dim}-dimensional, d = {self.d}")

    @property
    def q(self) -> float:
        """d R / r, the quantity every bound is polynomial in."""
        return self.d * self.R / self.r

    def to_dict(self) -> dict:
        desc = {"d": self.d, "r": self.r, "R": self.R, "log_kappa": self.log_kappa,
                "variant": self.variant.value, "G": self.G.to_dict()}
        if math.isfinite(self.kappa):
            desc["kappa"] = self.kappa
        return desc

    @classmethod
    def from_dict(cls, desc: dict) -> "ClassParams":
        G = body_from_dict(desc["G"]) if "G" in desc else None
        return cls(d=int(desc["d"]), r=float(desc["r"]), R=float(desc["R"]),
                   kappa=desc.get("kappa"), log_kappa=desc.get("log_kappa"),
                   variant=desc.get("variant", "bounded"), G=G)


def _gaussian(density_or_factor) -> GaussianDensity:
    if isinstance(density_or_factor, GaussianDensity):
        return density_or_factor
    return GaussianDensity(density_or_factor)


def gaussian_spectrum(density_or_factor) -> tuple[float, float, float]:
    """(lambda_min, trace, log det) of Sigma."""
    g = _gaussian(density_or_factor)
    eig = torch.linalg.eigvalsh(g.sigma)
    log_det = 2.0 * float(torch.log(torch.diagonal(g.factor)).sum())
    return float(eig[0]), float(g.sigma.trace()), log_det


def gaussian_log_kappa(density_or_factor) -> float:
    """log of exp(1/(2 lambda_min)) Gamma(d/2+1) 2^{d/2} sqrt(det Sigma) for G = unit ball."""
    g = _gaussian(density_or_factor)
    lam_min, _, log_det = gaussian_spectrum(g)
    d = g.dim
    return 0.5 / lam_min + math.lgamma(0.5 * d + 1.0) + 0.5 * d * math.log(2.0) + 0.5 * log_det


def gaussian_class_params(density_or_factor, relax: bool = True) -> ClassParams:
    """
    Bounded-second-moment class parameters of a centered Gaussian with G the unit ball:
    R = sqrt(tr Sigma)/2, r = sqrt(lambda_min r*(d)) and kappa from the closed form.
    With relax=True, kappa and R are raised to the class minimums when the closed form
    falls below them (the class conditions only bound kappa and R from above).
    """
    g = _gaussian(density_or_factor)
    d = g.dim
    lam_min, trace, _ = gaussian_spectrum(g)
    if not lam_min > 0:
        raise ValueError("covariance is not positive definite")
    r = math.sqrt(lam_min * r_star(d).r_star)
    R = 0.5 * math.sqrt(trace)
    log_kappa = gaussian_log_kappa(g)
    if relax:
        if log_kappa < math.log(KAPPA_MIN):
            logger.warning(f"kappa = {math.exp(log_kappa):.6g} is below {KAPPA_MIN}, raised to the class minimum")
            log_kappa = math.log(KAPPA_MIN)
        if d * R / r < RADIUS_RATIO_MIN or R < r:
            R_new = max(R, r, RADIUS_RATIO_MIN * r / d)
            logger.warning(f"R = {R:.6g} gives d*R/r = {d * R / r:.6g} < {RADIUS_RATIO_MIN}, raised to {R_new:.6g}")
            R = R_new
    return ClassParams(d=d, r=r, R=R, log_kappa=log_kappa, variant=ClassVariant.average,
                       G=Ball(torch.zeros(d, dtype=DTYPE), 1.0))


def gaussian_radius_ratio(density_or_factor) -> float:
    """R/r = sqrt(tr Sigma / lambda_min) / (2 sqrt(r*(d))), before any relaxation."""
    g = _gaussian(density_or_factor)
    lam_min, trace, _ = gaussian_spectrum(g)
    return math.sqrt(trace / lam_min) / (2.0 * math.sqrt(r_star(g.dim).r_star))


def centroid_second_moment(density_or_factor) -> float:
    """Second moment of the centered Gaussian about its centroid, tr Sigma."""
    _, trace, _ = gaussian_spectrum(density_or_factor)
    return trace
