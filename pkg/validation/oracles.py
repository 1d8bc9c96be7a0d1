import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
from scipy.special import roots_legendre
from scipy.stats import kstest, ks_2samp

from densities import GaussianDensity, UniformDensity, level_set_mass, r_star
from geometry import AbstractConvexBody
from har import transition_log_density
from utils import DTYPE, as_tensor
from .quadrature import parameter_grid, quadrature_log_integral

logger = logging.getLogger(__name__)

KAPPA_RTOL = 1e-4
# sqrt(-log(alpha / 2) / 2) at alpha = 1e-3
KS_CRITICAL_1E3 = 1.9494746752403


@dataclass
class OracleReport:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""

    @classmethod
    def check(cls, name: str, statistic: float, threshold: float, detail: str = "") -> "OracleReport":
        passed = bool(statistic <= threshold)
        if not passed:
            logger.warning(f"oracle {name} failed: {statistic:.6g} > {threshold:.6g} {detail}")
        return cls(name=name, statistic=float(statistic), threshold=float(threshold), passed=passed, detail=detail)

    def to_dict(self) -> dict:
        return {"name": self.name, "statistic": self.statistic, "threshold": self.threshold,
                "pass": self.passed, "detail": self.detail}


def _grid_min_log_density(density, G, per_axis=65, rounds=4):
    """inf of log rho over G: parameter grid minimum, then local grids around the minimizer."""
    axis = torch.linspace(0.0, 1.0, per_axis, dtype=DTYPE)
    u, cells = parameter_grid(G, per_axis)
    points = torch.cat([cell(u)[0] for cell in cells])
    best = math.inf
    with torch.no_grad():
        for cell in cells:
            center = None
            width = 1.0
            grid = u
            for _ in range(rounds):
                x, _ = cell(grid)
                values = density.log_density(x)
                i = int(torch.argmin(values))
                if float(values[i]) < best:
                    best = float(values[i])
                center = grid[i]
                width = 4.0 * width / (per_axis - 1)
                local = (axis - 0.5) * width
                grid = torch.clamp(center + torch.cartesian_prod(*([local] * G.dim)).reshape(-1, G.dim), 0.0, 1.0)
    return best, points


def check_kappa_condition(density, G: AbstractConvexBody, claimed_kappa: float | None = None, rng=None,
                          log_claimed_kappa: float | None = None, spot_checks: int = 1000) -> OracleReport:
    """
    Verifies int rho / (vol(G) inf_G rho) <= kappa by quadrature and a grid minimum, and
    spot checks d nu / d pi_rho <= kappa for the uniform law nu on G. The statistic is the ratio.
    """
    if log_claimed_kappa is None:
        log_claimed_kappa = math.log(claimed_kappa)
    if not G.bounded:
        raise ValueError("G must be bounded")
    log_inf, grid_points = _grid_min_log_density(density, G)
    if not bool(torch.as_tensor(density.body.contains(grid_points)).all()) or not math.isfinite(log_inf):
        raise ValueError("G is not contained in the support of the density")
    log_mass = quadrature_log_integral(density)
    log_vol = quadrature_log_integral(UniformDensity(G))
    log_ratio = log_mass - log_vol - log_inf

    spot_max = -math.inf
    if rng is not None and spot_checks > 0:
        x = G.sample_uniform(rng, spot_checks)
        if not bool(density.body.contains(x).all()):
            raise ValueError("G is not contained in the support of the density")
        with torch.no_grad():
            spot_max = float((log_mass - log_vol - density.log_density(x)).max())

    log_threshold = log_claimed_kappa + math.log1p(KAPPA_RTOL)
    spot_ok = spot_max <= log_threshold
    detail = f"log ratio {log_ratio:.10g}, log kappa {log_claimed_kappa:.10g}, max spot log density ratio {spot_max:.6g}"
    if not spot_ok:
        logger.warning(f"density ratio d nu / d pi exceeds kappa at a spot check: {detail}")
    ratio = math.exp(log_ratio) if log_ratio < 709.0 else math.inf
    threshold = math.exp(log_threshold) if log_threshold < 709.0 else math.inf
    report = OracleReport.check("kappa_condition", ratio, threshold, detail)
    report.passed = report.passed and spot_ok
    return report


def check_level_set_ball(density_or_factor, d: int | None = None, name: str = "level_set_ball") -> OracleReport:
    """
    Checks that the ball of radius r = sqrt(lambda_min r*(d)) lies in the level set
    {x^T Sigma^{-1} x <= 2 r*(d)} carrying mass 1/8: max_{|x| = r} x^T Sigma^{-1} x is computed from
    the spectrum of Sigma^{-1} and compared with r^2 / lambda_min and with 2 r*(d).
    The statistic is max_{|x| = r} x^T Sigma^{-1} x - 2 r*(d); the slack is its negative.
    """
    g = density_or_factor if isinstance(density_or_factor, GaussianDensity) else GaussianDensity(density_or_factor)
    if d is not None and d != g.dim:
        raise ValueError(f"dimension mismatch: factor is {g.dim}-dimensional, d = {d}")
    d = g.dim
    lam_min = float(torch.linalg.eigvalsh(g.sigma)[0])
    precision = torch.cholesky_inverse(g.factor)
    rs = r_star(d).r_star
    r2 = lam_min * rs
    max_quad = r2 * float(torch.linalg.eigvalsh(precision)[-1])
    identity_error = abs(max_quad - r2 / lam_min) / (r2 / lam_min)
    mass_error = abs(level_set_mass(math.exp(-rs), d) - 0.125)
    statistic = max_quad - 2.0 * rs
    detail = (f"r = {math.sqrt(r2):.10g}, max quadratic form {max_quad:.10g}, 2 r* = {2 * rs:.10g}, "
              f"slack {-statistic:.10g}, identity error {identity_error:.3g}, level-set mass error {mass_error:.3g}")
    report = OracleReport.check(name, statistic, 1e-9 * (1.0 + rs), detail)
    report.passed = report.passed and identity_error <= 1e-9 and mass_error <= 1e-10
    return report


def empirical_tv(samples_a, samples_b, bins=16, polar: bool = False) -> float:
    """
    Half the L1 distance of the two normalized histograms on a common grid over the joint
    bounding box. polar=True bins 2-D points by (|x|^2, angle) instead of (x1, x2).
    """
    a = np.asarray(as_tensor(samples_a), dtype=float)
    b = np.asarray(as_tensor(samples_b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("empirical_tv needs two nonempty sample sets")
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if polar:
        if a.shape[1] != 2:
            raise ValueError("polar binning is defined for d = 2")
        a, b = _to_polar(a), _to_polar(b)
    joint = np.concatenate([a, b])
    lo, hi = joint.min(0), joint.max(0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    ha, _ = np.histogramdd(a, bins=bins, range=list(zip(lo, hi)))
    hb, _ = np.histogramdd(b, bins=bins, range=list(zip(lo, hi)))
    return 0.5 * float(np.abs(ha / len(a) - hb / len(b)).sum())


def _to_polar(x):
    return np.stack([(x**2).sum(-1), np.arctan2(x[:, 1], x[:, 0])], axis=-1)


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of the samples and `cdf`."""
    samples = np.asarray(as_tensor(samples), dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("ks_statistic needs at least one sample")
    return float(kstest(samples, cdf).statistic)


def ks_two_sample(samples_a, samples_b) -> tuple[float, float]:
    """Two-sample KS statistic and p-value."""
    res = ks_2samp(np.asarray(as_tensor(samples_a)).reshape(-1), np.asarray(as_tensor(samples_b)).reshape(-1))
    return float(res.statistic), float(res.pvalue)


def ks_two_sample_threshold(n: int, m: int) -> float:
    """Two-sample KS critical value at significance 1e-3."""
    return KS_CRITICAL_1E3 * math.sqrt((n + m) / (n * m))


def detailed_balance_residual(density, pairs) -> float:
    """max |log rho(x) + log H(x, y) - log rho(y) - log H(y, x)| over the pairs (x, y)."""
    worst = 0.0
    with torch.no_grad():
        for x, y in pairs:
            left = float(density.log_density(x)) + transition_log_density(density, x, y)
            right = float(density.log_density(y)) + transition_log_density(density, y, x)
            worst = max(worst, abs(left - right))
    return worst


def kernel_normalization(density, x, n_angle: int = 32, n_radial: int = 8) -> float:
    """
    int H(x, y) dy for d = 2 in polar coordinates around x: Gauss-Legendre in the angle and
    along each ray up to the chord end. The radial Jacobian cancels the |x - y|^{-1} factor.
    """
    if density.dim != 2:
        raise ValueError("kernel normalization oracle is implemented for d = 2")
    x = as_tensor(x, 2)
    an, aw = roots_legendre(n_angle)
    rn, rw = roots_legendre(n_radial)
    total = []
    for a_node, a_weight in zip(an, aw):
        phi = math.pi * (a_node + 1.0)
        u = torch.tensor([math.cos(phi), math.sin(phi)], dtype=DTYPE)
        _, hi = density.body.chord_batch(x.unsqueeze(0), u.unsqueeze(0))
        hi = float(hi[0])
        if not math.isfinite(hi):
            raise ValueError("kernel normalization oracle needs a bounded support")
        for r_node, r_weight in zip(rn, rw):
            t = 0.5 * hi * (r_node + 1.0)
            y = x + t * u
            log_h = transition_log_density(density, x, y)
            total.append(a_weight * math.pi * r_weight * 0.5 * hi * t * math.exp(log_h))
    return math.fsum(total)
