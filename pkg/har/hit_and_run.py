"""
The hit-and-run transition: pick a uniform direction, restrict the density to the chord
through the current point and resample the point along it.

All steps act on batches of chains x of shape (n, d); a single point (d,) is treated as a
batch of one. Randomness comes from one generator per batch, so the trajectory of a batch
is a deterministic function of (start points, stream).
"""
import logging
import math
from dataclasses import dataclass

import torch
from scipy.integrate import quad

from densities.special_functions import log_unit_sphere_area
from utils import DTYPE, as_tensor, progress_bar
from .line_sampler import sample_line
from .rng import as_generator

logger = logging.getLogger(__name__)

BOUNDARY_NUDGE = 1e-12
QUAD_EPSREL = 1e-8


class QuadratureError(RuntimeError):
    pass


@dataclass
class ChainState:
    x: torch.Tensor
    step_index: int = 0
    # single-chain transitions applied so far, summed over the batch
    kernel_steps: int = 0

    @property
    def num_chains(self) -> int:
        return 1 if self.x.dim() == 1 else self.x.shape[0]


def sample_direction(d: int, rng, n: int | None = None) -> torch.Tensor:
    """Uniform direction(s) on the unit sphere: normalized standard normal vectors."""
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    gen = as_generator(rng)
    shape = (d,) if n is None else (n, d)
    while True:
        g = torch.randn(shape, generator=gen, dtype=DTYPE)
        norm = torch.linalg.vector_norm(g, dim=-1, keepdim=True)
        if bool((norm > 0).all()):
            return g / norm


def har_step(density, x, rng, check: bool = True) -> torch.Tensor:
    """
    One hit-and-run transition for every chain in x. Landing points closer than
    BOUNDARY_NUDGE * (chord length) to a chord endpoint are moved inward by that amount.
    """
    gen = as_generator(rng)
    x = as_tensor(x, density.dim)
    single = x.dim() == 1
    xb = x.unsqueeze(0) if single else x
    if check and not bool(torch.as_tensor(density.body.contains(xb)).all()):
        raise ValueError("hit-and-run state lies outside the support")

    u = sample_direction(density.dim, gen, xb.shape[0])
    ld = density.restrict_batch(xb, u)
    alpha = sample_line(ld, gen)

    length = ld.hi - ld.lo
    tol = BOUNDARY_NUDGE * torch.where(torch.isfinite(length), length, 1.0 + alpha.abs())
    alpha = torch.where(torch.isfinite(ld.lo), torch.maximum(alpha, ld.lo + tol), alpha)
    alpha = torch.where(torch.isfinite(ld.hi), torch.minimum(alpha, ld.hi - tol), alpha)
    alpha = torch.where(length > 2.0 * tol, alpha, 0.5 * (ld.lo + ld.hi))

    y = xb + alpha.unsqueeze(-1) * u
    return y[0] if single else y


def run_chain(density, x0, n0: int, rng, log_every: int = 0) -> ChainState:
    """
    Apply n0 hit-and-run steps to x0 (a point or a batch of points). n0 = 0 returns x0.
    """
    if n0 < 0:
        raise ValueError(f"step count must be nonnegative, got {n0}")
    gen = as_generator(rng)
    x = as_tensor(x0, density.dim)
    state = ChainState(x=x.clone())
    if not bool(torch.as_tensor(density.body.contains(x)).all()):
        raise ValueError("initial state lies outside the support")
    for k in range(n0):
        state.x = har_step(density, state.x, gen, check=False)
        state.step_index += 1
        state.kernel_steps += state.num_chains
        if log_every and (k + 1) % log_every == 0:
            logger.debug(f"chain {progress_bar(k + 1, n0)}")
    return state


def line_integral(density, x, u, lo: float, hi: float, log_shift: float) -> float:
    """
    exp(-log_shift) times the integral of rho(x + s u) over [lo, hi], by adaptive quadrature.
    """

    def integrand(s):
        p = x + s * u
        with torch.no_grad():
            return math.exp(float(density.log_inside(p)) - log_shift)

    out = quad(integrand, lo, hi, epsrel=QUAD_EPSREL, epsabs=0.0, limit=200, full_output=1)
    if len(out) > 3:
        raise QuadratureError(f"line integral did not converge: {out[3]}")
    return out[0]


def transition_log_density(density, x, y) -> float:
    """
    log of the hit-and-run kernel density at y from x,

        (2 / |S^{d-1}|) * rho(y) / (l(x, y) * |x - y|^{d-1}),

    with l(x, y) the integral of rho over the chord through x and y in arc length.
    Validation only: every call runs an adaptive quadrature.
    """
    x = as_tensor(x, density.dim)
    y = as_tensor(y, density.dim)
    dist = float(torch.linalg.vector_norm(y - x))
    if dist == 0.0:
        raise ValueError("transition density is undefined for x = y")
    if not (density.body.contains(x) and density.body.contains(y)):
        raise ValueError("both points must lie in the support")
    u = (y - x) / dist
    lo, hi = density.body.chord_batch(x.unsqueeze(0), u.unsqueeze(0))
    lo, hi = min(float(lo[0]), 0.0), max(float(hi[0]), dist)
    with torch.no_grad():
        log_x = float(density.log_inside(x))
        log_y = float(density.log_inside(y))
    shift = max(log_x, log_y)
    ell = line_integral(density, x, u, lo, hi, shift)
    d = density.dim
    return (math.log(2.0) - log_unit_sphere_area(d) + log_y - shift - math.log(ell)
            - (d - 1) * math.log(dist))
