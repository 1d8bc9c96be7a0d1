"""
Reference quadrature for d <= 3, independent of the sampling code.

A body is covered by smooth cells, each a map from the unit cube onto part of the body with
its Jacobian: boxes affinely, balls in polar or spherical coordinates and polytopes by
Delaunay simplices under the collapsed-cube map. Integrals use composite Gauss-Legendre rules
on the cube, doubling the panels per axis at every level.
"""
import logging
import math
from typing import Callable

import numpy as np
import torch
from scipy.spatial import Delaunay
from scipy.special import roots_legendre

from densities import GaussianDensity
from geometry import AbstractConvexBody, Ball, Box, FullSpace, Polytope
from har import QuadratureError
from utils import DTYPE

logger = logging.getLogger(__name__)

NODES_PER_PANEL = 8
MAX_LEVELS = 12
MAX_POINTS = 2**22
CHUNK = 2**18
GAUSSIAN_HALF_WIDTH = 8.0

Cell = Callable[[torch.Tensor], tuple[torch.Tensor, torch.Tensor]]


def _box_cell(lo, hi) -> Cell:
    width = hi - lo
    jac = float(torch.prod(width))

    def cell(u):
        return lo + u * width, torch.full(u.shape[:1], jac, dtype=DTYPE)

    return cell


def _ball_cell(center, radius) -> Cell:
    d = center.numel()

    def cell(u):
        t = u[:, 0]
        if d == 1:
            return center + radius * (2.0 * u - 1.0), torch.full(u.shape[:1], 2.0 * radius, dtype=DTYPE)
        if d == 2:
            phi = 2.0 * math.pi * u[:, 1]
            direction = torch.stack([torch.cos(phi), torch.sin(phi)], dim=-1)
            jac = 2.0 * math.pi * radius**2 * t
        else:
            theta = math.pi * u[:, 1]
            phi = 2.0 * math.pi * u[:, 2]
            direction = torch.stack([torch.sin(theta) * torch.cos(phi), torch.sin(theta) * torch.sin(phi),
                                     torch.cos(theta)], dim=-1)
            jac = 2.0 * math.pi**2 * radius**3 * t**2 * torch.sin(theta)
        return center + radius * t.unsqueeze(-1) * direction, jac

    return cell


def _simplex_cell(vertices: torch.Tensor) -> Cell:
    """Collapsed-cube map x = v0 + sum_k (u_1 ... u_k)(v_k - v_{k-1})."""
    d = vertices.shape[1]
    steps = vertices[1:] - vertices[:-1]
    det = abs(float(torch.linalg.det(vertices[1:] - vertices[0])))

    def cell(u):
        prefix = torch.cumprod(u, dim=-1)
        x = vertices[0] + prefix @ steps
        jac = torch.full(u.shape[:1], det, dtype=DTYPE)
        for k in range(d - 1):
            jac = jac * u[:, k] ** (d - 1 - k)
        return x, jac

    return cell


def body_cells(body: AbstractConvexBody, density=None) -> list[Cell]:
    """Cells covering the body; the full space is replaced by a +-8 sd box of a Gaussian density."""
    if body.dim > 3:
        raise ValueError(f"reference quadrature is limited to d <= 3, got d = {body.dim}")
    if isinstance(body, Box):
        return [_box_cell(body.lo, body.hi)]
    if isinstance(body, Ball):
        return [_ball_cell(body.center, body.radius)]
    if isinstance(body, Polytope):
        vertices = body.vertices()
        if body.dim == 1:
            return [_box_cell(vertices.min(0).values, vertices.max(0).values)]
        tri = Delaunay(vertices.numpy())
        return [_simplex_cell(vertices[torch.as_tensor(simplex)]) for simplex in tri.simplices]
    if isinstance(body, FullSpace):
        if not isinstance(density, GaussianDensity):
            raise ValueError("quadrature over the full space needs a gaussian density")
        half = GAUSSIAN_HALF_WIDTH * torch.sqrt(torch.diagonal(density.sigma))
        return [_box_cell(-half, half)]
    raise ValueError(f"no quadrature cells for body type {type(body).__name__}")


def gauss_legendre_grid(d: int, level: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Composite rule on [0, 1]^d with 2^level panels and NODES_PER_PANEL nodes per panel and axis."""
    nodes, weights = roots_legendre(NODES_PER_PANEL)
    panels = 2**level
    offsets = np.arange(panels) / panels
    axis_nodes = (offsets[:, None] + (nodes[None, :] + 1.0) / (2.0 * panels)).reshape(-1)
    axis_weights = np.tile(weights / (2.0 * panels), panels)
    grids = np.meshgrid(*([axis_nodes] * d), indexing="ij")
    wgrids = np.meshgrid(*([axis_weights] * d), indexing="ij")
    u = np.stack([g.reshape(-1) for g in grids], axis=-1)
    w = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    return torch.as_tensor(u, dtype=DTYPE), torch.as_tensor(w, dtype=DTYPE)


def _level_sums(density, fs, cells, level):
    """Per-level (log shift, [sum w f_k rho e^{-shift}]) with shift the largest log rho on the nodes."""
    u, w = gauss_legendre_grid(density.dim, level)
    logs, parts = [], []
    with torch.no_grad():
        for cell in cells:
            for start in range(0, u.shape[0], CHUNK):
                x, jac = cell(u[start:start + CHUNK])
                log_rho = density.log_density(x)
                logs.append(log_rho + torch.log(w[start:start + CHUNK] * jac))
                parts.append(torch.stack([f(x) for f in fs]) if fs else None)
    log_all = torch.cat(logs)
    shift = float(log_all[torch.isfinite(log_all)].max()) if bool(torch.isfinite(log_all).any()) else -math.inf
    if not math.isfinite(shift):
        raise QuadratureError("density vanishes on every quadrature node")
    weights = torch.exp(log_all - shift)
    sums = [math.fsum(weights.tolist())]
    if fs:
        values = torch.cat(parts, dim=1)
        sums += [math.fsum((weights * values[k]).tolist()) for k in range(len(fs))]
    return shift, sums


def _refine(density, fs, body, rtol, max_levels):
    cells = body_cells(body, density)
    previous = None
    for level in range(max_levels + 1):
        points = len(cells) * (NODES_PER_PANEL * 2**level) ** density.dim
        if points > MAX_POINTS:
            raise QuadratureError(f"quadrature did not reach rtol {rtol} within {MAX_POINTS} nodes (level {level})")
        shift, sums = _level_sums(density, fs, cells, level)
        log_den = shift + math.log(sums[0])
        ratios = [s / sums[0] for s in sums[1:]]
        if previous is not None:
            prev_log_den, prev_ratios = previous
            den_ok = abs(math.expm1(log_den - prev_log_den)) <= rtol
            ratio_ok = all(abs(a - b) <= rtol * max(abs(a), 1e-12) for a, b in zip(ratios, prev_ratios))
            if den_ok and ratio_ok:
                logger.debug(f"quadrature converged at level {level} with {points} nodes")
                return log_den, ratios
        previous = (log_den, ratios)
    raise QuadratureError(f"quadrature did not converge after {max_levels} refinement levels")


def quadrature_expectation(density, f, body: AbstractConvexBody | None = None, rtol: float = 1e-6,
                           max_levels: int = MAX_LEVELS) -> float:
    """A(f, rho) = int f rho / int rho over `body` (default: the support of rho)."""
    body = density.body if body is None else body
    _, ratios = _refine(density, [f], body, rtol, max_levels)
    return ratios[0]


def quadrature_log_integral(density, body: AbstractConvexBody | None = None, rtol: float = 1e-6,
                            max_levels: int = MAX_LEVELS) -> float:
    """log of int rho over `body` (default: the support of rho)."""
    body = density.body if body is None else body
    log_den, _ = _refine(density, [], body, rtol, max_levels)
    return log_den


def parameter_grid(body: AbstractConvexBody, per_axis: int, density=None) -> tuple[torch.Tensor, list[Cell]]:
    """Uniform grid on the unit cube (endpoints included) and the cells of the body it is mapped through."""
    axis = torch.linspace(0.0, 1.0, per_axis, dtype=DTYPE)
    u = torch.cartesian_prod(*([axis] * body.dim)).reshape(-1, body.dim)
    return u, body_cells(body, density)
