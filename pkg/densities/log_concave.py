import logging
import math
from typing import Callable

import torch

from geometry import AbstractConvexBody, FullSpace, body_from_dict
from har.line_sampler import LineFamily
from utils import DTYPE, as_tensor
from .abstract_density import AbstractDensity
from .expression import compile_expression

logger = logging.getLogger(__name__)

MAX_EXACT_ROUNDS = 10**4


class GaussianDensity(AbstractDensity):
    """
    rho(x) = exp(-x^T Sigma^{-1} x / 2) with Sigma = factor factor^T, optionally truncated to a body.
    """

    family = LineFamily.gaussian1d

    def __init__(self, factor, body: AbstractConvexBody | None = None):
        self.factor = torch.tril(as_tensor(factor))
        if self.factor.dim() != 2 or self.factor.shape[0] != self.factor.shape[1]:
            raise ValueError(f"gaussian factor must be a square matrix, got shape {tuple(self.factor.shape)}")
        if not bool((torch.diagonal(self.factor) > 0).all()):
            raise ValueError("gaussian factor needs a strictly positive diagonal (Sigma positive definite)")
        self.dim = self.factor.shape[0]
        self.body = FullSpace(self.dim) if body is None else body
        if self.body.dim != self.dim:
            raise ValueError(f"dimension mismatch: factor is {self.dim}-dimensional, body is {self.body.dim}")

    @classmethod
    def from_covariance(cls, sigma, body: AbstractConvexBody | None = None):
        sigma = as_tensor(sigma)
        if sigma.dim() != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"covariance must be a square matrix, got shape {tuple(sigma.shape)}")
        if not torch.allclose(sigma, sigma.T, rtol=1e-12, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        factor, info = torch.linalg.cholesky_ex(sigma)
        if int(info) != 0:
            raise ValueError("covariance is not positive definite")
        return cls(factor, body)

    @property
    def sigma(self) -> torch.Tensor:
        return self.factor @ self.factor.T

    def whiten(self, x: torch.Tensor) -> torch.Tensor:
        """factor^{-1} x along the last axis."""
        flat = x.reshape(-1, self.dim).T
        out = torch.linalg.solve_triangular(self.factor, flat, upper=False)
        return out.T.reshape(x.shape)

    def log_inside(self, x):
        z = self.whiten(x)
        return -0.5 * (z * z).sum(-1)

    def line_params(self, x, u):
        w = self.whiten(u)
        v = self.whiten(x)
        precision = (w * w).sum(-1)
        return {"mean": -(w * v).sum(-1) / precision, "sd": 1.0 / torch.sqrt(precision)}

    def sample_exact(self, rng, n):
        out = torch.empty(n, self.dim, dtype=DTYPE)
        pending = torch.arange(n)
        for _ in range(MAX_EXACT_ROUNDS):
            if pending.numel() == 0:
                return out
            cand = torch.randn(pending.numel(), self.dim, generator=rng, dtype=DTYPE) @ self.factor.T
            ok = self.body.contains(cand)
            out[pending[ok]] = cand[ok]
            pending = pending[~ok]
        raise ValueError("truncation body carries too little gaussian mass for rejection sampling")

    def to_dict(self):
        d = {"type": "gaussian", "factor": self.factor.tolist()}
        if not isinstance(self.body, FullSpace):
            d["body"] = self.body.to_dict()
        return d


class UniformDensity(AbstractDensity):
    family = LineFamily.uniform

    def __init__(self, body: AbstractConvexBody):
        if not body.bounded:
            raise ValueError("uniform density needs a bounded body")
        self.body = body
        self.dim = body.dim

    def log_inside(self, x):
        return (x * 0.0).sum(-1)

    def sample_exact(self, rng, n):
        return self.body.sample_uniform(rng, n)

    def to_dict(self):
        return {"type": "uniform", "body": self.body.to_dict()}


class LinearTiltDensity(AbstractDensity):
    """rho(x) = exp(-a . x) on a bounded body."""

    family = LineFamily.exponential1d

    def __init__(self, a, body: AbstractConvexBody):
        self.a = as_tensor(a, body.dim).reshape(-1)
        if not body.bounded:
            raise ValueError("linear tilt density needs a bounded body")
        self.body = body
        self.dim = body.dim

    def log_inside(self, x):
        return -(x * self.a).sum(-1)

    def line_params(self, x, u):
        return {"slope": -(u * self.a).sum(-1)}

    def sample_exact(self, rng, n):
        # rejection from the uniform law on the body, envelope at the smallest a.x over the bounding box
        lo, hi = self.body.bounding_box()
        log_top = float(-torch.minimum(self.a * lo, self.a * hi).sum())
        out = torch.empty(n, self.dim, dtype=DTYPE)
        pending = torch.arange(n)
        for _ in range(MAX_EXACT_ROUNDS):
            if pending.numel() == 0:
                return out
            cand = self.body.sample_uniform(rng, pending.numel())
            u = torch.rand(pending.numel(), generator=rng, dtype=DTYPE)
            ok = torch.log(u) <= self.log_inside(cand) - log_top
            out[pending[ok]] = cand[ok]
            pending = pending[~ok]
        raise ValueError("tilt too steep for rejection sampling from the uniform law")

    def to_dict(self):
        return {"type": "linear_tilt", "a": self.a.tolist(), "body": self.body.to_dict()}


class BlackboxDensity(AbstractDensity):
    """
    User-supplied concave log-density on a body with analytic chords. Concavity is the caller's
    claim; check_log_concavity spot checks it and the line sampler rejects violations it meets.
    """

    def __init__(self, log_rho: Callable[[torch.Tensor], torch.Tensor], body: AbstractConvexBody,
                 expression: str | None = None):
        self.log_rho = log_rho
        self.body = body
        self.dim = body.dim
        self.expression = expression

    @classmethod
    def from_expression(cls, text: str, body: AbstractConvexBody):
        return cls(compile_expression(text, body.dim), body, expression=text)

    def log_inside(self, x):
        return self.log_rho(x)

    def to_dict(self):
        if self.expression is None:
            raise ValueError("only expression-defined blackbox densities can be serialized")
        return {"type": "blackbox", "expression": self.expression, "body": self.body.to_dict()}


def log_density(density: AbstractDensity, x):
    return density.log_density(x)


def restrict_to_line(density: AbstractDensity, x, u):
    return density.restrict_to_line(x, u)


def check_log_concavity(density: AbstractDensity, rng: torch.Generator, n_pairs: int = 10000,
                        scale: float = 3.0) -> float:
    """
    Largest violation of log rho(t x + (1-t) y) >= t log rho(x) + (1-t) log rho(y) over random
    pairs of support points. Unbounded supports draw pairs from a normal of width `scale`.
    """
    if density.body.bounded:
        x = density.body.sample_uniform(rng, n_pairs)
        y = density.body.sample_uniform(rng, n_pairs)
    else:
        x = scale * torch.randn(n_pairs, density.dim, generator=rng, dtype=DTYPE)
        y = scale * torch.randn(n_pairs, density.dim, generator=rng, dtype=DTYPE)
    t = torch.rand(n_pairs, 1, generator=rng, dtype=DTYPE)
    with torch.no_grad():
        mid = density.log_inside(t * x + (1.0 - t) * y)
        chord = t[:, 0] * density.log_inside(x) + (1.0 - t[:, 0]) * density.log_inside(y)
    violation = float((chord - mid).max())
    if violation > 1e-9:
        logger.warning(f"log-concavity midpoint test violated by {violation:.3e}")
    return max(violation, 0.0)


def density_from_dict(desc: dict) -> AbstractDensity:
    kind = desc.get("type")
    body = body_from_dict(desc["body"]) if "body" in desc else None
    if kind == "gaussian":
        if "factor" in desc:
            return GaussianDensity(desc["factor"], body)
        if "sigma" in desc:
            return GaussianDensity.from_covariance(desc["sigma"], body)
        raise ValueError("gaussian density needs a 'sigma' or a 'factor' matrix")
    if body is None:
        raise ValueError(f"{kind} density needs a 'body' descriptor")
    if kind == "uniform":
        return UniformDensity(body)
    elif kind == "linear_tilt":
        return LinearTiltDensity(desc["a"], body)
    elif kind == "blackbox":
        return BlackboxDensity.from_expression(desc["expression"], body)
    raise ValueError(f"unknown density type {kind!r}, expected gaussian, uniform, linear_tilt or blackbox")
