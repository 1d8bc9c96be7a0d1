import itertools
import logging
import math

import numpy as np
import torch
from scipy.optimize import linprog

from utils import DTYPE, as_tensor
from .abstract_body import AbstractConvexBody

logger = logging.getLogger(__name__)

# proposals in a row without an acceptance before G is declared ill-conditioned
MAX_REJECTION_PROPOSALS = 10**6


def _empty_to(lo, hi, empty):
    lo = torch.where(empty, torch.full_like(lo, math.inf), lo)
    hi = torch.where(empty, torch.full_like(hi, -math.inf), hi)
    return lo, hi


class Ball(AbstractConvexBody):
    def __init__(self, center, radius: float):
        self.center = as_tensor(center).reshape(-1)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {radius}")
        self.dim = self.center.numel()

    def violation(self, x):
        return torch.linalg.vector_norm(x - self.center, dim=-1) - self.radius

    def violation_scale(self):
        return max(self.radius, 1.0)

    def chord_batch(self, x, u):
        # roots of |w + alpha u|^2 = r^2 via the cancellation-free quadratic formula
        w = x - self.center
        a = (u * u).sum(-1)
        b = (w * u).sum(-1)
        c = (w * w).sum(-1) - self.radius**2
        disc = b * b - a * c
        s = torch.sqrt(torch.clamp(disc, min=0.0))
        q = -(b + torch.copysign(s, b))
        r1 = q / a
        r2 = torch.where(q != 0, c / torch.where(q != 0, q, torch.ones_like(q)), torch.zeros_like(q))
        lo, hi = torch.minimum(r1, r2), torch.maximum(r1, r2)
        return _empty_to(lo, hi, disc < 0)

    def circumradius(self):
        return float(torch.linalg.vector_norm(self.center)) + self.radius

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def sample_uniform(self, rng, n):
        direction = torch.randn(n, self.dim, generator=rng, dtype=DTYPE)
        direction = direction / torch.linalg.vector_norm(direction, dim=-1, keepdim=True)
        radius = self.radius * torch.rand(n, 1, generator=rng, dtype=DTYPE) ** (1.0 / self.dim)
        return self.center + radius * direction

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class Box(AbstractConvexBody):
    def __init__(self, lo, hi):
        self.lo = as_tensor(lo).reshape(-1)
        self.hi = as_tensor(hi).reshape(-1)
        if self.lo.shape != self.hi.shape:
            raise ValueError("box corners must have the same dimension")
        if not bool((self.lo < self.hi).all()):
            raise ValueError(f"box needs lo_i < hi_i on every axis, got lo={self.lo.tolist()} hi={self.hi.tolist()}")
        self.dim = self.lo.numel()

    def violation(self, x):
        return torch.maximum(self.lo - x, x - self.hi).max(-1).values

    def violation_scale(self):
        return max(float((self.hi - self.lo).max()), 1.0)

    def chord_batch(self, x, u):
        active = u.abs() > self.parallel_tol
        safe_u = torch.where(active, u, torch.ones_like(u))
        t1 = (self.lo - x) / safe_u
        t2 = (self.hi - x) / safe_u
        t_min = torch.where(active, torch.minimum(t1, t2), torch.full_like(t1, -math.inf))
        t_max = torch.where(active, torch.maximum(t1, t2), torch.full_like(t1, math.inf))
        # a slab parallel to the line either contains it entirely or misses it
        outside = (~active) & ((x < self.lo) | (x > self.hi))
        lo = t_min.max(-1).values
        hi = t_max.min(-1).values
        return _empty_to(lo, hi, outside.any(-1))

    def circumradius(self):
        return float(torch.sqrt(torch.maximum(self.lo**2, self.hi**2).sum()))

    def bounding_box(self):
        return self.lo.clone(), self.hi.clone()

    def sample_uniform(self, rng, n):
        return self.lo + (self.hi - self.lo) * torch.rand(n, self.dim, generator=rng, dtype=DTYPE)

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Polytope(AbstractConvexBody):
    """
    Bounded polytope {x : A x <= b}. Construction checks boundedness and a nonempty
    interior with linear programs and keeps the Chebyshev center as interior point.
    """

    def __init__(self, A, b, radius_bound: float | None = None):
        self.A = as_tensor(A)
        self.b = as_tensor(b).reshape(-1)
        if self.A.dim() != 2 or self.A.shape[0] != self.b.numel():
            raise ValueError("polytope needs a matrix A of shape (m, d) and offsets b of shape (m,)")
        self.dim = self.A.shape[1]
        self.radius_bound = radius_bound
        self.row_norms = torch.linalg.vector_norm(self.A, dim=-1)
        if bool((self.row_norms == 0).any()):
            raise ValueError("polytope rows must be nonzero")
        self.interior_point, self.inradius = self._chebyshev_center()
        self._bbox = self._lp_bounding_box()
        self._vertices = None

    def _chebyshev_center(self):
        A = self.A.numpy()
        b = self.b.numpy()
        norms = self.row_norms.numpy()
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        A_ub = np.hstack([A, norms[:, None]])
        bounds = [(None, None)] * self.dim + [(0, None)]
        res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
        if res.status == 3:
            # unbounded inradius means an unbounded polytope
            raise ValueError("polytope is unbounded")
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise ValueError("polytope has empty interior")
        return torch.as_tensor(res.x[:-1], dtype=DTYPE), float(res.x[-1])

    def _lp_bounding_box(self):
        A = self.A.numpy()
        b = self.b.numpy()
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for j in range(self.dim):
            for sign, out in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(self.dim)
                c[j] = sign
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * self.dim, method="highs")
                if res.status != 0:
                    raise ValueError("polytope is unbounded")
                out[j] = res.x[j]
        return torch.as_tensor(lo, dtype=DTYPE), torch.as_tensor(hi, dtype=DTYPE)

    def violation(self, x):
        return ((x @ self.A.T - self.b) / self.row_norms).max(-1).values

    def chord_batch(self, x, u):
        slack = self.b - x @ self.A.T
        au = u @ self.A.T
        safe_au = torch.where(au.abs() > self.parallel_tol, au, torch.ones_like(au))
        ratio = slack / safe_au
        upper = torch.where(au > self.parallel_tol, ratio, torch.full_like(ratio, math.inf))
        lower = torch.where(au < -self.parallel_tol, ratio, torch.full_like(ratio, -math.inf))
        infeasible = (au.abs() <= self.parallel_tol) & (slack < 0)
        return _empty_to(lower.max(-1).values, upper.min(-1).values, infeasible.any(-1))

    def vertices(self) -> torch.Tensor:
        """
        Vertex enumeration over all d-subsets of constraints; intended for d <= 3.
        """
        if self._vertices is None:
            A, b = self.A, self.b
            found = []
            for rows in itertools.combinations(range(A.shape[0]), self.dim):
                sub = A[list(rows)]
                if abs(float(torch.linalg.det(sub))) < 1e-12:
                    continue
                v = torch.linalg.solve(sub, b[list(rows)])
                if float(self.violation(v)) <= 1e-9 * (1.0 + float(torch.linalg.vector_norm(v))):
                    if not any(float(torch.linalg.vector_norm(v - w)) < 1e-9 for w in found):
                        found.append(v)
            self._vertices = torch.stack(found)
        return self._vertices

    def circumradius(self):
        if self.dim <= 3:
            return float(torch.linalg.vector_norm(self.vertices(), dim=-1).max())
        if self.radius_bound is None:
            raise ValueError("polytope circumradius in d > 3 needs a user-supplied radius_bound")
        return float(self.radius_bound)

    def bounding_box(self):
        return self._bbox[0].clone(), self._bbox[1].clone()

    def sample_uniform(self, rng, n):
        lo, hi = self._bbox
        out = torch.empty(n, self.dim, dtype=DTYPE)
        pending = torch.arange(n)
        proposals = 0
        misses = 0
        while pending.numel() > 0:
            if misses > MAX_REJECTION_PROPOSALS:
                raise ValueError(
                    f"rejection sampling exceeded {MAX_REJECTION_PROPOSALS} proposals without an acceptance, "
                    f"G is ill-conditioned")
            cand = lo + (hi - lo) * torch.rand(pending.numel(), self.dim, generator=rng, dtype=DTYPE)
            proposals += pending.numel()
            ok = self.violation(cand) <= 0
            misses = 0 if bool(ok.any()) else misses + pending.numel()
            out[pending[ok]] = cand[ok]
            pending = pending[~ok]
        logger.debug(f"polytope rejection sampling: acceptance rate {n / max(proposals, 1):.4f}")
        return out

    def to_dict(self):
        d = {"type": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}
        if self.radius_bound is not None:
            d["radius_bound"] = self.radius_bound
        return d


class FullSpace(AbstractConvexBody):
    bounded = False

    def __init__(self, dim: int):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError(f"dimension must be at least 1, got {dim}")

    def violation(self, x):
        finite = torch.isfinite(x).all(-1)
        return torch.where(finite, torch.full(x.shape[:-1], -math.inf, dtype=DTYPE),
                           torch.full(x.shape[:-1], math.inf, dtype=DTYPE))

    def chord_batch(self, x, u):
        n = x.shape[0]
        return torch.full((n,), -math.inf, dtype=DTYPE), torch.full((n,), math.inf, dtype=DTYPE)

    def circumradius(self):
        raise ValueError("the full space has no circumradius")

    def bounding_box(self):
        raise ValueError("the full space has no bounding box")

    def sample_uniform(self, rng, n):
        raise ValueError("cannot sample uniformly on the full space")

    def to_dict(self):
        return {"type": "fullspace", "dim": self.dim}


def body_from_dict(desc: dict) -> AbstractConvexBody:
    kind = desc.get("type")
    if kind == "ball":
        return Ball(desc["center"], desc["radius"])
    elif kind == "box":
        return Box(desc["lo"], desc["hi"])
    elif kind == "polytope":
        return Polytope(desc["A"], desc["b"], desc.get("radius_bound"))
    elif kind == "fullspace":
        return FullSpace(desc["dim"])
    raise ValueError(f"unknown body type {kind!r}, expected ball, box, polytope or fullspace")
