import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import torch

from utils import as_tensor


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def __contains__(self, alpha: float) -> bool:
        return self.lo <= alpha <= self.hi

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)


class AbstractConvexBody(ABC):
    dim: int
    bounded: bool = True
    # relative tolerance used for closed-set membership
    boundary_tol: float = 1e-12
    # direction components below this are treated as parallel to a face
    parallel_tol: float = 1e-14

    def contains(self, x):
        """
        True iff x lies in the closed body. x is a point of shape (d,) (returns a bool)
        or a batch of shape (n, d) (returns a bool tensor of shape (n,)).
        """
        x = as_tensor(x, self.dim)
        scale = 1.0 + torch.linalg.vector_norm(x, dim=-1)
        inside = self.violation(x) <= self.boundary_tol * scale * self.violation_scale()
        if x.dim() == 1:
            return bool(inside)
        return inside

    def chord(self, x, u) -> Interval:
        """
        Closure of {alpha : x + alpha * u in K} for a single point x of the body and a unit direction u.
        """
        x = as_tensor(x, self.dim)
        u = as_tensor(u, self.dim)
        if x.dim() != 1 or u.dim() != 1:
            raise ValueError("chord expects a single point and a single direction, use chord_batch for batches")
        norm = float(torch.linalg.vector_norm(u))
        if norm == 0.0:
            raise ValueError("zero direction vector")
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must have unit norm, got |u| = {norm}")
        if not self.contains(x):
            raise ValueError(f"point {x.tolist()} lies outside the body")
        lo, hi = self.chord_batch(x.unsqueeze(0), u.unsqueeze(0))
        return Interval(min(float(lo[0]), 0.0), max(float(hi[0]), 0.0))

    def violation_scale(self) -> float:
        return 1.0

    @abstractmethod
    def violation(self, x: torch.Tensor) -> torch.Tensor:
        """
        Signed constraint violation of points x (..., d); nonpositive inside the body.
        """
        pass

    @abstractmethod
    def chord_batch(self, x: torch.Tensor, u: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """
        Unchecked batched chord. x and u have shape (n, d); returns (lo, hi) of shape (n,).
        Lines that miss the body give lo > hi. Points need not lie in the body.
        """
        pass

    @abstractmethod
    def circumradius(self) -> float:
        pass

    @abstractmethod
    def bounding_box(self) -> tuple[torch.Tensor, torch.Tensor]:
        pass

    @abstractmethod
    def sample_uniform(self, rng: torch.Generator, n: int) -> torch.Tensor:
        """
        n independent uniform draws on the body, shape (n, d).
        """
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        pass
