import math
from abc import ABC, abstractmethod

import torch

from geometry import AbstractConvexBody
from har.line_sampler import LineDensity, LineFamily
from utils import DTYPE, as_tensor


class AbstractDensity(ABC):
    """
    Non-normalized log-concave density rho with support body K. Subclasses provide
    log rho on K and the exact family of their line restrictions.
    """

    dim: int
    body: AbstractConvexBody
    family: LineFamily = LineFamily.generic

    def log_density(self, x):
        """log rho(x), -inf outside the support. Accepts (d,) or (n, d)."""
        x = as_tensor(x, self.dim)
        inside = self.body.contains(x)
        value = self.log_inside(x)
        if x.dim() == 1:
            return value if inside else torch.tensor(-math.inf, dtype=DTYPE)
        return torch.where(inside, value, torch.full_like(value, -math.inf))

    def restrict_to_line(self, x, u) -> LineDensity:
        """Checked restriction s -> rho(x + s u) on the chord through a single support point x."""
        chord = self.body.chord(x, u)
        x = as_tensor(x, self.dim)
        u = as_tensor(u, self.dim)
        params = {k: v[0] for k, v in self.line_params(x.unsqueeze(0), u.unsqueeze(0)).items()}
        return LineDensity(
            lo=torch.tensor(chord.lo, dtype=DTYPE),
            hi=torch.tensor(chord.hi, dtype=DTYPE),
            origin=x,
            direction=u,
            log_density=self.log_inside,
            family=self.family,
            **params,
        )

    def restrict_batch(self, x: torch.Tensor, u: torch.Tensor) -> LineDensity:
        """
        Unchecked batched restriction for points x (n, d) in the support and unit directions u (n, d).
        """
        lo, hi = self.body.chord_batch(x, u)
        lo = torch.clamp(lo, max=0.0)
        hi = torch.clamp(hi, min=0.0)
        return LineDensity(lo=lo, hi=hi, origin=x, direction=u, log_density=self.log_inside,
                           family=self.family, **self.line_params(x, u))

    def line_params(self, x: torch.Tensor, u: torch.Tensor) -> dict:
        """Family parameters (mean/sd or slope) of the restrictions along rows of x and u."""
        return {}

    def sample_exact(self, rng: torch.Generator, n: int) -> torch.Tensor:
        """n independent draws from the normalized density, where an exact sampler is available."""
        raise NotImplementedError(f"{type(self).__name__} has no exact sampler")

    @abstractmethod
    def log_inside(self, x: torch.Tensor) -> torch.Tensor:
        """
        log rho on the support, without masking; x has shape (..., d). Must be differentiable
        with torch autograd since the generic line sampler takes tangents through it.
        """
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        pass
