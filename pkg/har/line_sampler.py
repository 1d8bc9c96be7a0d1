"""
Sampling from one-dimensional log-concave densities on an interval, the chord
densities of a hit-and-run step.

Exact families (uniform, truncated Gaussian, truncated exponential) are sampled by
inversion; anything else goes through adaptive rejection sampling with a
piecewise-exponential upper hull built from tangents of the log-density.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
import torch

from utils import DTYPE
from .rng import as_generator

logger = logging.getLogger(__name__)

MAX_HULL_POINTS = 64
FAR_TAIL_SD = 6.0
MAX_DOUBLINGS = 200


class InvalidDensityError(ValueError):
    pass


class LineFamily(Enum):
    gaussian1d = "gaussian1d"
    uniform = "uniform"
    exponential1d = "exponential1d"
    generic = "generic"


@dataclass(frozen=True)
class LineDensity:
    """
    Restriction s -> rho(origin + s * direction) of a density to a line, on the domain [lo, hi].
    Tensors carry a leading batch dimension when several lines are restricted at once.
    """

    lo: torch.Tensor
    hi: torch.Tensor
    origin: torch.Tensor
    direction: torch.Tensor
    log_density: Callable[[torch.Tensor], torch.Tensor]
    family: LineFamily = LineFamily.generic
    mean: torch.Tensor | None = None
    sd: torch.Tensor | None = None
    slope: torch.Tensor | None = None

    @classmethod
    def from_function(cls, lo, hi, log_g, family=LineFamily.generic, **params):
        """Single line density on [lo, hi] given directly by its log-density s -> log g(s)."""
        params = {k: torch.as_tensor(v, dtype=DTYPE) for k, v in params.items()}
        return cls(
            lo=torch.as_tensor(lo, dtype=DTYPE),
            hi=torch.as_tensor(hi, dtype=DTYPE),
            origin=torch.zeros(1, dtype=DTYPE),
            direction=torch.ones(1, dtype=DTYPE),
            log_density=lambda p: log_g(p[..., 0]),
            family=family,
            **params,
        )

    @property
    def batched(self) -> bool:
        return self.lo.dim() > 0

    def log_eval(self, s: torch.Tensor) -> torch.Tensor:
        return self.log_density(self.origin + s.unsqueeze(-1) * self.direction)

    def select(self, i: int) -> "LineDensity":
        pick = lambda t: None if t is None else t[i]
        return replace(self, lo=self.lo[i], hi=self.hi[i], origin=self.origin[i], direction=self.direction[i],
                       mean=pick(self.mean), sd=pick(self.sd), slope=pick(self.slope))

    def __len__(self):
        return self.lo.shape[0] if self.batched else 1


def sample_line(ld: LineDensity, rng, size: int | None = None) -> torch.Tensor:
    """
    Draw from the normalized line density. Batched lines give one draw per line;
    a single line gives a scalar, or `size` draws sharing one rejection hull.
    """
    gen = as_generator(rng)
    if ld.batched and size is not None:
        raise ValueError("size is only supported for a single line density")
    if ld.batched:
        lo, hi = ld.lo, ld.hi
    else:
        shape = () if size is None else (size,)
        lo, hi = ld.lo.expand(shape), ld.hi.expand(shape)
    if bool((lo > hi).any()):
        raise ValueError("empty line domain")

    if ld.family == LineFamily.uniform:
        if not bool(torch.isfinite(lo).all() and torch.isfinite(hi).all()):
            raise ValueError("uniform line density needs a bounded domain")
        out = lo + (hi - lo) * torch.rand(lo.shape, generator=gen, dtype=DTYPE)
    elif ld.family == LineFamily.gaussian1d:
        out = truncated_normal(ld.mean.expand(lo.shape), ld.sd.expand(lo.shape), lo, hi, gen)
    elif ld.family == LineFamily.exponential1d:
        out = truncated_exponential(ld.slope.expand(lo.shape), lo, hi, gen)
    else:
        if ld.batched:
            out = torch.stack([AdaptiveRejectionSampler(ld.select(i)).sample(gen) for i in range(len(ld))])
        else:
            sampler = AdaptiveRejectionSampler(ld)
            out = torch.stack([sampler.sample(gen) for _ in range(1 if size is None else size)])
            out = out.reshape(lo.shape)
    out = torch.minimum(torch.maximum(out, lo), hi)
    return torch.where(lo == hi, lo, out)


def truncated_exponential(slope, lo, hi, gen):
    """Inversion for the density proportional to exp(slope * s) on [lo, hi]."""
    u = 1.0 - torch.rand(lo.shape, generator=gen, dtype=DTYPE)
    width = hi - lo
    rising_open = ((slope > 0) & torch.isinf(hi)) | ((slope < 0) & torch.isinf(lo))
    flat = (slope.abs() * width < 1e-12) | (slope == 0)
    if bool(rising_open.any()) or bool((flat & torch.isinf(width)).any()):
        raise ValueError("exponential line density is not integrable on its domain")
    safe = torch.where(flat, torch.ones_like(slope), slope)
    up = hi + torch.log(u + (1.0 - u) * torch.exp(-safe * width)) / safe
    down = lo + torch.log(u + (1.0 - u) * torch.exp(safe * width)) / safe
    out = torch.where(slope > 0, up, down)
    uniform = lo + torch.where(torch.isfinite(width), width, torch.zeros_like(width)) * (1.0 - u)
    return torch.where(flat, uniform, out)


def truncated_normal(mean, sd, lo, hi, gen):
    """
    Normal(mean, sd^2) conditioned on [lo, hi]. Intervals right of the mean are mirrored to the
    left tail where the normal CDF keeps full relative precision; intervals lying at least
    FAR_TAIL_SD standard deviations out use exponential-proposal rejection instead.
    """
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    flip = a > 0
    a, b = torch.where(flip, -b, a), torch.where(flip, -a, b)

    pa = torch.special.ndtr(a)
    pb = torch.special.ndtr(b)
    u = torch.rand(a.shape, generator=gen, dtype=DTYPE)
    z = torch.special.ndtri(pa + u * (pb - pa))
    z = torch.minimum(torch.maximum(z, a), b)

    far = b <= -FAR_TAIL_SD
    if bool(far.any()):
        z = z.clone()
        z[far] = -_normal_tail(-b[far], -a[far], gen)
    z = torch.where(flip, -z, z)
    return mean + sd * z


def _normal_tail(alpha, beta, gen):
    # standard normal on [alpha, beta] with alpha >= FAR_TAIL_SD, vectorized rejection
    out = torch.empty_like(alpha)
    rate = 0.5 * (alpha + torch.sqrt(alpha * alpha + 4.0))
    narrow = (beta - alpha) < 1.0 / rate
    pending = torch.arange(alpha.numel())
    while pending.numel() > 0:
        al, be, lam, nar = alpha[pending], beta[pending], rate[pending], narrow[pending]
        u1 = 1.0 - torch.rand(al.shape, generator=gen, dtype=DTYPE)
        u2 = torch.rand(al.shape, generator=gen, dtype=DTYPE)
        width = torch.where(nar, be - al, torch.zeros_like(al))
        z_exp = al - torch.log(u1) / lam
        z_uni = al + width * (1.0 - u1)
        z = torch.where(nar, z_uni, z_exp)
        log_accept = torch.where(nar, -0.5 * (z * z - al * al), -0.5 * (z - lam) ** 2)
        ok = (torch.log(u2) <= log_accept) & (z <= be)
        out[pending[ok]] = z[ok]
        pending = pending[~ok]
    return out


class Envelope:
    """
    Piecewise-exponential upper hull (tangents) and squeeze (chords) of a concave
    log-density on [z0, zk].
    """

    def __init__(self, x, h, dh, z0, zk):
        self.x = np.asarray(x, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.dh = np.asarray(dh, dtype=float)
        self.z0 = z0
        self.zk = zk
        self._check_concave()
        self._update()

    def _check_concave(self):
        tol = 1e-9 * (1.0 + np.abs(self.dh[:-1]) + np.abs(self.dh[1:]))
        if np.any(self.dh[1:] > self.dh[:-1] + tol):
            raise InvalidDensityError("log-density slopes increase: the line density is not log-concave")

    def _update(self):
        x, h, dh = self.x, self.h, self.dh
        denom = dh[:-1] - dh[1:]
        parallel = np.abs(denom) <= 1e-12 * (1.0 + np.abs(dh[:-1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (h[1:] - h[:-1] + x[:-1] * dh[:-1] - x[1:] * dh[1:]) / np.where(parallel, 1.0, denom)
        z = np.where(parallel, 0.5 * (x[:-1] + x[1:]), z)
        z = np.clip(z, x[:-1], x[1:])
        self.z = np.concatenate(([self.z0], z, [self.zk]))
        self.log_m = self._log_masses()
        top = np.max(self.log_m)
        self.cdf = np.cumsum(np.exp(self.log_m - top))
        self.cdf /= self.cdf[-1]

    def _log_masses(self):
        zl, zr = self.z[:-1], self.z[1:]
        slope = self.dh
        with np.errstate(invalid="ignore", over="ignore"):
            vl = np.where(np.isinf(zl), np.where(slope > 0, -np.inf, np.inf), self.h + slope * (zl - self.x))
            vr = np.where(np.isinf(zr), np.where(slope < 0, -np.inf, np.inf), self.h + slope * (zr - self.x))
            vl = np.where(np.isinf(zl) & (slope == 0), np.inf, vl)
            vr = np.where(np.isinf(zr) & (slope == 0), np.inf, vr)
        if np.any(np.isposinf(vl)) or np.any(np.isposinf(vr)):
            raise InvalidDensityError("upper hull is not integrable on the unbounded domain")
        width = zr - zl
        a = np.abs(slope)
        out = np.empty_like(self.h)
        for j in range(len(out)):
            if a[j] * width[j] < 1e-12:
                out[j] = vl[j] + math.log(width[j]) if width[j] > 0 else -math.inf
            else:
                out[j] = max(vl[j], vr[j]) + math.log(-math.expm1(-a[j] * width[j])) - math.log(a[j])
        return out

    def upper(self, s):
        j = int(np.searchsorted(self.z[1:-1], s))
        return self.h[j] + self.dh[j] * (s - self.x[j])

    def lower(self, s):
        x = self.x
        if s < x[0] or s > x[-1]:
            return -math.inf
        j = min(int(np.searchsorted(x, s, side="right")) - 1, len(x) - 2)
        if j < 0:
            return -math.inf
        return ((x[j + 1] - s) * self.h[j] + (s - x[j]) * self.h[j + 1]) / (x[j + 1] - x[j])

    def insert(self, s, h, dh):
        j = int(np.searchsorted(self.x, s))
        self.x = np.insert(self.x, j, s)
        self.h = np.insert(self.h, j, h)
        self.dh = np.insert(self.dh, j, dh)
        self._check_concave()
        self._update()

    def sample(self, u1, u2):
        j = min(int(np.searchsorted(self.cdf, u1)), len(self.cdf) - 1)
        zl, zr = self.z[j], self.z[j + 1]
        c = self.dh[j]
        width = zr - zl
        flat = abs(c) * width < 1e-12 if math.isfinite(width) else c == 0
        if flat:
            return zl + width * u2
        if c > 0:
            return zr + math.log(u2 + (1.0 - u2) * math.exp(-c * width)) / c
        return zl + math.log(u2 + (1.0 - u2) * math.exp(c * width)) / c

    def __len__(self):
        return len(self.x)


class AdaptiveRejectionSampler:
    """
    Adaptive rejection sampling for a single line density. Tangent slopes come from
    torch autograd through the line's log-eval.
    """

    def __init__(self, ld: LineDensity, max_points: int = MAX_HULL_POINTS):
        if ld.batched:
            raise ValueError("adaptive rejection sampling works on one line at a time")
        self.ld = ld
        self.max_points = max_points
        self.proposals = 0
        self.accepted = 0
        self.lo = float(ld.lo)
        self.hi = float(ld.hi)
        self.envelope = None if self.lo == self.hi else self._initial_envelope()

    def log_and_slope(self, s: float) -> tuple[float, float]:
        t = torch.tensor(s, dtype=DTYPE, requires_grad=True)
        h = self.ld.log_eval(t)
        if not bool(torch.isfinite(h)):
            raise InvalidDensityError(f"log-density is not finite at interior abscissa {s}")
        if not h.requires_grad:
            # log-eval does not depend on s
            return float(h), 0.0
        (g,) = torch.autograd.grad(h, t, allow_unused=True)
        return float(h.detach()), 0.0 if g is None else float(g)

    def _initial_envelope(self):
        lo, hi = self.lo, self.hi
        if math.isfinite(lo) and math.isfinite(hi):
            mid, quarter = 0.5 * (lo + hi), 0.25 * (hi - lo)
            xs = [mid - quarter, mid, mid + quarter]
        else:
            if lo < 0.0 < hi:
                c = 0.0
            elif math.isfinite(lo):
                c = lo + 1.0
            else:
                c = hi - 1.0
            left = self._push_out(c, -1.0) if math.isinf(lo) else lo + 0.5 * (c - lo)
            right = self._push_out(c, 1.0) if math.isinf(hi) else c + 0.5 * (hi - c)
            xs = [left, c, right]
        evaluated = [self.log_and_slope(s) for s in xs]
        return Envelope(xs, [e[0] for e in evaluated], [e[1] for e in evaluated], lo, hi)

    def _push_out(self, c, sign):
        # double the offset until the slope points back towards c
        step = 1.0
        for _ in range(MAX_DOUBLINGS):
            s = c + sign * step
            _, dh = self.log_and_slope(s)
            if sign * dh < 0:
                return s
            step *= 2.0
        raise InvalidDensityError("log-density does not decrease in an unbounded tail")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / max(self.proposals, 1)

    def sample(self, gen: torch.Generator, max_iter: int = 100000) -> torch.Tensor:
        if self.envelope is None:
            return torch.tensor(self.lo, dtype=DTYPE)
        env = self.envelope
        for _ in range(max_iter):
            u = torch.rand(3, generator=gen, dtype=DTYPE).tolist()
            s = env.sample(u[0], u[1])
            self.proposals += 1
            up = env.upper(s)
            if u[2] <= math.exp(env.lower(s) - up):
                self.accepted += 1
                return torch.tensor(s, dtype=DTYPE)
            h, dh = self.log_and_slope(s)
            if h > up + 1e-9 * (1.0 + abs(up)):
                raise InvalidDensityError(f"log-density exceeds its tangent hull at {s}: not log-concave")
            if len(env) < self.max_points:
                env.insert(s, h, dh)
            if u[2] <= math.exp(h - up):
                self.accepted += 1
                return torch.tensor(s, dtype=DTYPE)
        raise RuntimeError(f"adaptive rejection sampling did not accept within {max_iter} proposals")
