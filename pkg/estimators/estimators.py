"""
Multi-run and single-run Markov chain estimators of A(f, rho) = int f rho / int rho.

multi_run advances its n independent chains in blocks of BLOCK_SIZE; block b draws from
substream b of the run's stream, so results do not depend on how many worker threads
process the blocks.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import torch

from geometry import AbstractConvexBody
from har import RandomStream, run_chain, har_step
from har.rng import as_generator
from utils import progress_bar

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024


class EstimatorMode(Enum):
    multi = "multi"
    single = "single"


@dataclass
class EstimateResult:
    value: float
    n: int
    n0: int
    per_sample_values: list[float]
    mode: EstimatorMode
    seed: int
    std_error: float = math.nan
    kernel_steps: int = 0
    clamped_count: int = 0


@dataclass
class EstimatorConfig:
    density: object
    f: object
    G: AbstractConvexBody
    n: int
    n0: int
    mode: EstimatorMode = EstimatorMode.multi
    parallel: int = 1

    def __post_init__(self):
        if not isinstance(self.mode, EstimatorMode):
            self.mode = EstimatorMode(self.mode)


@dataclass
class MseResult:
    mse: float
    jackknife_se: float
    values: list[float] = field(default_factory=list)


def _as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if isinstance(rng, int):
        return RandomStream(rng)
    raise TypeError(f"expected a RandomStream or an integer seed, got {type(rng).__name__}")


def _check_counts(n, n0):
    if n < 1:
        raise ValueError(f"sample count n must be at least 1, got {n}")
    if n0 < 0:
        raise ValueError(f"step count n0 must be nonnegative, got {n0}")


def _clamp(values: torch.Tensor) -> tuple[torch.Tensor, int]:
    if not bool(torch.isfinite(values).all()):
        raise ValueError("integrand returned non-finite values")
    outside = int((values.abs() > 1.0).sum())
    return torch.clamp(values, -1.0, 1.0), outside


def sample_initial(G: AbstractConvexBody, rng, n: int | None = None) -> torch.Tensor:
    """Uniform draw(s) on G: a point (d,) or, with n, a batch (n, d)."""
    if not G.bounded:
        raise ValueError("initial distribution needs a bounded G")
    x = G.sample_uniform(as_generator(rng), 1 if n is None else n)
    return x[0] if n is None else x


def _run_block(density, f, G, size, n0, stream: RandomStream):
    gen = stream.generator
    x0 = sample_initial(G, gen, size)
    state = run_chain(density, x0, n0, gen)
    with torch.no_grad():
        values = f(state.x)
    return values, state.kernel_steps


def multi_run(density, f, G: AbstractConvexBody, n: int, n0: int, rng, parallel: int = 1,
              block_size: int = BLOCK_SIZE) -> EstimateResult:
    """
    M_{n,n0}: mean of f over the n0-th states of n independent chains started uniformly on G.
    Costs exactly n * n0 kernel steps. Values of f outside [-1, 1] are clamped and counted.
    """
    _check_counts(n, n0)
    stream = _as_stream(rng)
    sizes = [min(block_size, n - start) for start in range(0, n, block_size)]
    jobs = [(size, stream.substream(b)) for b, size in enumerate(sizes)]
    run = lambda job: _run_block(density, f, G, job[0], n0, job[1])
    if parallel > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            blocks = list(pool.map(run, jobs))
    else:
        blocks = []
        for i, job in enumerate(jobs):
            blocks.append(run(job))
            if len(jobs) > 1:
                logger.debug(f"multi_run blocks {progress_bar(i + 1, len(jobs))}")

    values, clamped = _clamp(torch.cat([b[0].reshape(-1) for b in blocks]))
    if clamped:
        logger.warning(f"integrand left [-1, 1] at {clamped} of {n} chain end points, values clamped")
    samples = values.tolist()
    value = math.fsum(samples) / n
    std_error = math.sqrt(math.fsum((v - value) ** 2 for v in samples) / (n - 1) / n) if n > 1 else math.nan
    return EstimateResult(value=value, n=n, n0=n0, per_sample_values=samples, mode=EstimatorMode.multi,
                          seed=stream.seed, std_error=std_error,
                          kernel_steps=sum(b[1] for b in blocks), clamped_count=clamped)


def batch_means_std_error(samples: list[float]) -> float:
    """Standard error of the mean of a correlated series from floor(sqrt(n)) nonoverlapping batch means."""
    n = len(samples)
    batches = int(math.isqrt(n))
    if batches < 2:
        return math.nan
    size = n // batches
    means = [math.fsum(samples[i * size:(i + 1) * size]) / size for i in range(batches)]
    grand = math.fsum(means) / batches
    return math.sqrt(math.fsum((m - grand) ** 2 for m in means) / (batches - 1) / batches)


def single_run(density, f, G: AbstractConvexBody, n: int, n0: int, rng, log_every: int = 10000) -> EstimateResult:
    """
    S_{n,n0}: one chain started uniformly on G, averaging f over steps n0+1, ..., n0+n.
    Costs n + n0 kernel steps.
    """
    _check_counts(n, n0)
    stream = _as_stream(rng)
    gen = stream.substream(0).generator
    state = run_chain(density, sample_initial(G, gen), n0, gen)
    x = state.x
    raw = torch.empty(n, dtype=x.dtype)
    for k in range(n):
        x = har_step(density, x, gen, check=False)
        with torch.no_grad():
            raw[k] = f(x)
        if log_every and (k + 1) % log_every == 0:
            logger.debug(f"single_run {progress_bar(k + 1, n)}")

    values, clamped = _clamp(raw)
    if clamped:
        logger.warning(f"integrand left [-1, 1] at {clamped} of {n} chain states, values clamped")
    samples = values.tolist()
    return EstimateResult(value=math.fsum(samples) / n, n=n, n0=n0, per_sample_values=samples,
                          mode=EstimatorMode.single, seed=stream.seed,
                          std_error=batch_means_std_error(samples),
                          kernel_steps=state.kernel_steps + n, clamped_count=clamped)


def run_estimator(config: EstimatorConfig, rng) -> EstimateResult:
    if config.mode == EstimatorMode.multi:
        return multi_run(config.density, config.f, config.G, config.n, config.n0, rng, parallel=config.parallel)
    return single_run(config.density, config.f, config.G, config.n, config.n0, rng)


def empirical_mse(config: EstimatorConfig, reference: float, reps: int, rng) -> MseResult:
    """
    Mean squared deviation of `reps` independent estimator runs from `reference`, with the
    jackknife standard error of that mean. Repetition i uses substream i of rng.
    """
    if reps < 2:
        raise ValueError(f"empirical mse needs at least 2 repetitions, got {reps}")
    stream = _as_stream(rng)
    start = time.time()
    values = []
    for i in range(reps):
        values.append(run_estimator(config, stream.substream(i)).value)
        logger.debug(f"empirical_mse {progress_bar(i + 1, reps)}")
    result = mse_from_values(values, reference)
    logger.info(f"empirical mse {result.mse:.6g} +- {result.jackknife_se:.3g} over {reps} runs in {time.time() - start:.1f}s")
    return result


def mse_from_values(values: list[float], reference: float) -> MseResult:
    """Mean squared deviation from `reference` and its jackknife standard error."""
    reps = len(values)
    if reps < 2:
        raise ValueError(f"empirical mse needs at least 2 values, got {reps}")
    sq = [(v - reference) ** 2 for v in values]
    total = math.fsum(sq)
    loo = [(total - s) / (reps - 1) for s in sq]
    loo_mean = math.fsum(loo) / reps
    jackknife_se = math.sqrt((reps - 1) / reps * math.fsum((m - loo_mean) ** 2 for m in loo))
    return MseResult(mse=total / reps, jackknife_se=jackknife_se, values=list(values))
