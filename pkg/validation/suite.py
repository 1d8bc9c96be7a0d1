"""
The desk-scale oracle suite behind the `validate` command. Each check returns an
OracleReport; `quick` shrinks sample sizes for smoke runs.
"""
import logging
import math
import time

import numpy as np
import torch
from scipy.stats import truncnorm

from densities import (
    BlackboxDensity,
    GaussianDensity,
    UniformDensity,
    gaussian_class_params,
    r_star,
)
from estimators import make_integrand, multi_run
from geometry import Ball, Box
from har import RandomStream, har_step, run_chain
from utils import DTYPE, progress_bar
from .oracles import (
    OracleReport,
    check_kappa_condition,
    check_level_set_ball,
    detailed_balance_residual,
    empirical_tv,
    kernel_normalization,
    ks_statistic,
    ks_two_sample,
    ks_two_sample_threshold,
)
from .quadrature import quadrature_expectation

logger = logging.getLogger(__name__)

KS_ONE_SAMPLE = 1.95


def _r_star_residuals(quick):
    d_max = 60 if quick else 500
    worst = max(r_star(d).residual for d in range(1, d_max + 1))
    closed = abs(r_star(2).r_star - math.log(8.0 / 7.0))
    return [
        OracleReport.check("r_star_residual", worst, 1e-10, f"max |P(d/2, r*) - 1/8| over d = 1..{d_max}"),
        OracleReport.check("r_star_closed_form", closed, 1e-9, "r*(2) against log(8/7)"),
    ]


def _gaussian_example(stream):
    g = GaussianDensity(torch.eye(2, dtype=DTYPE))
    params = gaussian_class_params(g)
    expected = (math.sqrt(2.0) / 2.0, 2.0 * math.sqrt(math.e), math.sqrt(math.log(8.0 / 7.0)))
    err = max(abs(params.R - expected[0]), abs(params.kappa - expected[1]), abs(params.r - expected[2]))
    kappa = check_kappa_condition(g, params.G, params.kappa, rng=stream.generator)
    rel = abs(kappa.statistic / params.kappa - 1.0)
    return [
        OracleReport.check("gaussian_class_params", err, 1e-9, "R, kappa, r for Sigma = I, d = 2"),
        kappa,
        OracleReport.check("kappa_ratio_equality", rel, 1e-6, "quadrature ratio against the closed-form kappa"),
        check_level_set_ball(g),
        check_level_set_ball(GaussianDensity(torch.diag(torch.tensor([2.0, 1.0], dtype=DTYPE))),
                             name="level_set_ball_diag"),
    ]


def _one_step_exactness(stream, quick):
    n = 20000 if quick else 100000
    threshold = KS_ONE_SAMPLE / math.sqrt(n)
    uniform = UniformDensity(Box([-1.0], [1.0]))
    x = torch.full((n, 1), 0.9, dtype=DTYPE)
    y = har_step(uniform, x, stream.substream(0).generator)
    ks_u = ks_statistic(y[:, 0], lambda s: np.clip((s + 1.0) / 2.0, 0.0, 1.0))

    gauss = GaussianDensity([[1.0]], Box([-1.0], [2.0]))
    x = torch.full((n, 1), 0.5, dtype=DTYPE)
    y = har_step(gauss, x, stream.substream(1).generator)
    ks_g = ks_statistic(y[:, 0], truncnorm(-1.0, 2.0).cdf)
    return [
        OracleReport.check("one_step_uniform_d1", ks_u, threshold, f"KS over {n} draws"),
        OracleReport.check("one_step_truncated_gaussian_d1", ks_g, threshold, f"KS over {n} draws"),
    ]


def _stationarity(stream, quick):
    n = 20000 if quick else 100000
    reports = []
    cases = [("gaussian_d2", GaussianDensity(torch.eye(2, dtype=DTYPE))),
             ("uniform_ball_d2", UniformDensity(Ball([0.0, 0.0], 1.0)))]
    for i, (name, density) in enumerate(cases):
        gen = stream.substream(i).generator
        x = density.sample_exact(gen, n)
        y = har_step(density, x, gen)
        fresh = density.sample_exact(gen, n)
        projections = torch.tensor([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]], dtype=DTYPE).T
        worst = max(ks_two_sample(a, b)[0] for a, b in zip((y @ projections).T, (fresh @ projections).T))
        reports.append(OracleReport.check(f"stationarity_{name}", worst, ks_two_sample_threshold(n, n),
                                          "largest two-sample KS over coordinate and diagonal projections"))
    return reports


def _reversibility(stream, quick):
    pairs_count = 20 if quick else 100
    reports = []
    cases = [("uniform_ball", UniformDensity(Ball([0.0, 0.0], 1.0))),
             ("gaussian_ball", GaussianDensity(torch.eye(2, dtype=DTYPE), Ball([0.0, 0.0], 1.5))),
             ("correlated_gaussian_box", GaussianDensity([[1.0, 0.0], [0.5, 0.8]], Box([-1.0, -1.0], [1.0, 2.0])))]
    for i, (name, density) in enumerate(cases):
        gen = stream.substream(i).generator
        xs = density.body.sample_uniform(gen, pairs_count)
        ys = density.body.sample_uniform(gen, pairs_count)
        residual = detailed_balance_residual(density, zip(xs, ys))
        reports.append(OracleReport.check(f"detailed_balance_{name}", residual, 1e-6, f"{pairs_count} pairs"))
    density = UniformDensity(Ball([0.0, 0.0], 1.0))
    mass = kernel_normalization(density, torch.tensor([0.3, -0.2], dtype=DTYPE))
    reports.append(OracleReport.check("kernel_normalization", abs(mass - 1.0), 1e-3, f"integral {mass:.8f}"))
    return reports


def _mixing(stream, quick):
    chains = 40000 if quick else 100000
    bins = 8 if quick else 16
    density = UniformDensity(Ball([0.0, 0.0], 1.0))
    gen = stream.substream(0).generator
    x0 = torch.tensor([0.99, 0.0], dtype=DTYPE).expand(chains, 2).clone()
    state = run_chain(density, x0, 200, gen)
    exact = density.sample_exact(stream.substream(1).generator, chains)
    tv = empirical_tv(state.x, exact, bins=bins)
    return [OracleReport.check("mixing_tv_uniform_ball", tv, 0.05,
                               f"{chains} chains, n0 = 200, {bins}^2 bins")]


def _estimators(stream, quick, parallel):
    n = 2000 if quick else 10000
    density = UniformDensity(Ball([0.0, 0.0], 1.0))
    f = make_integrand("halfspace_indicator", 2, a=[1.0, 0.0], b=0.0)
    result = multi_run(density, f, density.body, n, 50, stream, parallel=parallel)
    reference = quadrature_expectation(density, f)
    second_moment = make_integrand("expression", 2, text="x1 * x1")
    base = quadrature_expectation(density, second_moment)
    scale_err = 0.0
    for c in (1e-6, 1e6):
        log_c = math.log(c)
        scaled = BlackboxDensity(lambda x, log_c=log_c: density.log_inside(x) + log_c, density.body)
        scale_err = max(scale_err, abs(quadrature_expectation(scaled, second_moment) / base - 1.0))
    return [
        OracleReport.check("multi_run_halfspace", abs(result.value - reference), 3.0 * 0.5 / math.sqrt(n),
                           f"value {result.value:.6f}, quadrature {reference:.8f}, n = {n}, n0 = 50"),
        OracleReport.check("kernel_step_count", abs(result.kernel_steps - n * 50), 0.0,
                           f"{result.kernel_steps} kernel steps"),
        OracleReport.check("quadrature_scale_invariance", scale_err, 1e-9, "rho scaled by 1e-6 and 1e6"),
    ]


def run_oracle_suite(quick: bool = False, seed: int = 0, parallel: int = 1) -> list[OracleReport]:
    stream = RandomStream(seed)
    groups = [
        ("special functions", lambda: _r_star_residuals(quick)),
        ("gaussian example", lambda: _gaussian_example(stream.substream(0))),
        ("one-step exactness", lambda: _one_step_exactness(stream.substream(1), quick)),
        ("stationarity", lambda: _stationarity(stream.substream(2), quick)),
        ("reversibility", lambda: _reversibility(stream.substream(3), quick)),
        ("mixing", lambda: _mixing(stream.substream(4), quick)),
        ("estimators", lambda: _estimators(stream.substream(5), quick, parallel)),
    ]
    reports = []
    for i, (name, group) in enumerate(groups):
        start = time.time()
        reports += group()
        logger.info(f"{progress_bar(i + 1, len(groups))} {name} done in {time.time() - start:.1f}s")
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(reports)} oracles failed: {', '.join(failed)}")
    return reports
