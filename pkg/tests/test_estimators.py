import math

import pytest
import torch

from densities import GaussianDensity, UniformDensity
from estimators import (
    EstimatorConfig,
    EstimatorMode,
    batch_means_std_error,
    empirical_mse,
    integrand_from_dict,
    make_integrand,
    mse_from_values,
    multi_run,
    run_estimator,
    sample_initial,
    single_run,
)
from geometry import Ball, FullSpace
from har import RandomStream, run_chain
from utils import DTYPE
from validation import empirical_tv


def disk():
    return UniformDensity(Ball([0.0, 0.0], 1.0))


def halfspace():
    return make_integrand("halfspace_indicator", 2, a=[1.0, 0.0], b=0.0)


def test_integrands():
    x = torch.tensor([[0.5, -0.25], [-1.0, 2.0]], dtype=DTYPE)
    assert make_integrand("constant", 2, c=0.3)(x).tolist() == [0.3, 0.3]
    assert make_integrand("coordinate", 2, index=2)(x).tolist() == [-0.25, 2.0]
    assert halfspace()(x).tolist() == [1.0, 0.0]
    tanh = make_integrand("tanh_linear", 2, a=[1.0, 1.0], b=0.5)
    assert tanh(x).tolist() == pytest.approx([math.tanh(0.75), math.tanh(1.5)])
    expr = make_integrand("expression", 2, text="x1 * x2")
    assert expr(x).tolist() == pytest.approx([-0.125, -2.0])


def test_integrand_errors_and_descriptors():
    with pytest.raises(ValueError, match="index"):
        make_integrand("coordinate", 2, index=3)
    with pytest.raises(ValueError, match="unknown integrand"):
        make_integrand("sine", 2)
    with pytest.raises(ValueError, match="dimension mismatch"):
        make_integrand("halfspace_indicator", 2, a=[1.0, 0.0, 0.0])
    f = make_integrand("tanh_linear", 3, a=[1.0, 0.0, -1.0], b=0.1)
    assert integrand_from_dict(f.to_dict(), 3).to_dict() == f.to_dict()


def test_sample_initial():
    g = RandomStream(0).generator
    x = sample_initial(Ball([1.0, 1.0], 0.5), g)
    assert x.shape == (2,)
    batch = sample_initial(Ball([1.0, 1.0], 0.5), g, 100)
    assert batch.shape == (100, 2)
    with pytest.raises(ValueError, match="bounded"):
        sample_initial(FullSpace(2), g)


@pytest.mark.parametrize("n, n0", [(1, 0), (5, 3), (2000, 10)])
def test_constant_integrand_is_exact(n, n0):
    one = make_integrand("constant", 2, c=1.0)
    assert multi_run(disk(), one, disk().body, n, n0, RandomStream(1)).value == 1.0
    assert single_run(disk(), one, disk().body, n, n0, RandomStream(1)).value == 1.0


def test_multi_run_halfspace():
    result = multi_run(disk(), halfspace(), disk().body, 10000, 50, RandomStream(2))
    assert abs(result.value - 0.5) < 0.015
    assert result.kernel_steps == 10000 * 50
    assert result.mode == EstimatorMode.multi
    assert len(result.per_sample_values) == 10000
    assert result.seed == 2


def test_multi_run_gaussian_odd_integrand():
    density = GaussianDensity(torch.eye(2, dtype=DTYPE))
    f = make_integrand("tanh_linear", 2, a=[1.0, 1.0], b=0.0)
    result = multi_run(density, f, Ball([0.0, 0.0], 1.0), 10000, 60, RandomStream(3))
    sd = math.sqrt(sum(v * v for v in result.per_sample_values) / result.n)
    assert abs(result.value) < 3.0 * sd / math.sqrt(result.n)


def test_multi_run_independent_of_parallelism():
    f = make_integrand("coordinate", 2, index=1)
    serial = multi_run(disk(), f, disk().body, 3000, 7, RandomStream(4), parallel=1)
    threaded = multi_run(disk(), f, disk().body, 3000, 7, RandomStream(4), parallel=4)
    assert serial.per_sample_values == threaded.per_sample_values
    assert serial.value == threaded.value


def test_multi_run_clamps_out_of_range_values(caplog):
    f = make_integrand("expression", 2, text="3 * x1")
    result = multi_run(disk(), f, disk().body, 500, 2, RandomStream(5))
    assert result.clamped_count > 0
    assert max(abs(v) for v in result.per_sample_values) <= 1.0
    assert "clamped" in caplog.text


def test_multi_run_rejects_non_finite_values():
    f = make_integrand("expression", 2, text="x1 / 0")
    with pytest.raises(ValueError, match="non-finite"):
        multi_run(disk(), f, disk().body, 10, 1, RandomStream(6))


def test_estimator_preconditions():
    with pytest.raises(ValueError):
        multi_run(disk(), halfspace(), disk().body, 0, 5, RandomStream(7))
    with pytest.raises(ValueError):
        single_run(disk(), halfspace(), disk().body, 10, -1, RandomStream(7))
    with pytest.raises(TypeError):
        multi_run(disk(), halfspace(), disk().body, 10, 1, "seed")


def test_single_run_gaussian_odd_integrand():
    density = GaussianDensity(torch.eye(2, dtype=DTYPE))
    f = make_integrand("tanh_linear", 2, a=[1.0, 1.0], b=0.0)
    result = single_run(density, f, Ball([0.0, 0.0], 1.0), 20000, 100, RandomStream(8))
    assert result.kernel_steps == 20000 + 100
    assert result.mode == EstimatorMode.single
    assert math.isfinite(result.std_error)
    assert abs(result.value) < 5.0 * result.std_error


@pytest.mark.slow
def test_single_run_uniform_disk_coordinate():
    f = make_integrand("coordinate", 2, index=1)
    result = single_run(disk(), f, disk().body, 100000, 100, RandomStream(9))
    assert abs(result.value) < 0.02


def test_batch_means_std_error():
    assert math.isnan(batch_means_std_error([1.0, 2.0, 3.0]))
    assert batch_means_std_error([1.0] * 100) == 0.0
    # 4 batches of 4 with means 0, 1, 0, 1
    samples = [0.0] * 4 + [1.0] * 4 + [0.0] * 4 + [1.0] * 4
    assert batch_means_std_error(samples) == pytest.approx(math.sqrt(1.0 / 3.0 / 4.0))


def test_mse_from_values():
    result = mse_from_values([1.0, 2.0, 3.0], 2.0)
    assert result.mse == pytest.approx(2.0 / 3.0)
    assert result.jackknife_se == pytest.approx(1.0 / 3.0)
    with pytest.raises(ValueError):
        mse_from_values([1.0], 1.0)


def test_empirical_mse_constant_integrand():
    config = EstimatorConfig(disk(), make_integrand("constant", 2, c=0.25), disk().body, n=50, n0=3)
    result = empirical_mse(config, 0.25, 4, RandomStream(10))
    assert result.mse == 0.0
    assert result.values == [0.25] * 4
    with pytest.raises(ValueError):
        empirical_mse(config, 0.25, 1, RandomStream(10))


def test_empirical_mse_uses_one_substream_per_repetition():
    config = EstimatorConfig(disk(), halfspace(), disk().body, n=200, n0=5, mode="multi")
    result = empirical_mse(config, 0.5, 3, RandomStream(11))
    for i, value in enumerate(result.values):
        assert value == run_estimator(config, RandomStream(11).substream(i)).value


@pytest.mark.slow
def test_multi_run_coverage_over_repetitions():
    stream = RandomStream(12)
    n = 10000
    hits = 0
    for rep in range(100):
        value = multi_run(disk(), halfspace(), disk().body, n, 50, stream.substream(rep)).value
        hits += abs(value - 0.5) <= 3.0 * 0.5 / math.sqrt(n)
    assert hits >= 99


@pytest.mark.slow
def test_empirical_mse_shrinks_with_n():
    stream = RandomStream(13)
    small = EstimatorConfig(disk(), halfspace(), disk().body, n=500, n0=50)
    large = EstimatorConfig(disk(), halfspace(), disk().body, n=1000, n0=50)
    mse_small = empirical_mse(small, 0.5, 200, stream.substream(0))
    mse_large = empirical_mse(large, 0.5, 200, stream.substream(1))
    assert 0.35 <= mse_large.mse / mse_small.mse <= 0.7
    gen = stream.substream(2).generator
    x0 = sample_initial(disk().body, gen, 100000)
    ends = run_chain(disk(), x0, 50, gen).x
    tv = empirical_tv(ends, disk().sample_exact(gen, 100000), bins=16)
    assert mse_small.mse <= 1.0 / 500 + 2.0 * tv + 3.0 * mse_small.jackknife_se


@pytest.mark.slow
def test_multi_run_mse_is_variance_plus_squared_bias():
    density = GaussianDensity(torch.eye(2, dtype=DTYPE))
    f = make_integrand("tanh_linear", 2, a=[1.0, 1.0], b=0.0)
    # chains start off-center and take few steps, so the estimate of A = 0 is biased
    G = Ball([1.0, 1.0], 0.5)
    stream = RandomStream(14)
    pooled = multi_run(density, f, G, 100000, 3, stream.substream(0)).per_sample_values
    bias = math.fsum(pooled) / len(pooled)
    var = math.fsum((v - bias) ** 2 for v in pooled) / (len(pooled) - 1)
    n = 200
    result = empirical_mse(EstimatorConfig(density, f, G, n=n, n0=3), 0.0, 400, stream.substream(1))
    assert abs(result.mse - (var / n + bias**2)) <= 5.0 * result.jackknife_se
