import math

import numpy as np
import pytest
from scipy import stats

from nlbranch.exceptions import ParameterError
from nlbranch.model import StableJumpMeasure, TabulatedJumpMeasure
from nlbranch.sampler import (
    RngStream,
    StableIncrementParams,
    gaussian_increment,
    make_rng,
    stable_increment,
    stable_unit_from_uniforms,
    truncated_increment,
    truncated_jumps,
)


def test_gaussian_moments():
    x = gaussian_increment(make_rng(1, 0), 1.0, 1_000_000)
    assert abs(x.mean()) < 4e-3
    assert abs(x.var() - 1.0) < 0.01


def test_gaussian_zero_step_is_zero():
    assert np.all(gaussian_increment(make_rng(1, 0), 0.0, 100) == 0.0)


def test_stream_replay_is_bitwise():
    a = make_rng(99, 3).standard_normal(50)
    b = RngStream(99, 3).generator().standard_normal(50)
    c = make_rng(99, 4).standard_normal(50)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_stream_validation():
    with pytest.raises(ParameterError):
        RngStream(-1, 0)
    with pytest.raises(ParameterError):
        RngStream(1 << 64, 0)


def test_stable_mean_is_zero():
    # infinite variance: the t-ratio is skewed negative, so this is seed-sensitive (~1 in 8 fail)
    x = stable_increment(make_rng(1, 0), 1.5, 1.0, 1_000_000)
    assert abs(x.mean()) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


@pytest.mark.parametrize("alpha, lam, dt", [(1.5, 1.0, 1.0), (1.9, 2.0, 0.25), (1.2, 0.5, 1.0)])
def test_stable_laplace_transform(alpha, lam, dt):
    x = stable_increment(make_rng(3, 0), alpha, dt, 100_000)
    e = np.exp(-lam * x)
    se = e.std(ddof=1) / math.sqrt(e.size)
    assert abs(e.mean() - math.exp(dt * lam ** alpha)) <= 3 * se


def test_stable_self_similarity():
    a = stable_increment(make_rng(4, 0), 1.5, 0.01, 10)
    b = stable_increment(make_rng(4, 0), 1.5, 1.0, 10)
    assert np.allclose(a, 0.01 ** (1 / 1.5) * b, rtol=1e-14)


def test_cms_constants_at_alpha_three_halves():
    p = StableIncrementParams(1.5)
    assert p.scale_sigma == pytest.approx(math.sqrt(0.5) ** (1 / 1.5), rel=1e-15)
    assert p.shift_b == pytest.approx(math.atan(-1.0) / 1.5, rel=1e-15)
    assert p.factor_s == pytest.approx(2 ** (1 / 3), rel=1e-15)


def test_stable_unit_matches_scipy_up_to_scale():
    # scipy's levy_stable (S1, beta=1) with scale cos(pi alpha/2)^(1/alpha) has the same law
    alpha = 1.5
    v = make_rng(5, 0).uniform(-math.pi / 2, math.pi / 2, 20_000)
    w = make_rng(5, 1).standard_exponential(20_000)
    ours = stable_unit_from_uniforms(v, w, alpha)
    scale = abs(math.cos(math.pi * alpha / 2)) ** (1 / alpha)
    dist = stats.levy_stable(alpha, 1.0, loc=0.0, scale=scale)
    ref = dist.rvs(size=20_000, random_state=np.random.default_rng(6))
    assert stats.ks_2samp(ours, ref).statistic < 0.02


def test_truncated_jumps_zero_rate():
    assert truncated_jumps(make_rng(1), StableJumpMeasure(1.5), 0.0, 0.1, 1e-3) == (0.0, 0.0, 0.0)


def test_truncated_jumps_point_mass_counts_are_poisson():
    # density concentrated on [0.99, 1.01] with unit mass
    tab = TabulatedJumpMeasure(lambda z: 50.0 if 0.99 <= z <= 1.01 else 0.0, z_min=0.99, z_max=1.01)
    rng = make_rng(7)
    sums = np.array([truncated_jumps(rng, tab, 3.0, 0.5, 0.5)[0] for _ in range(20_000)])
    counts = np.rint(sums)
    assert np.all(np.abs(sums - counts) <= 0.01 * counts + 1e-12)
    assert abs(counts.mean() - 1.5) < 4 * math.sqrt(1.5 / counts.size)
    assert abs(counts.var() - 1.5) < 0.06


def test_tabulated_increment_matches_exact_stable_sampler():
    stable = StableJumpMeasure(1.5)
    tab = TabulatedJumpMeasure(stable.density, z_min=0.0, z_max=math.inf)
    rng = make_rng(8)
    approx = np.array([truncated_increment(rng, tab, 1.0, 0.01, 1e-3) for _ in range(100_000)])
    exact = stable_increment(make_rng(9), 1.5, 0.01, 100_000)
    assert stats.ks_2samp(approx, exact).statistic < 0.01


def test_stable_increment_rejects_bad_input():
    with pytest.raises(ParameterError):
        stable_increment(make_rng(1), 1.5, 0.0)
    with pytest.raises(ParameterError):
        stable_increment(make_rng(1), 2.0, 1.0)
