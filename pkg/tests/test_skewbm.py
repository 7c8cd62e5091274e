import math

import numpy as np
import pytest
from scipy import integrate, stats

from mwl import SkewBM, density, inverse_cdf, sample_path, transition_cdf
from mwl.errors import NonPositiveTime
from mwl.skewbm import gaussian_density, marginal_cdf, sample_by_excursion_flipping
from mwl.stats import dkw_bound, ks_distance

BETAS = [-1.0, -0.6, 0.0, 0.3, 0.5, 1.0]


def integral(f, lo, hi, breaks=(0.0,)):
    """Quadrature split at the kinks of the skew density."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return total


def test_constructor_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SkewBM(1.01)
    with pytest.raises(ValueError):
        SkewBM(0.2, sigma=0.0)
    with pytest.raises(NonPositiveTime):
        density(SkewBM(0.1), 0.0, 0.0, 1.0)
    with pytest.raises(NonPositiveTime):
        transition_cdf(SkewBM(0.1), -1.0, 0.0, 1.0)


def test_density_point_values():
    assert density(SkewBM(0.5), 1.0, 0.0, 1.0) == pytest.approx(0.36295609, abs=5e-9)
    assert 1.5 * stats.norm.pdf(1.0) == pytest.approx(density(SkewBM(0.5), 1.0, 0.0, 1.0), abs=1e-15)
    assert density(SkewBM(1.0), 1.0, 0.0, -0.3) == 0.0
    assert density(SkewBM(0.7), 2.0, 0.4, 0.0) == pytest.approx(gaussian_density(2.0, 0.4))


def test_zero_beta_is_gaussian():
    bm = SkewBM(0.0)
    x = np.linspace(-3, 3, 13)
    y = np.linspace(-4, 2, 13)
    assert np.allclose(density(bm, 0.7, x, y), stats.norm.pdf(y - x, scale=math.sqrt(0.7)), atol=1e-15)
    assert np.allclose(transition_cdf(bm, 0.7, x, y), stats.norm.cdf(y - x, scale=math.sqrt(0.7)),
                       atol=1e-15)


@pytest.mark.parametrize("beta", BETAS)
@pytest.mark.parametrize("t,x", [(0.1, 0.0), (1.0, 0.0), (1.0, 0.8), (2.5, -1.3), (0.3, 2.0)])
def test_density_normalized(beta, t, x):
    bm = SkewBM(beta)
    total = integral(lambda y: density(bm, t, x, y), -np.inf, np.inf)
    assert abs(total - 1.0) <= 1e-8


@pytest.mark.parametrize("beta", BETAS)
def test_cdf_is_integral_of_density(beta):
    bm = SkewBM(beta)
    for t in (0.2, 1.0, 3.0):
        for x in (-1.5, 0.0, 0.4):
            for y in (-3.0, -0.5, 0.0, 0.2, 1.1, 4.0):
                num = integral(lambda u: density(bm, t, x, u), -np.inf, y)
                assert abs(num - transition_cdf(bm, t, x, y)) <= 1e-10


def test_cdf_limits_and_monotone():
    bm = SkewBM(0.5)
    y = np.linspace(-12, 12, 4001)
    f = transition_cdf(bm, 1.3, 0.25, y)
    assert np.all(np.diff(f) >= -1e-15)
    assert f[0] < 1e-15 and f[-1] > 1 - 1e-15
    assert transition_cdf(bm, 1.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("beta", [-0.8, 0.0, 0.5, 1.0])
@pytest.mark.parametrize("s,t,x,y", [(0.5, 0.7, 0.0, 0.3), (1.0, 1.0, -0.4, 0.9),
                                     (0.2, 1.5, 1.0, -0.6), (0.8, 0.3, -1.2, -0.1)])
def test_chapman_kolmogorov(beta, s, t, x, y):
    bm = SkewBM(beta)
    lhs = integral(lambda z: density(bm, s, x, z) * density(bm, t, z, y), -np.inf, np.inf,
                   breaks=(0.0, x, y))
    assert abs(lhs - density(bm, s + t, x, y)) <= 1e-6


def test_inverse_cdf_roundtrip():
    bm = SkewBM(-0.4)
    u = np.linspace(1e-6, 1 - 1e-6, 101)
    x = np.linspace(-2, 2, 101)
    y = inverse_cdf(bm, 0.6, x, u)
    assert np.max(np.abs(transition_cdf(bm, 0.6, x, y) - u)) <= 1e-12


def test_exact_sampler_gaussian_increments():
    bm = SkewBM(0.0, sigma=1.7)
    paths = sample_path(bm, [0.0, 0.4, 1.0], seed=1, paths=100_000)
    inc = paths[:, 2] - paths[:, 1]
    d = ks_distance(inc, stats.norm(scale=1.7 * math.sqrt(0.6)).cdf)
    assert d < dkw_bound(100_000)
    assert dkw_bound(100_000) == pytest.approx(0.00515, abs=1e-5)


def test_exact_sampler_reflected_and_sign_frequency():
    assert np.all(sample_path(SkewBM(1.0), [0.0, 0.5, 1.0], seed=2, paths=2000) >= 0)
    beta = 0.3
    v = sample_path(SkewBM(beta), [0.0, 1.0], seed=3, paths=100_000)[:, 1]
    pos = (v > 0).astype(float)
    se = pos.std(ddof=1) / math.sqrt(pos.size)
    assert abs(pos.mean() - 0.5 * (1 + beta)) <= 3 * se


def test_exact_sampler_marginal_ks_skewed():
    bm = SkewBM(0.5)
    v = sample_path(bm, [0.0, 1.0], seed=4, paths=100_000)[:, 1]
    assert ks_distance(v, marginal_cdf(bm, 1.0)) < dkw_bound(100_000)


def test_scale_is_a_plain_multiple():
    grid = [0.0, 0.25, 0.5, 2.0]
    a = sample_path(SkewBM(0.2, sigma=2.5), grid, seed=9, paths=50)
    b = sample_path(SkewBM(0.2), grid, seed=9, paths=50)
    assert np.array_equal(a, 2.5 * b)
    with pytest.raises(ValueError):
        sample_path(SkewBM(0.2), [0.1, 1.0], seed=1)


def test_flipping_extremes():
    grid = np.linspace(0, 1, 11)
    up = sample_by_excursion_flipping(SkewBM(1.0), 400, grid, seed=5, paths=20)
    down = sample_by_excursion_flipping(SkewBM(-1.0), 400, grid, seed=5, paths=20)
    assert np.all(up >= 0)
    assert np.array_equal(down, -up)
    mid = sample_by_excursion_flipping(SkewBM(0.1), 400, grid, seed=5, paths=20)
    assert np.array_equal(np.abs(mid), up)
