import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import shefluct as sf
from shefluct.grid import Field
from shefluct.noise import batch_physical_increments, replica_seed

# nested quadrature of the periodic heat kernel against the covariance
# (d=1, N=64, delta=0.05, t=0.25), independent of the spectral sum
QUADRATURE_VARIANCE = 0.27541665069786325


def test_multiplier_values_and_validation(grid1):
    m = sf.build_multiplier(grid1, 0.1)
    np.testing.assert_allclose(m.values, 1.0 / (1.0 + 0.01 * grid1.eigenvalues))
    assert not m.is_white
    assert sf.build_multiplier(grid1, 0.0).is_white
    np.testing.assert_allclose(sf.build_multiplier(grid1, 0.1, 2).values, m.values**2)
    with pytest.raises(ValueError):
        sf.build_multiplier(grid1, -0.1)
    with pytest.raises(ValueError):
        sf.build_multiplier(sf.build_grid(3, 4), 0.1, n_moll=0)


def test_multiplier_order_bound_in_three_dimensions():
    # n > (d-2)/4 = 1/4 holds for n = 1
    assert sf.build_multiplier(sf.build_grid(3, 4), 0.1).order == 1


def test_paths_are_replayable(grid1):
    a = sf.NoisePath(grid1, 11, 1e-3, 10)
    b = sf.NoisePath(grid1, 11, 1e-3, 10)
    assert np.array_equal(a.white(7), b.white(7))
    assert not np.array_equal(a.white(7), a.white(6))
    assert not np.array_equal(a.white(3), sf.NoisePath(grid1, 12, 1e-3, 10).white(3))
    with pytest.raises(IndexError):
        a.white(10)
    with pytest.raises(IndexError):
        a.white(-1)


def test_path_validation(grid2):
    with pytest.raises(ValueError):
        sf.NoisePath(grid2, 0, 0.0, 4)
    with pytest.raises(ValueError):
        sf.NoisePath(grid2, 0, 0.1, 4, arity=3)


def test_vector_components_differ(grid2):
    p = sf.NoisePath(grid2, 3, 1e-2, 2, arity=2)
    z = p.white(0)
    assert z.shape == (2, 16, 16)
    assert not np.allclose(z[0], z[1])


def test_white_multiplier_is_identity(grid1):
    p = sf.NoisePath(grid1, 5, 1e-3, 3)
    mult = sf.build_multiplier(grid1, 0.0)
    np.testing.assert_allclose(p.physical(1, mult), p.white(1), atol=1e-15)


def test_batch_matches_single(grid1):
    mult = sf.build_multiplier(grid1, 0.1)
    paths = [sf.NoisePath(grid1, s, 1e-3, 3) for s in (1, 2, 3)]
    batch = batch_physical_increments(paths, 2, mult)
    for i, p in enumerate(paths):
        np.testing.assert_allclose(batch[i], p.physical(2, mult), atol=1e-15)


def test_replica_seeds_distinct_and_stable():
    seeds = [replica_seed(0, r) for r in range(100)]
    assert len(set(seeds)) == 100
    assert replica_seed(0, 5) == seeds[5]
    assert replica_seed(1, 5) != seeds[5]


def test_sample_increment_fields(grid1, grid2):
    inc = sf.sample_increment(sf.NoisePath(grid1, 0, 1e-3, 2), 0, sf.build_multiplier(grid1, 0.1))
    assert inc.spectral and not inc.vector
    vec = sf.sample_increment(sf.NoisePath(grid2, 0, 1e-3, 2, arity=2), 0, sf.build_multiplier(grid2, 0.1))
    assert vec.vector and vec.data.shape == (2,) + grid2.spectral_shape


def test_per_mode_variance_is_dt_times_multiplier_squared():
    g = sf.build_grid(1, 16)
    dt = 1e-2
    mult = sf.build_multiplier(g, 0.1)
    M = 4000
    pw = np.zeros(g.spectral_shape)
    for r in range(M):
        pw += np.abs(sf.NoisePath(g, r, dt, 1).spectral(0, mult)[0]) ** 2
    expect = dt * mult.squared()
    # |dW_m|^2 / expect is chi^2 with 2 (interior) or 1 (real modes) dof, halved
    dof = np.where(g.mode_weights == 2, 2, 1)
    se = expect * np.sqrt(2.0 / dof / M)
    assert np.all(np.abs(pw / M - expect) < 4.5 * se)


def test_zero_mode_is_real():
    g = sf.build_grid(2, 8)
    c = sf.NoisePath(g, 1, 1e-3, 1).spectral(0, sf.build_multiplier(g, 0.1))
    assert c[0, 0, 0].imag == 0


def test_weighted_inner_matches_physical_pairing(grid1):
    rng = np.random.default_rng(1)
    f = Field(grid1, rng.standard_normal(32))
    h = Field(grid1, rng.standard_normal(32))
    mult = sf.build_multiplier(grid1, 0.05)
    mf = grid1.to_physical(f.coefficients().data * mult.values)
    mh = grid1.to_physical(h.coefficients().data * mult.values)
    assert math.isclose(sf.weighted_inner(f, h, mult), np.mean(mf * mh), rel_tol=1e-12)
    assert sf.weighted_inner(f, f, mult) > 0
    with pytest.raises(ValueError):
        sf.weighted_inner(f, Field(sf.build_grid(1, 8), np.zeros(8)), mult)


def test_covariance_kernel_closed_form():
    # (1 - delta^2 d^2)^-2 on the line has kernel (1 + |z|/delta) e^{-|z|/delta} / (4 delta)
    g = sf.build_grid(1, 4096)
    delta = 0.05
    mult = sf.build_multiplier(g, delta)
    z = np.array([[0.0, 0.01, 0.1, 0.3, 0.5]])
    k = np.arange(-5, 6)[:, None]
    r = np.abs(z[0][None, :] + k)
    exact = np.sum((1 + r / delta) * np.exp(-r / delta), axis=0) / (4 * delta)
    np.testing.assert_allclose(sf.covariance_kernel(mult, z), exact, rtol=1e-8, atol=1e-10)
    assert isinstance(sf.covariance_kernel(mult, np.array([0.2])), float)
    with pytest.raises(ValueError):
        sf.covariance_kernel(mult, np.zeros(2))


def test_covariance_kernel_matches_inverse_fft():
    g = sf.build_grid(2, 8)
    mult = sf.build_multiplier(g, 0.2)
    grid_kernel = g.to_physical(mult.squared().astype(complex))
    pts = g.coordinates()
    np.testing.assert_allclose(sf.covariance_kernel(mult, pts), grid_kernel, atol=1e-12)


def test_k_reference_rates():
    assert sf.k_reference(1, 1, 0.1) == 1.0
    assert math.isclose(sf.k_reference(1, 2, 0.1), math.log(10))
    assert math.isclose(sf.k_reference(1, 3, 0.1), 10.0)
    assert math.isclose(sf.k_reference(2, 2, 0.1), 100.0)
    with pytest.raises(ValueError):
        sf.k_reference(3, 1, 0.1)


def test_convolution_variance_quadrature_oracle():
    g = sf.build_grid(1, 64)
    v = sf.convolution_variance(g, sf.build_multiplier(g, 0.05), 0.25)
    assert abs(v - QUADRATURE_VARIANCE) < 1e-10


def test_convolution_variance_edge_cases(grid1):
    mult = sf.build_multiplier(grid1, 0.1)
    assert sf.convolution_variance(grid1, mult, 0.0) == 0.0
    with pytest.raises(ValueError):
        sf.convolution_variance(grid1, mult, -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_convolution_variance_monotone(delta, t1, t2):
    g = sf.build_grid(1, 16)
    mult = sf.build_multiplier(g, delta)
    lo, hi = sorted((t1, t2))
    assert sf.convolution_variance(g, mult, lo) <= sf.convolution_variance(g, mult, hi) + 1e-15
