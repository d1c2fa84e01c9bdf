import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellgp.errors import DimensionMismatch, IndexOutOfRange
from cellgp.kernels import (
    IgpKernelParams,
    McgpHyperParams,
    igp_gram,
    igp_kernel,
    latent_kernel,
    mcgp_cov_matrix,
    mcgp_cross_cov,
    mcgp_cross_cov_grad,
    n_params,
    smoother,
)
from cellgp.numerics import cholesky
from oracles import finite_difference, quadrature_cross_cov, random_hyper


def _unit(R=1, m=2, noise=0.0):
    return McgpHyperParams(np.ones((m, R)), np.ones((m, R)), np.ones(R), noise if noise else 1e-300)


# ---------------------------------------------------------------- igp kernel

def test_igp_kernel_zero_distance():
    assert igp_kernel(IgpKernelParams(1.0, 1.0, 1e-300), 3.0, (), 3.0, (), False) == 1.0


def test_igp_kernel_noise_term():
    assert igp_kernel(IgpKernelParams(1.0, 1.0, 0.5), 3.0, (), 3.0, (), True) == pytest.approx(1.25, abs=1e-15)


def test_igp_kernel_scaled_lag():
    p = IgpKernelParams(2.0, 10.0, 1e-300)
    assert igp_kernel(p, 20.0, (), 10.0, (), False) == pytest.approx(4.0 * math.exp(-0.5), rel=1e-14)
    assert 4.0 * math.exp(-0.5) == pytest.approx(2.42612, abs=1e-5)


def test_igp_kernel_covariates():
    p = IgpKernelParams(1.0, 2.0, 0.1, theta_x=(3.0,))
    k = igp_kernel(p, 0.0, (1.0,), 2.0, (4.0,), False)
    assert k == pytest.approx(math.exp(-0.5 - 0.5), rel=1e-14)
    with pytest.raises(DimensionMismatch):
        igp_kernel(p, 0.0, (), 2.0, (4.0,), False)


def test_igp_params_positive():
    with pytest.raises(ValueError):
        IgpKernelParams(1.0, -1.0, 0.1)


def test_igp_params_vector_round_trip():
    p = IgpKernelParams(0.3, 12.0, 0.01, theta_x=(2.0, 5.0))
    q = IgpKernelParams.from_vector(p.to_vector())
    assert q.theta_F == pytest.approx(p.theta_F) and q.theta_x == pytest.approx(p.theta_x)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.1, 100), st.lists(st.integers(1, 400), min_size=2, max_size=10))
def test_igp_kernel_diagonal_dominates(theta_f, theta_l, ts):
    p = IgpKernelParams(theta_f, theta_l, 1e-300)
    ts = sorted(set(ts))
    for a in ts:
        assert igp_kernel(p, a, (), a, (), False) == pytest.approx(theta_f**2, rel=1e-14)
        for b in ts:
            if b != a:
                assert igp_kernel(p, a, (), b, (), False) < theta_f**2


def test_igp_gram_matches_scalar_kernel():
    p = IgpKernelParams(0.7, 4.0, 0.2)
    t = np.array([1.0, 3.0, 8.0])
    g = igp_gram(p, t, t, noise_diag=True)
    for a in range(3):
        for b in range(3):
            assert g[a, b] == pytest.approx(igp_kernel(p, t[a], (), t[b], (), a == b), rel=1e-14)


# ---------------------------------------------------------------- smoother

def test_smoother_examples():
    assert smoother(1.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert smoother(1.0, 1.0, 0.0) == pytest.approx(0.398942, abs=1e-6)
    assert smoother(0.0, 4.0, 1.3) == 0.0
    assert smoother(2.0, 3.0, 3.0) == pytest.approx(2 / math.sqrt(18 * math.pi) * math.exp(-0.5), rel=1e-14)


def test_latent_kernel_is_unit_mass_gaussian():
    lag = np.linspace(-60, 60, 20001)
    assert np.trapezoid(latent_kernel(4.0, lag), lag) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- cross covariance

def test_cross_cov_unit_example():
    p = _unit()
    assert mcgp_cross_cov(p, 0, 5.0, 1, 5.0, False) == pytest.approx(1 / math.sqrt(6 * math.pi), rel=1e-14)
    assert 1 / math.sqrt(6 * math.pi) == pytest.approx(0.230329, abs=1e-6)


def test_cross_cov_unit_example_against_quadrature():
    p = _unit()
    assert quadrature_cross_cov(p, 0, 5.0, 1, 5.0, aligned=False) == pytest.approx(
        1 / math.sqrt(6 * math.pi), rel=1e-9)


def test_cross_cov_zero_amplitudes():
    p = McgpHyperParams(np.zeros((3, 2)), np.full((3, 2), 2.0), np.array([5.0, 9.0]), 0.1)
    assert mcgp_cross_cov(p, 0, 1.0, 2, 4.0, False) == 0.0


def test_cross_cov_noise_on_same_observation():
    p = McgpHyperParams(np.array([[1.5, -0.5]]), np.array([[2.0, 3.0]]), np.array([4.0, 7.0]), 0.3)
    assert mcgp_cross_cov(p, 0, 2.0, 0, 2.0, True) == pytest.approx(
        mcgp_cross_cov(p, 0, 2.0, 0, 2.0, False) + 0.09, rel=1e-15)


def test_cross_cov_index_errors():
    p = _unit()
    with pytest.raises(IndexOutOfRange):
        mcgp_cross_cov(p, 0, 1.0, 2, 1.0, False)
    with pytest.raises(IndexOutOfRange):
        mcgp_cross_cov_grad(p, -1, 1.0, 0, 1.0, False)


@pytest.mark.parametrize("seed", range(50))
def test_cross_cov_matches_quadrature(seed):
    rng = np.random.default_rng(1000 + seed)
    p = random_hyper(rng, 3, 2, amp=(-100, 100), sw=(0.5, 50), lw=(0.5, 50))
    i, j = rng.integers(0, 3, size=2)
    t = rng.uniform(0, 200)
    t2 = t + rng.uniform(-100, 100)
    closed = mcgp_cross_cov(p, i, t, j, t2, False)
    quad = quadrature_cross_cov(p, i, t, j, t2, n_nodes=256)
    assert abs(closed - quad) <= 1e-6 * abs(closed)


@pytest.mark.parametrize("seed", range(10))
def test_quadrature_oracle_converged(seed):
    rng = np.random.default_rng(1000 + seed)
    p = random_hyper(rng, 3, 2, amp=(-100, 100), sw=(0.5, 50), lw=(0.5, 50))
    i, j = rng.integers(0, 3, size=2)
    t = rng.uniform(0, 200)
    t2 = t + rng.uniform(-100, 100)
    a = quadrature_cross_cov(p, i, t, j, t2, n_nodes=128)
    b = quadrature_cross_cov(p, i, t, j, t2, n_nodes=256)
    assert abs(a - b) <= 1e-8 * max(abs(b), 1e-300)


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_cross_cov_exactly_symmetric(seed, same):
    rng = np.random.default_rng(seed)
    p = random_hyper(rng, 3, 2, amp=(-100, 100), sw=(0.5, 50), lw=(0.5, 50))
    i, j = (int(v) for v in rng.integers(0, 3, size=2))
    t, t2 = rng.uniform(0, 200, size=2)
    assert mcgp_cross_cov(p, i, t, j, t2, same) == mcgp_cross_cov(p, j, t2, i, t, same)


def _flip(p, r):
    amp = np.array(p.amplitude)
    amp[:, r] *= -1
    return McgpHyperParams(amp, p.smoother_width, p.latent_width, p.noise)


def _permute(p, perm):
    return McgpHyperParams(np.asarray(p.amplitude)[:, perm], np.asarray(p.smoother_width)[:, perm],
                           np.asarray(p.latent_width)[perm], p.noise)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    p = random_hyper(rng, 3, 3)
    q = _permute(_flip(p, int(rng.integers(0, 3))), rng.permutation(3))
    cells = rng.integers(0, 3, size=8)
    t = rng.uniform(0, 100, size=8)
    np.testing.assert_allclose(mcgp_cov_matrix(q, cells, t, cells, t), mcgp_cov_matrix(p, cells, t, cells, t),
                               rtol=1e-13, atol=0)
    for _ in range(5):
        i, j = (int(v) for v in rng.integers(0, 3, size=2))
        a, b = rng.uniform(0, 100, size=2)
        assert mcgp_cross_cov(q, i, a, j, b, False) == pytest.approx(mcgp_cross_cov(p, i, a, j, b, False),
                                                                     rel=1e-13, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_gram_psd_with_bounded_jitter(seed, n):
    rng = np.random.default_rng(seed)
    p = random_hyper(rng, 3, 2, amp=(-100, 100), sw=(0.5, 50), lw=(0.5, 50), noise=(1e-3, 1.0))
    cells = rng.integers(0, 3, size=n)
    t = rng.integers(1, 300, size=n).astype(float)
    same = (cells[:, None] == cells[None, :]) & (t[:, None] == t[None, :])
    # repeated (cell, cycle) pairs are distinct observations, only the diagonal carries noise
    k = mcgp_cov_matrix(p, cells, t, cells, t)
    k = np.triu(k) + np.triu(k, 1).T + p.noise**2 * np.eye(n)
    assert same.diagonal().all()
    f = cholesky(k)
    assert f.jitter_used <= 1e-6 * np.mean(np.diag(k))


def test_cov_matrix_matches_scalar():
    rng = np.random.default_rng(3)
    p = random_hyper(rng, 3, 2)
    ca, ta = rng.integers(0, 3, size=5), rng.uniform(0, 50, size=5)
    cb, tb = rng.integers(0, 3, size=4), rng.uniform(0, 50, size=4)
    k = mcgp_cov_matrix(p, ca, ta, cb, tb)
    for a in range(5):
        for b in range(4):
            assert k[a, b] == pytest.approx(mcgp_cross_cov(p, ca[a], ta[a], cb[b], tb[b], False), rel=1e-12)


# ---------------------------------------------------------------- gradient

def test_grad_zero_partner_amplitude():
    amp = np.array([[0.0, 0.0], [1.3, -0.7]])
    p = McgpHyperParams(amp, np.full((2, 2), 2.0), np.array([3.0, 6.0]), 0.1)
    g = mcgp_cross_cov_grad(p, 0, 1.0, 1, 4.0, False)
    R = 2
    # derivative with respect to the partner (cell 1) amplitudes vanishes
    assert g[1 * R + 0] == 0.0 and g[1 * R + 1] == 0.0


def test_grad_noise_same_observation():
    p = McgpHyperParams(np.ones((1, 1)), np.ones((1, 1)), np.ones(1), 0.3)
    g = mcgp_cross_cov_grad(p, 0, 1.0, 0, 1.0, True)
    # log-space slot: d(theta^2)/d log theta = 2 theta^2, i.e. 2 theta times d theta / d log theta
    assert g[-1] == pytest.approx(2 * 0.3 * 0.3, rel=1e-15)
    assert mcgp_cross_cov_grad(p, 0, 1.0, 0, 1.0, False)[-1] == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = random_hyper(rng, 3, 2)
    m, R = 3, 2
    i, j = (int(v) for v in rng.integers(0, 3, size=2))
    t, t2 = rng.uniform(0, 30, size=2)
    same = bool(rng.integers(0, 2)) and i == j
    if same:
        t2 = t
    x = p.to_vector()

    def f(v):
        return mcgp_cross_cov(McgpHyperParams.from_vector(v, m, R), i, t, j, t2, same)

    step = 1e-6 * np.maximum(1.0, np.abs(x))
    fd = finite_difference(f, x, step)
    g = mcgp_cross_cov_grad(p, i, t, j, t2, same)
    assert g.size == n_params(m, R)
    scale = np.maximum(np.abs(fd), 1e-6 * np.max(np.abs(fd)))
    assert np.all(np.abs(g - fd) <= 1e-5 * scale + 1e-12)


# ---------------------------------------------------------------- parameter container

def test_hyper_validation():
    with pytest.raises(ValueError):
        McgpHyperParams(np.ones((2, 2)), np.ones((2, 1)), np.ones(2), 0.1)
    with pytest.raises(ValueError):
        McgpHyperParams(np.ones((2, 2)), -np.ones((2, 2)), np.ones(2), 0.1)
    with pytest.raises(ValueError):
        McgpHyperParams(np.ones((2, 2)), np.ones((2, 2)), np.ones(2), 0.0)


def test_hyper_vector_layout():
    p = McgpHyperParams(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0], [7.0, 8.0]]),
                        np.array([9.0, 10.0]), 0.5)
    v = p.to_vector()
    np.testing.assert_array_equal(v[:4], [1, 2, 3, 4])
    np.testing.assert_allclose(np.exp(v[4:8]), [5, 6, 7, 8], rtol=1e-15)
    np.testing.assert_allclose(np.exp(v[8:10]), [9, 10], rtol=1e-15)
    assert math.exp(v[10]) == pytest.approx(0.5, rel=1e-15)
    q = McgpHyperParams.from_vector(v, 2, 2)
    np.testing.assert_allclose(q.smoother_width, p.smoother_width, rtol=1e-15)
    assert len(p.vector_labels()) == v.size == n_params(2, 2)
