import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paracalc.spectral import (
    Grid, TimeSlab, chi, dealiased_apply, dealiased_product, from_spectral, get_grid,
    heat_multiplier, heat_propagate, inv_laplacian, lacunary, laplacian, lp_block, lp_blocks,
    lp_low, make_partition, synthesize, to_spectral, top_level,
)


def _oracle_product(f, g):
    """Product on a 2n grid by zero padding, projected back: no aliasing possible."""
    n = f.shape[-1]
    m = 2 * n

    def up(a):
        A = np.fft.fftshift(np.fft.fft2(a))
        A[0, :] = 0
        A[:, 0] = 0
        B = np.zeros((m, m), complex)
        B[n // 2: n // 2 + n, n // 2: n // 2 + n] = A
        return np.fft.ifft2(np.fft.ifftshift(B)).real * 4

    P = np.fft.fftshift(np.fft.fft2(up(f) * up(g)))[n // 2: n // 2 + n, n // 2: n // 2 + n] / 4
    P[0, :] = 0
    P[:, 0] = 0
    return np.fft.ifft2(np.fft.ifftshift(P)).real


def test_grid_rejects_bad_sizes():
    for n in (8, 48, 100):
        with pytest.raises(ValueError):
            Grid(n)


def test_top_level_rule():
    assert top_level(64) == 4
    for n in (16, 32, 64, 128, 256):
        P = make_partition(n)
        # support of the last finite block stays inside the resolved disk
        assert 1.4 * 2 ** P.J <= n / 2


def test_chi_profile():
    assert chi(1.1) == 1.0 and chi(0.0) == 1.0
    assert chi(1.4) == 0.0 and chi(3.0) == 0.0
    r = np.linspace(1.1, 1.4, 50)
    assert np.all(np.diff(chi(r)) <= 0)


def test_partition_sums_to_one_and_is_disjoint():
    P = make_partition(64)
    assert np.max(np.abs(P.rho.sum(axis=0) - 1.0)) < 1e-15
    for i in range(-1, P.J + 1):
        for j in range(i + 2, P.J + 1):
            assert np.max(P.block(i) * P.block(j)) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([16, 32, 64]))
def test_block_reconstruction(seed, n):
    f = synthesize(n, -0.5, seed)
    assert np.max(np.abs(lp_blocks(f).sum(axis=0) - f)) <= 1e-10 * np.max(np.abs(f))


def test_lp_block_and_low_consistent():
    f = synthesize(64, 0.3, 1)
    B = lp_blocks(f)
    assert np.allclose(lp_block(f, 2), B[3], atol=1e-14)
    assert np.allclose(lp_low(f, 3), B[:3].sum(axis=0), atol=1e-14)
    with pytest.raises(IndexError):
        lp_low(f, 9)


def test_spectral_roundtrip_and_normalization():
    n = 32
    x, y = get_grid(n).x
    f = np.cos(3 * x + 2 * y)
    F = to_spectral(f)
    # f_hat(k) = int f e^{-ik.x} = 2 pi^2 on +-k
    assert abs(F.at(3, 2) - 2 * np.pi ** 2) < 1e-10
    assert np.allclose(from_spectral(F), f, atol=1e-13)
    with pytest.raises(ValueError):
        to_spectral(np.full((n, n), np.nan))


def test_laplacian_and_inverse():
    n = 32
    x, y = get_grid(n).x
    f = np.sin(2 * x) * np.cos(5 * y)
    assert np.allclose(laplacian(f), -29 * f, atol=1e-11)
    assert np.allclose(inv_laplacian(f), f / 29, atol=1e-14)
    with pytest.raises(ValueError):
        inv_laplacian(f + 1.0)


def test_heat_multiplier_contracts():
    f = synthesize(64, -0.8, 3)
    for t in (0.0, 1e-3, 0.1, 1.0):
        assert np.max(heat_multiplier(64, 0.7, t)) <= 1.0
        assert np.max(np.abs(heat_propagate(f, 0.7, t))) <= np.max(np.abs(f)) * (1 + 1e-12)
    with pytest.raises(ValueError):
        heat_propagate(f, 1.0, -1.0)


def test_dealiased_product_cos_squared():
    x, y = get_grid(32).x
    f = np.cos(5 * x)
    assert np.max(np.abs(dealiased_product(f, f) - (0.5 + 0.5 * np.cos(10 * x)))) < 1e-14


@pytest.mark.parametrize("seed", range(3))
def test_dealiased_product_matches_2n_oracle(seed):
    n = 16
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal((2, n, n))
    err = np.max(np.abs(dealiased_product(f, g) - _oracle_product(f, g)))
    assert err <= 1e-12 * max(1.0, np.max(np.abs(_oracle_product(f, g))))


def test_dealiased_apply_polynomial_is_product():
    f = synthesize(32, 1.0, 4)
    assert np.allclose(dealiased_apply(lambda v: v * v, f), dealiased_product(f, f), atol=1e-13)


def test_lacunary_one_wave_per_block():
    n = 128
    f = lacunary(n, -0.5, 2)
    B = lp_blocks(f)
    for j in range(1, top_level(n) + 1):
        C = np.abs(np.fft.fft2(B[j + 1])) * 2 / n ** 2
        # a single cosine of amplitude 2^(j/2), untouched by the block multiplier
        assert np.isclose(C.max(), 2.0 ** (0.5 * j), rtol=1e-12)
        assert np.count_nonzero(C > 1e-9) == 2


def test_timeslab_validation():
    u = TimeSlab.constant(np.zeros((16, 16)), 4, 0.1)
    assert u.frames == 4 and np.isclose(u.T, 0.3)
    assert u.aligned(u.like(np.ones((4, 16, 16))))
