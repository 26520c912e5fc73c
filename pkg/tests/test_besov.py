import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paracalc.besov import (
    TimeKernel, besov_norm, block_sups, commutator_C, estimate_regularity, eta_sup_norm,
    fit_slope, holder_time_seminorm, para_gt, para_lt, paralin_remainder, parabolic_norm,
    parabolic_norm_parts, resonant, time_smoothed_para,
)
from paracalc.noise import sample_white_noise
from paracalc.nonlinear import EtaGrid, ParamField
from paracalc.spectral import (
    TimeSlab, band_limited_random, dealiased_product, get_grid, heat_propagate, lp_block,
    lp_blocks, radial_field, synthesize,
)


def test_besov_norm_is_weighted_max():
    f = synthesize(64, 0.5, 0)
    rep = besov_norm(f, 0.5)
    lv = np.arange(-1, len(rep.block_norms) - 1)
    assert np.allclose(rep.block_norms, 2.0 ** (0.5 * lv) * block_sups(f))
    assert rep.norm == rep.block_norms.max()
    assert np.array_equal(rep.levels, lv)


def test_radial_field_slope():
    slope, _ = fit_slope(block_sups(radial_field(256, 2.5)))
    assert abs(slope - (-0.5)) <= 0.1


def test_white_noise_slope_over_seeds():
    slopes = [fit_slope(block_sups(sample_white_noise(128, s)))[0] for s in range(20)]
    assert abs(np.mean(slopes) - 1.0) <= 0.15


def test_insufficient_blocks_raises():
    x, y = get_grid(64).x
    with pytest.raises(ValueError, match="insufficient"):
        estimate_regularity(np.cos(x) + np.sin(2 * y))
    assert besov_norm(np.cos(x), 0.0).fitted_slope is None


def test_bony_sum_is_dealiased_product_100_pairs():
    worst = 0.0
    for s in range(100):
        f = band_limited_random(32, 2 * s)
        g = band_limited_random(32, 2 * s + 1)
        d = para_lt(f, g) + resonant(f, g) + para_gt(f, g) - dealiased_product(f, g)
        worst = max(worst, np.max(np.abs(d)))
    assert worst <= 1e-11


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_bony_sum_rough_fields(seed):
    f = synthesize(64, -0.7, seed)
    g = synthesize(64, 0.4, seed + 1)
    d = para_lt(f, g) + resonant(f, g) + para_gt(f, g) - dealiased_product(f, g)
    assert np.max(np.abs(d)) <= 1e-11


def test_paraproduct_with_constant_left_factor():
    g = synthesize(64, 0.3, 5)
    low = lp_block(g, -1) + lp_block(g, 0)
    assert np.allclose(para_lt(np.full_like(g, 2.0), g), 2.0 * (g - low), atol=1e-13)


def test_commutator_with_constant_first_argument():
    g = synthesize(64, 0.8, 1)
    h = synthesize(64, -1.2, 2)
    low = lp_block(g, -1) + lp_block(g, 0)
    c = commutator_C(np.full_like(g, 3.0), g, h)
    assert np.allclose(c, -3.0 * resonant(low, h), atol=1e-13)


def test_paralinearization_of_affine_map_is_low_frequency():
    f = synthesize(64, 0.8, 3)
    R = paralin_remainder(lambda v: 2 * v + 1, lambda v: 2 + 0 * v, f)
    B = lp_blocks(R)
    assert np.max(np.abs(B[3:])) < 1e-13


def test_heat_flow_block_decay():
    f = synthesize(64, -0.5, 4)
    u = heat_propagate(f, 1.0, 0.05)
    # smoothing removes the top block almost entirely
    assert block_sups(u)[-1] < 1e-3 * block_sups(f)[-1]


def test_holder_seminorm_linear_in_time():
    n, F, dt = 32, 11, 0.01
    u = TimeSlab(np.arange(F)[:, None, None] * dt * np.ones((F, n, n)), dt)
    T = (F - 1) * dt
    for e in (0.25, 0.5):
        assert np.isclose(holder_time_seminorm(u, e), T ** (1 - e), rtol=1e-12)
        assert np.isclose(holder_time_seminorm(u, e, inner="sup"), T ** (1 - e), rtol=1e-12)
    with pytest.raises(ValueError):
        holder_time_seminorm(u, 0.5, inner="l2")


def test_parabolic_norm_parts_add_up():
    f = synthesize(32, 0.8, 0)
    u = TimeSlab(np.stack([heat_propagate(f, 1.0, t) for t in np.arange(5) * 0.01]), 0.01)
    s, t = parabolic_norm_parts(u, 0.8)
    assert np.isclose(parabolic_norm(u, 0.8), s + t)


def test_interpolation_constant_is_stable():
    ratios = []
    for n, dt in ((64, 4e-3), (128, 4e-3), (64, 1e-3)):
        f = synthesize(n, 0.8, 1)
        u = TimeSlab(np.stack([heat_propagate(f, 1.0, t) for t in np.arange(0, 0.02 + 1e-12, dt)]), dt)
        ratios.append(holder_time_seminorm(u, (0.8 - 0.1) / 2, inner="sup") / parabolic_norm(u, 0.8))
    assert max(ratios) / min(ratios) <= 2.0


def test_composition_bound_single_constant():
    K = []
    for s in range(50):
        amp = 0.2 + 0.05 * (s % 10)
        f = synthesize(64, 0.8, s, amplitude=amp)
        u = TimeSlab(np.stack([heat_propagate(f, 1.0, t) for t in (0.0, 0.002, 0.004)]), 0.002)
        Mu = parabolic_norm(u, 0.8)
        K.append(parabolic_norm(u.like(0.75 + 0.25 * np.sin(u.values)), 0.8) / (1 + Mu) ** 2)
    assert max(K) < 10 * np.median(K)


def test_eta_sup_norm_power_field():
    eta = EtaGrid()
    v = synthesize(32, 1.0, 0)
    h = ParamField.from_power(eta, v, 1.0)
    # d/deta (v/eta) = -v/eta^2 is largest at eta = lam
    assert np.isclose(eta_sup_norm(h, 1), np.max(np.abs(v)) / 0.25)
    assert np.isclose(eta_sup_norm(h, 0), np.max(np.abs(v)) / 0.5)
    with pytest.raises(ValueError):
        eta_sup_norm(h, 3)


# --- time kernel --------------------------------------------------------------

def test_time_kernel_mass_and_support():
    Q = TimeKernel()
    assert abs(Q.mass() - 1.0) <= 1e-10
    assert Q(np.array([-0.5, 0.0, 1.0, 2.0])).max() == 0.0
    assert Q(0.5) > 0


@pytest.mark.parametrize("level", [-1, 0, 2, 5, 9])
def test_time_kernel_weights(level):
    Q = TimeKernel()
    w = Q.weights(level, 1e-3)
    assert abs(w.sum() - 1.0) < 1e-14 and np.all(w >= 0)
    W = Q.matrix(level, 1e-3, 20)
    assert np.allclose(W.sum(axis=1), 1.0)
    assert np.all(np.triu(W, 1) == 0)  # causal


def test_time_kernel_identity_below_grid_scale():
    assert np.array_equal(TimeKernel().matrix(12, 1e-3, 6), np.eye(6))


def test_time_smoothed_para_time_constant_is_para_lt():
    g = 0.75 + 0.25 * synthesize(32, 0.8, 0)
    h = synthesize(32, -0.5, 1)
    G = TimeSlab.constant(g, 5, 1e-3)
    H = TimeSlab.constant(h, 5, 1e-3)
    out = time_smoothed_para(G, H).values
    assert np.allclose(out, para_lt(g, h)[None], atol=1e-13)
    with pytest.raises(ValueError):
        time_smoothed_para(G, TimeSlab.constant(h, 4, 1e-3))


def test_time_smoothing_gain():
    n, dt, F = 64, 1e-4, 201
    h = sample_white_noise(n, 3)
    t = np.arange(F) * dt
    G = TimeSlab(t[:, None, None] * np.ones((F, n, n)), dt)
    H = TimeSlab.constant(h, F, dt)
    plain = np.stack([para_lt(G.values[m], h) for m in range(F)])
    diff = plain - time_smoothed_para(G, H).values
    s_plain = fit_slope(block_sups(plain))[0]
    s_diff = fit_slope(block_sups(diff))[0]
    assert s_diff <= s_plain - 0.5


# --- scaling regressions with synthesized fields -------------------------------

def _slopes(op, alphas, seeds=range(10), n=128):
    out = []
    for s in seeds:
        fields = [synthesize(n, a, 10 * s + i) for i, a in enumerate(alphas)]
        out.append(fit_slope(block_sups(op(*fields)))[0])
    return float(np.mean(out))


def test_paraproduct_estimate_slope():
    assert abs(_slopes(para_lt, (-0.5, 1.2)) - (-0.7)) <= 0.2


def test_resonant_estimate_slope():
    assert abs(_slopes(resonant, (-0.5, 1.2)) - (-0.7)) <= 0.2


def test_commutator_estimate_slope():
    assert abs(_slopes(commutator_C, (0.8, 0.8, -1.2)) - (-0.4)) <= 0.2


def test_paralinearization_slope():
    s = _slopes(lambda f: paralin_remainder(np.sin, np.cos, f), (0.8,))
    assert abs(s - (-1.6)) <= 0.2
