import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paracalc.besov import para_lt
from paracalc.kernels import psi_kernel_reference
from paracalc.noise import enhanced_noise, sample_white_noise
from paracalc.nonlinear import (
    EtaGrid, ParamField, apply_L, duhamel_modes, nl_commutator_Lambda, nl_compose, nl_para_gt,
    nl_para_lt, nl_para_res, nl_para_smoothed, para_Lt_op, parametric_duhamel, parametric_heat,
    psi, time_derivative,
)
from paracalc.spectral import (
    TimeSlab, band_limited_random, get_grid, hat, heat_propagate, laplacian, lp_block, lp_blocks,
    synthesize, unhat,
)

ETA = EtaGrid()


def modulation(n, seed, amp=0.2):
    """Rough field with values inside [lam, 1]."""
    f = synthesize(n, 0.8, seed)
    return 0.75 + amp * f / np.max(np.abs(f))


def slab_modulation(n, frames, dt, seed):
    g0 = modulation(n, seed, 0.15)
    drift = np.sin(np.arange(n) + seed)[None, :]
    return TimeSlab(np.stack([g0 + 0.01 * m * drift for m in range(frames)]), dt)


def poly_slab(n, frames, dt, seed):
    """W(eta, t) quadratic in eta, so node interpolation is exact."""
    w = [band_limited_random(n, seed + i) for i in range(3)]
    e = ETA.nodes.reshape(-1, 1, 1, 1)
    t = (np.arange(frames) * dt)[None, :, None, None]
    V = w[0] + e * w[1] * (1 + t) + e ** 2 * w[2] * np.cos(3 * t)
    return ParamField.from_nodes(ETA, V, dt=dt)


# --- parameter evaluation -----------------------------------------------------

def test_eval_reproduces_nodes_and_constants():
    v = synthesize(32, 1.0, 0)
    h = ParamField.from_nodes(ETA, np.stack([v / e for e in ETA.nodes]))
    for i, e in enumerate(ETA.nodes):
        assert np.allclose(h.at(e), h.values[i], rtol=0, atol=1e-13)
    c = ParamField.constant(ETA, v)
    assert np.array_equal(c.at(0.61), v)
    with pytest.raises(ValueError):
        h.at(0.4)


def test_eval_power_closed_form_exact():
    v = synthesize(32, 1.0, 0)
    assert np.allclose(ParamField.from_power(ETA, v, 1.0).at(0.7), v / 0.7, rtol=1e-15, atol=0)


def test_eval_interpolated_inverse_eta_default_grid():
    v = synthesize(32, 1.0, 0)
    h = ParamField.from_nodes(ETA, np.stack([v / e for e in ETA.nodes]))
    assert np.max(np.abs(h.at(0.7) - v / 0.7)) <= 1e-8


def test_eval_interpolated_inverse_eta_refined_grid():
    eta = EtaGrid(M=12)
    v = synthesize(32, 1.0, 0)
    h = ParamField.from_nodes(eta, np.stack([v / e for e in eta.nodes]))
    assert np.max(np.abs(h.at(0.7) - v / 0.7)) <= 1e-8


def test_eta_grid_validation():
    with pytest.raises(ValueError):
        EtaGrid(M=4)
    with pytest.raises(ValueError):
        EtaGrid(lam=1.0)


# --- nonlinear paraproducts ---------------------------------------------------

def _sum_error(g, h):
    total = nl_para_lt(g, h) + nl_para_res(g, h) + nl_para_gt(g, h)
    return np.max(np.abs(total - nl_compose(g, h)))


def test_sum_identity_power_and_noise_fields():
    worst = 0.0
    for s in range(25):
        g = modulation(64, s)
        worst = max(worst, _sum_error(g, ParamField.from_power(ETA, synthesize(64, 1.0, 100 + s), 1.0)))
        xi2 = enhanced_noise(sample_white_noise(64, s), 0.25, None, ETA).xi2
        worst = max(worst, _sum_error(g, xi2))
    assert worst <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_sum_identity_node_fields(seed):
    g = modulation(32, seed)
    v = [synthesize(32, 0.5, seed + i) for i in range(2)]
    h = ParamField.from_nodes(ETA, np.stack([v[0] * np.sin(3 * e) + v[1] / e for e in ETA.nodes]))
    assert _sum_error(g, h) <= 1e-8


def test_compose_inverse_eta():
    g = modulation(64, 3)
    v = synthesize(64, 1.0, 4)
    assert np.allclose(nl_compose(g, ParamField.from_power(ETA, v, 1.0)), v / g, rtol=1e-12, atol=0)


@pytest.mark.parametrize("gbar", [0.5, 0.8, 1.0])
def test_constant_argument_collapse(gbar):
    v = synthesize(64, 1.0, 0)
    h = ParamField.from_power(ETA, v, 1.0)
    g = np.full((64, 64), gbar)
    assert np.max(np.abs(nl_para_lt(g, h) - v / gbar)) <= 1e-8
    assert np.max(np.abs(nl_para_res(g, h))) <= 1e-8
    assert np.max(np.abs(nl_para_gt(g, h))) <= 1e-8
    G = TimeSlab.constant(g, 4, 1e-3)
    assert np.max(np.abs(nl_para_smoothed(G, h).values - v / gbar)) <= 1e-8
    assert np.max(np.abs(nl_commutator_Lambda(G, h).values)) <= 1e-8


@pytest.mark.parametrize("kmax", [8, 16, 20])
def test_linear_in_eta_reduces_to_bony_paraproduct(kmax):
    # products here are pointwise; w below the alias band keeps them exact
    g = modulation(64, 1)
    w = band_limited_random(64, 2, kmax=kmax)
    h = ParamField.from_nodes(ETA, np.stack([e * w for e in ETA.nodes]))
    d = nl_para_lt(g, h) - para_lt(g, w)
    B = lp_blocks(d)
    assert np.max(np.abs(B[3:])) <= 1e-8 * np.max(np.abs(d))


def test_range_violation_raises():
    h = ParamField.from_power(ETA, synthesize(32, 1.0, 0), 1.0)
    with pytest.raises(ValueError):
        nl_compose(np.full((32, 32), 0.3), h)
    with pytest.raises(ValueError):
        nl_para_lt(np.full((32, 32), 1.2), h)


def test_smoothed_eta_independent_is_identity():
    G = slab_modulation(32, 5, 1e-3, 0)
    v = synthesize(32, 0.3, 9)
    out = nl_para_smoothed(G, ParamField.constant(ETA, v)).values
    assert np.max(np.abs(out - v[None])) <= 1e-10


def test_smoothed_time_constant_is_frame_paraproduct():
    g = modulation(32, 2)
    h = ParamField.from_power(ETA, synthesize(32, 1.0, 3), 1.0)
    out = nl_para_smoothed(TimeSlab.constant(g, 5, 1e-3), h).values
    assert np.allclose(out, nl_para_lt(g, h)[None], rtol=0, atol=1e-12)


def test_smoothed_misaligned_raises():
    G = slab_modulation(16, 5, 1e-3, 0)
    W = poly_slab(16, 4, 1e-3, 0)
    with pytest.raises(ValueError):
        nl_para_smoothed(G, W)


def test_lambda_vanishes_for_eta_independent():
    G = slab_modulation(32, 4, 1e-3, 1)
    h = ParamField.constant(ETA, synthesize(32, 1.0, 5))
    assert np.max(np.abs(nl_commutator_Lambda(G, h).values)) <= 1e-10


def test_xi2_eta_derivative_closed_form():
    xi2 = enhanced_noise(sample_white_noise(64, 0), 0.25, None, ETA).xi2
    d = xi2.derivative(1)
    e = ETA.nodes.reshape(-1, 1, 1)
    assert np.max(np.abs(d + 2 * xi2.values / e)) <= 1e-8


# --- parabolic operator -------------------------------------------------------

def test_apply_L_heat_is_second_order():
    w0 = band_limited_random(32, 0, kmax=4)
    bound = np.max(np.abs(laplacian(laplacian(w0))))
    errs = []
    for dt in (2e-3, 1e-3):
        P = parametric_heat(w0, ETA, 11, dt)
        errs.append(np.max(np.abs(apply_L(P).values)))
        assert errs[-1] <= 10 * dt ** 2 * bound
    assert errs[0] / errs[1] > 3


def test_apply_L_time_constant():
    v = synthesize(32, 1.0, 0)
    W = ParamField.from_nodes(ETA, np.stack([np.repeat(v[None], 4, 0)] * ETA.M), dt=1e-3)
    L = apply_L(W).values
    for i, e in enumerate(ETA.nodes):
        assert np.allclose(L[i], -e * laplacian(v)[None], atol=1e-12)


def test_apply_L_needs_three_frames():
    W = poly_slab(16, 2, 1e-3, 0)
    with pytest.raises(ValueError):
        apply_L(W)


def test_duhamel_zero_and_L_inverse():
    n, F, dt = 32, 21, 1e-3
    assert np.all(parametric_duhamel(TimeSlab(np.zeros((F, n, n)), dt), ETA).values == 0)
    f = band_limited_random(n, 1, kmax=4)
    t = np.arange(F) * dt
    fs = TimeSlab(np.cos(5 * t)[:, None, None] * f[None], dt)
    U = parametric_duhamel(fs, ETA)
    L = apply_L(U).values[:, 1:-1]
    assert np.max(np.abs(L - fs.values[None, 1:-1])) <= 1e-3 * np.max(np.abs(f))


def test_duhamel_constant_forcing_closed_form():
    n, F, dt = 16, 6, 1e-2
    f = band_limited_random(n, 2)
    U = parametric_duhamel(TimeSlab.constant(f, F, dt), ETA)
    k2 = get_grid(n).k2
    for i, e in enumerate(ETA.nodes):
        for m in range(F):
            t = m * dt
            mult = np.where(k2 > 0, -np.expm1(-e * k2 * t) / np.where(k2 > 0, e * k2, 1.0), t)
            assert np.allclose(U.values[i, m], unhat(mult * hat(f), n), atol=1e-12)


def test_duhamel_eta_derivatives_match_finite_differences():
    n, F, dt = 16, 8, 5e-3
    f = TimeSlab(np.stack([band_limited_random(n, 10 + m) for m in range(F)]), dt)
    e, h = 0.7, 1e-4
    U, U1, U2 = duhamel_modes(f, [e - h, e, e + h])
    assert np.allclose(U1[1], (U[2] - U[0]) / (2 * h), atol=1e-6)
    assert np.allclose(U2[1], (U[2] - 2 * U[1] + U[0]) / h ** 2, atol=1e-3)


def test_parametric_heat_matches_propagator():
    w0 = synthesize(32, 1.0, 0)
    P = parametric_heat(w0, ETA, 4, 1e-2)
    assert np.allclose(P.values[2, 3], heat_propagate(w0, ETA.nodes[2], 0.03), atol=1e-13)


def test_para_Lt_op_constant_modulation():
    n, F, dt = 32, 5, 1e-3
    w = TimeSlab(np.stack([synthesize(n, 1.0, m) for m in range(F)]), dt)
    G = TimeSlab.constant(np.full((n, n), 0.8), F, dt)
    lap = laplacian(w.values)
    low = lp_block(lap, -1) + lp_block(lap, 0)
    expected = para_Lt_op(G, w.like(np.zeros_like(w.values))).values
    assert np.all(expected == 0)
    out = para_Lt_op(G, w).values
    assert np.allclose(out, time_derivative(w.values, dt) - 0.8 * (lap - low), atol=1e-9)


# --- paradifferential commutator ----------------------------------------------

def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.mark.parametrize("seed", range(5))
def test_psi_matches_kernel_reference(seed):
    n, F, dt = 16, 6, 2e-3
    g = slab_modulation(n, F, dt, seed)
    W = poly_slab(n, F, dt, 100 + seed)
    assert _rel(psi(g, W, apply_L(W)).values, psi_kernel_reference(g, W).values) <= 1e-5


def test_psi_time_constant_eta_independent_reference():
    n, F, dt = 16, 5, 2e-3
    g = slab_modulation(n, F, dt, 7)
    w = band_limited_random(n, 8)
    W = ParamField.from_nodes(ETA, np.stack([np.repeat(w[None], F, 0)] * ETA.M), dt=dt)
    a = psi(g, W, apply_L(W)).values
    b = psi_kernel_reference(g, W).values
    assert np.max(np.abs(a - b)) <= 1e-6


def test_psi_constant_modulation_lives_in_low_blocks():
    n, F, dt = 32, 5, 1e-3
    G = TimeSlab.constant(np.full((n, n), 0.8), F, dt)
    W = poly_slab(n, F, dt, 3)
    out = psi(G, W, apply_L(W)).values
    assert np.max(np.abs(lp_blocks(out)[3:])) <= 1e-8


def test_kernel_reference_zero_and_size_guard():
    g = slab_modulation(16, 4, 1e-3, 0)
    W = poly_slab(16, 4, 1e-3, 0).scaled(0.0)
    assert np.all(psi_kernel_reference(g, W).values == 0)
    with pytest.raises(ValueError):
        psi_kernel_reference(slab_modulation(32, 4, 1e-3, 0), poly_slab(32, 4, 1e-3, 0))
