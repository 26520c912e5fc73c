"""Besov norms, Bony paraproducts, commutators and regularity regression."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .spectral import (
    TimeSlab, _pad, dealiased_apply, dealiased_product, fine_size, from_fine,
    get_grid, hat, lp_blocks, make_partition, workers,
)

NOISE_FLOOR = 1e-13


# --- norms --------------------------------------------------------------------

def block_sups(f: np.ndarray) -> np.ndarray:
    """``||Delta_j f||_inf`` for ``j = -1..J``, sup taken over any leading axes too."""
    B = lp_blocks(f)
    return np.abs(B).reshape(B.shape[0], -1).max(axis=1)


@dataclass(frozen=True)
class BesovReport:
    alpha: float
    block_norms: np.ndarray = field(repr=False)
    norm: float
    fitted_slope: float | None
    residual: float | None

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-1, len(self.block_norms) - 1)


def fit_slope(sups: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of ``log2 sups[j]`` over ``1 <= j < J`` (top block excluded)."""
    J = len(sups) - 2
    j = np.arange(1, J)
    y = np.asarray(sups)[j + 1]
    floor = NOISE_FLOOR * max(1.0, float(np.max(sups)))
    if np.count_nonzero(y > floor) < 3 or np.count_nonzero(np.asarray(sups) > floor) < 4:
        raise ValueError("insufficient blocks above the noise floor for a regularity fit")
    ok = y > floor
    A = np.vstack([j[ok], np.ones(ok.sum())]).T
    coef, *_ = np.linalg.lstsq(A, np.log2(y[ok]), rcond=None)
    res = np.log2(y[ok]) - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def besov_norm(f: np.ndarray, alpha: float) -> BesovReport:
    sups = block_sups(f)
    lv = np.arange(-1, len(sups) - 1)
    weighted = 2.0 ** (lv * alpha) * sups
    try:
        slope, res = fit_slope(sups)
    except ValueError:
        slope, res = None, None
    return BesovReport(alpha, weighted, float(weighted.max()), slope, res)


def estimate_regularity(f: np.ndarray) -> tuple[float, float]:
    """Regularity estimate ``-slope`` with the fit residual."""
    slope, res = fit_slope(block_sups(f))
    return -slope, res


def mean_slope(fields) -> float:
    """Slope fitted to the seed-averaged log block norms."""
    logs = np.mean([np.log2(np.maximum(block_sups(f), 1e-300)) for f in fields], axis=0)
    return fit_slope(2.0 ** logs)[0]


def holder_time_seminorm(u: TimeSlab, exponent: float, inner: str = "besov0") -> float:
    """``sup_{s != t} ||u(t) - u(s)|| / |t - s|^exponent`` over all frame pairs."""
    v = u.values
    if inner == "besov0":
        B = lp_blocks(v)  # (blocks, frames, n, n)
    elif inner == "sup":
        B = v[None]
    else:
        raise ValueError(f"unknown inner norm {inner!r}")
    F = u.frames
    best = 0.0
    for m in range(1, F):
        d = np.abs(B[:, m:] - B[:, :-m]).reshape(B.shape[0], F - m, -1).max(axis=(0, 2))
        best = max(best, float(d.max()) / (m * u.dt) ** exponent)
    return best


def parabolic_norm_parts(u: TimeSlab, alpha: float) -> tuple[float, float]:
    space = max(besov_norm(u.values[m], alpha).norm for m in range(u.frames))
    return space, holder_time_seminorm(u, alpha / 2.0)


def parabolic_norm(u: TimeSlab, alpha: float) -> float:
    s, t = parabolic_norm_parts(u, alpha)
    return s + t


def _inner(values: np.ndarray, inner) -> float:
    if inner == "sup":
        return float(np.max(np.abs(values)))
    if isinstance(inner, tuple) and inner[0] == "besov":
        return besov_norm(values, float(inner[1])).norm
    raise ValueError(f"unknown inner norm {inner!r}")


def eta_sup_norm(h, k: int, inner="sup") -> float:
    """``sup_eta sup_{m <= k}`` of the inner norm of ``d^m h / d eta^m``."""
    if not 0 <= k <= 2:
        raise ValueError("eta derivative order must be 0, 1 or 2")
    best = 0.0
    for order in range(k + 1):
        D = h.derivative(order)
        for node in D:
            best = max(best, _inner(node, inner))
    return best


# --- Bony paraproducts --------------------------------------------------------

def _fine_from_hat(F: np.ndarray, n: int) -> np.ndarray:
    g = get_grid(n)
    m = fine_size(n)
    return sfft.irfft2(_pad(F, n, m), s=(m, m), axes=(-2, -1), workers=workers()) * (m / n) ** 2 / g.cell_area


def _expand(mult: np.ndarray, ndim: int) -> np.ndarray:
    return mult.reshape(mult.shape[:1] + (1,) * (ndim - 2) + mult.shape[1:])


def _low_stack(P) -> np.ndarray:
    return np.stack([P.low(j) for j in P.levels])


def _near_stack(P) -> np.ndarray:
    r = P.rho
    out = r.copy()
    out[1:] += r[:-1]
    out[:-1] += r[1:]
    return out


def _paired_sum(Mf: np.ndarray, Mg: np.ndarray, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = f.shape[-1]
    F, G = hat(f), hat(g)
    acc = 0.0
    for a, b in zip(Mf, Mg):
        if not (np.any(a) and np.any(b)):
            continue
        acc = acc + _fine_from_hat(F * a, n) * _fine_from_hat(G * b, n)
    if np.isscalar(acc):
        return np.zeros(np.broadcast_shapes(f.shape, g.shape))
    return from_fine(acc, n)


def para_lt(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``f < g = sum_j S_j f Delta_j g``."""
    P = make_partition(f.shape[-1])
    return _paired_sum(_low_stack(P), P.rho, f, g)


def para_gt(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    return para_lt(g, f)


def resonant(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``f o g = sum_{|i-j| <= 1} Delta_i f Delta_j g``."""
    P = make_partition(f.shape[-1])
    return _paired_sum(_near_stack(P), P.rho, f, g)


def commutator_C(f: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    return resonant(para_lt(f, g), h) - dealiased_product(f, resonant(g, h))


def paralin_remainder(F, dF, f: np.ndarray) -> np.ndarray:
    """``F(f) - F'(f) < f`` with both compositions evaluated on the fine grid."""
    return dealiased_apply(F, f) - para_lt(dealiased_apply(dF, f), f)


# --- time kernel --------------------------------------------------------------

def _bump(r):
    r = np.asarray(r, dtype=float)
    inside = (r > 0) & (r < 1)
    safe = np.where(inside, r, 0.5)
    return np.where(inside, np.exp(-1.0 / (safe * (1.0 - safe))), 0.0)


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    return integrate.quad(_bump, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]


@dataclass(frozen=True)
class TimeKernel:
    """Mass-one bump ``Q(r) = c exp(-1/(r(1-r)))`` on ``(0, 1)``."""

    @property
    def c(self) -> float:
        return 1.0 / _bump_mass()

    def __call__(self, r):
        return self.c * _bump(r)

    def mass(self) -> float:
        return integrate.quad(self, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]

    def weights(self, level: int, dt: float) -> np.ndarray:
        """Causal weights on lags ``b * dt`` for ``Q_i(r) = 2^(2i) Q(2^(2i) r)``, summing to one."""
        return _weights(level, float(dt))

    def matrix(self, level: int, dt: float, frames: int) -> np.ndarray:
        """Frame map ``(Q_i * phi)(t_m) = sum_s W[m, s] phi(t_s)`` with past frames clamped to 0."""
        return _matrix(level, float(dt), int(frames))


@lru_cache(maxsize=256)
def _weights(level: int, dt: float) -> np.ndarray:
    s = 2.0 ** (2 * level)
    nb = int(np.ceil(1.0 / (s * dt))) + 1
    w = s * _bump(s * dt * np.arange(nb))
    total = w.sum()
    if total <= 0.0:
        return np.ones(1)
    w = w / total
    w.setflags(write=False)
    return w


@lru_cache(maxsize=256)
def _matrix(level: int, dt: float, frames: int) -> np.ndarray:
    w = _weights(level, dt)
    W = np.zeros((frames, frames))
    cum = np.cumsum(w)
    for m in range(frames):
        b = min(m, len(w) - 1)
        W[m, m - np.arange(b + 1)] = w[: b + 1]
        W[m, 0] += 1.0 - cum[b]
    W.setflags(write=False)
    return W


def time_convolve(W: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``out[m] = sum_s W[m, s] values[s]`` in fixed order (``W`` is lower triangular)."""
    F = W.shape[0]
    out = np.zeros((F,) + values.shape[1:])
    shape = (-1,) + (1,) * (values.ndim - 1)
    for s in range(F):
        out[s:] += W[s:, s].reshape(shape) * values[s]
    return out


def time_smoothed_para(g: TimeSlab, h: TimeSlab, kernel: TimeKernel | None = None) -> TimeSlab:
    """``g << h``: the paraproduct with ``S_j g`` averaged in time at scale ``2^(-2j)``."""
    if not g.aligned(h):
        raise ValueError("time_smoothed_para: misaligned time grids")
    kernel = kernel or TimeKernel()
    n = g.n
    P = make_partition(n)
    G, H = hat(g.values), hat(h.values)
    acc = 0.0
    for j in P.levels:
        if j <= 0:
            continue
        low = _fine_from_hat(G * P.low(j), n)
        low = time_convolve(kernel.matrix(j, g.dt, g.frames), low)
        acc = acc + low * _fine_from_hat(H * P.block(j), n)
    return h.like(from_fine(acc, n))
