"""Discrete 2-torus, Fourier transforms and dyadic Littlewood-Paley blocks.

Fields are plain ``float64`` arrays whose last two axes are the ``n x n``
grid on ``[0, 2pi)^2``; any leading axes (time frames, parameter nodes) are
carried through every operation.  Fourier coefficients follow

    f_hat(k) = int f(x) exp(-i k.x) dx,     f(x) = (2pi)^-2 sum_k f_hat(k) exp(i k.x)

so ``f_hat = (2pi/n)^2 * fft2(f)``.  Internally the half-plane ``rfft2``
layout is used; the Nyquist row and column are always discarded.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi
CHI_INNER = 1.1
CHI_OUTER = 1.4


def workers() -> int:
    """FFT worker count, capped by ``PARACALC_THREADS``."""
    try:
        return max(1, int(os.environ.get("PARACALC_THREADS", "1")))
    except ValueError:
        return 1


def weighted_sum(w, stack: np.ndarray) -> np.ndarray:
    """``sum_k w[k] * stack[k]`` accumulated in index order.

    Used instead of BLAS contractions, whose rounding can depend on buffer alignment.
    """
    out = w[0] * stack[0]
    for k in range(1, len(stack)):
        out = out + w[k] * stack[k]
    return out


def _rfft2(f):
    return sfft.rfft2(f, axes=(-2, -1), workers=workers())


def _irfft2(F, n):
    return sfft.irfft2(F, s=(n, n), axes=(-2, -1), workers=workers())


@dataclass(frozen=True)
class Grid:
    """Uniform ``n x n`` grid on the 2-torus."""

    n: int

    def __post_init__(self):
        n = self.n
        if n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")

    @property
    def h(self) -> float:
        return TWO_PI / self.n

    @property
    def cell_area(self) -> float:
        return self.h ** 2

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        s = np.arange(self.n) * self.h
        return np.meshgrid(s, s, indexing="ij")

    @cached_property
    def kx(self) -> np.ndarray:
        n = self.n
        return np.broadcast_to(np.fft.fftfreq(n, 1.0 / n)[:, None], (n, n // 2 + 1))

    @cached_property
    def ky(self) -> np.ndarray:
        n = self.n
        return np.broadcast_to(np.arange(n // 2 + 1, dtype=float)[None, :], (n, n // 2 + 1))

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx ** 2 + self.ky ** 2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def keep(self) -> np.ndarray:
        """Mask of resolved (non-Nyquist) modes in the half-plane layout."""
        n = self.n
        return (self.kx != -n // 2) & (self.ky != n // 2)

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """How often each half-plane entry stands for a full-lattice mode."""
        m = np.where(self.ky > 0, 2.0, 1.0)
        return m * self.keep


@lru_cache(maxsize=None)
def get_grid(n: int) -> Grid:
    return Grid(int(n))


def grid_of(f: np.ndarray) -> Grid:
    n = f.shape[-1]
    if f.ndim < 2 or f.shape[-2] != n:
        raise ValueError(f"expected trailing n x n axes, got shape {f.shape}")
    return get_grid(n)


# --- transforms ---------------------------------------------------------------

def hat(f: np.ndarray) -> np.ndarray:
    """Half-plane Fourier coefficients with the Nyquist modes zeroed."""
    g = grid_of(f)
    F = _rfft2(np.asarray(f, dtype=float)) * g.cell_area
    return F * g.keep


def unhat(F: np.ndarray, n: int) -> np.ndarray:
    g = get_grid(n)
    return _irfft2(F * g.keep, n) / g.cell_area


@dataclass(frozen=True)
class SpectralField:
    """Full-lattice coefficients in ``fft2`` index order."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def at(self, k1: int, k2: int) -> complex:
        n = self.grid.n
        return complex(self.coeffs[k1 % n, k2 % n])


def to_spectral(f: np.ndarray) -> SpectralField:
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite field values")
    g = grid_of(f)
    C = np.fft.fft2(f, axes=(-2, -1)) * g.cell_area
    nyq = g.n // 2
    C[..., nyq, :] = 0.0
    C[..., :, nyq] = 0.0
    return SpectralField(g, C)


def from_spectral(F: SpectralField) -> np.ndarray:
    if not np.all(np.isfinite(F.coeffs)):
        raise ValueError("non-finite coefficients")
    return np.fft.ifft2(F.coeffs, axes=(-2, -1)).real / F.grid.cell_area


def strip_nyquist(f: np.ndarray) -> np.ndarray:
    return unhat(hat(f), f.shape[-1])


# --- dyadic partition ---------------------------------------------------------

def _smooth_step(u):
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        q0 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        q1 = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return q0 / (q0 + q1)


def chi(r):
    """Radial cutoff: 1 on ``r <= 1.1``, 0 on ``r >= 1.4``, smooth between."""
    r = np.asarray(r, dtype=float)
    return _smooth_step((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))


@dataclass(frozen=True)
class DyadicPartition:
    """Block multipliers ``rho[j + 1]`` for ``j = -1..J`` on the half-plane lattice.

    ``rho_j = chi(k / 2^(j+1)) - chi(k / 2^j)`` for ``0 <= j < J``; the top block
    takes the whole unresolved tail so the blocks sum to one exactly.
    """

    grid: Grid
    J: int
    chi: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)

    @property
    def levels(self) -> range:
        return range(-1, self.J + 1)

    def block(self, j: int) -> np.ndarray:
        self._check(j)
        return self.rho[j + 1]

    def low(self, j: int) -> np.ndarray:
        """Multiplier of ``S_j = sum_{i < j-1} Delta_i``."""
        if j <= 0:
            return np.zeros_like(self.chi)
        if j - 2 >= self.J:
            return np.ones_like(self.chi)
        return self.rho[: j].sum(axis=0)

    def _check(self, j: int) -> None:
        if not -1 <= j <= self.J:
            raise IndexError(f"block index {j} outside [-1, {self.J}]")


def top_level(n: int) -> int:
    return int(np.log2(n)) - 2


@lru_cache(maxsize=None)
def make_partition(n: int | Grid) -> DyadicPartition:
    g = n if isinstance(n, Grid) else get_grid(n)
    J = top_level(g.n)
    if J < 2:
        raise ValueError(f"grid n={g.n} too small for J >= 2")
    r = g.kabs
    chis = [chi(r / 2.0 ** j) for j in range(J + 1)]
    rho = np.empty((J + 2,) + r.shape)
    rho[0] = chis[0]
    for j in range(J):
        rho[j + 1] = chis[j + 1] - chis[j]
    rho[J + 1] = 1.0 - chis[J]
    rho.setflags(write=False)
    c = chis[0].copy()
    c.setflags(write=False)
    return DyadicPartition(g, J, c, rho)


def partition_of(f: np.ndarray) -> DyadicPartition:
    return make_partition(f.shape[-1])


def lp_blocks(f: np.ndarray) -> np.ndarray:
    """All blocks stacked on a new leading axis: ``out[j + 1] = Delta_j f``."""
    P = partition_of(f)
    F = hat(f)
    return unhat(P.rho.reshape((P.J + 2,) + (1,) * (F.ndim - 2) + P.rho.shape[1:]) * F, f.shape[-1])


def lp_block(f: np.ndarray, j: int) -> np.ndarray:
    P = partition_of(f)
    return unhat(hat(f) * P.block(j), f.shape[-1])


def lp_low(f: np.ndarray, j: int) -> np.ndarray:
    P = partition_of(f)
    if not -1 <= j <= P.J:
        raise IndexError(f"block index {j} outside [-1, {P.J}]")
    return unhat(hat(f) * P.low(j), f.shape[-1])


# --- multipliers --------------------------------------------------------------

def fourier_multiplier(f: np.ndarray, m) -> np.ndarray:
    """Apply ``m(k)``; ``m`` is an array on the half-plane lattice or a callable of (kx, ky)."""
    g = grid_of(f)
    M = m(g.kx, g.ky) if callable(m) else m
    return unhat(hat(f) * M, g.n)


def laplacian(f: np.ndarray) -> np.ndarray:
    g = grid_of(f)
    return unhat(-g.k2 * hat(f), g.n)


def inv_laplacian(f: np.ndarray) -> np.ndarray:
    """Zero-mean solution of ``-Delta g = f``."""
    g = grid_of(f)
    F = hat(f)
    scale = g.n ** 2 * g.cell_area * max(float(np.max(np.abs(f))), 1e-300)
    if np.any(np.abs(F[..., 0, 0]) > 1e-10 * scale):
        raise ValueError("inv_laplacian: input has nonzero mean")
    k2 = g.k2.copy()
    k2[0, 0] = 1.0
    M = 1.0 / k2
    M[0, 0] = 0.0
    return unhat(F * M, g.n)


def heat_multiplier(n: int, eta: float, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("heat_propagate: negative time")
    return np.exp(-eta * t * get_grid(n).k2)


def heat_propagate(f: np.ndarray, eta: float, t: float) -> np.ndarray:
    n = f.shape[-1]
    if t == 0:
        return strip_nyquist(f)
    return unhat(hat(f) * heat_multiplier(n, eta, t), n)


# --- dealiased products -------------------------------------------------------

def _pad(F, n, m):
    h = n // 2
    out = np.zeros(F.shape[:-2] + (m, m // 2 + 1), dtype=complex)
    out[..., :h, :h] = F[..., :h, :h]
    out[..., m - h + 1:, :h] = F[..., n - h + 1:, :h]
    return out


def _trunc(G, m, n):
    h = n // 2
    out = np.zeros(G.shape[:-2] + (n, h + 1), dtype=complex)
    out[..., :h, :h] = G[..., :h, :h]
    out[..., n - h + 1:, :h] = G[..., m - h + 1:, :h]
    return out


def fine_size(n: int) -> int:
    return 3 * n // 2


def to_fine(f: np.ndarray) -> np.ndarray:
    """Band-limited interpolation onto the 3n/2 grid."""
    n = f.shape[-1]
    m = fine_size(n)
    return sfft.irfft2(_pad(_rfft2(f), n, m), s=(m, m), axes=(-2, -1), workers=workers()) * (m / n) ** 2


def from_fine(f_fine: np.ndarray, n: int) -> np.ndarray:
    m = f_fine.shape[-1]
    G = _trunc(_rfft2(f_fine), m, n) * (n / m) ** 2
    return sfft.irfft2(G, s=(n, n), axes=(-2, -1), workers=workers())


def dealiased_product(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Product of band-limited representatives by 3/2-rule zero padding."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n = f.shape[-1]
    if g.shape[-1] != n:
        raise ValueError("dealiased_product: grid mismatch")
    return from_fine(to_fine(f) * to_fine(g), n)


def dealiased_apply(F, f: np.ndarray) -> np.ndarray:
    """Evaluate a pointwise function on the fine grid and project back."""
    n = f.shape[-1]
    ff = to_fine(f)
    return from_fine(np.broadcast_to(np.asarray(F(ff), dtype=float), ff.shape), n)


# --- synthesis ----------------------------------------------------------------

def _phases(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.random((n, n)))


def synthesize(n: int, alpha: float, seed: int, amplitude: float | None = 1.0,
               block_normalized: bool = False) -> np.ndarray:
    """Random-phase field with ``|f_hat(k)| ~ |k|^(-alpha-1)``, block sup norms ``~ 2^(-j alpha)``.

    The plain recipe carries a slowly growing sup-norm factor per block (more
    independent extrema at high frequency).  ``block_normalized`` rescales each
    block to sup norm exactly ``2^(-j alpha)`` before the overall normalization.
    """
    k = np.sqrt(np.fft.fftfreq(n, 1.0 / n)[:, None] ** 2 + np.fft.fftfreq(n, 1.0 / n)[None, :] ** 2)
    k[0, 0] = 1.0
    A = k ** (-alpha - 1.0) * _phases(n, seed)
    A[0, 0] = 0.0
    f = np.fft.ifft2(A).real * n ** 2 / TWO_PI ** 2
    f = strip_nyquist(f)
    if block_normalized:
        B = lp_blocks(f)
        lv = np.arange(-1, B.shape[0] - 1).reshape(-1, 1, 1)
        sup = np.abs(B).reshape(B.shape[0], -1).max(axis=1).reshape(-1, 1, 1)
        f = np.sum(np.where(sup > 0, B / np.where(sup > 0, sup, 1.0), 0.0) * 2.0 ** (-lv * alpha), axis=0)
    return amplitude * f / max(np.max(np.abs(f)), 1e-300) if amplitude is not None else f


def lacunary(n: int, beta: float, seed: int) -> np.ndarray:
    """One cosine per dyadic block, ``||Delta_j f||_inf = 2^(-j beta)`` for ``1 <= j <= J``.

    Wave vectors ``|k| = 1.5 * 2^j`` sit where the block multiplier is one, so the
    field is exactly in ``C^beta`` with no logarithmic corrections.  Orientation
    (x or y axis) and phase are random.
    """
    rng = np.random.default_rng(seed)
    J = top_level(n)
    X, Y = get_grid(n).x
    f = np.zeros((n, n))
    for j in range(1, J + 1):
        k = 3 * 2 ** (j - 1) * np.eye(2, dtype=int)[rng.integers(2)]
        f += 2.0 ** (-j * beta) * np.cos(k[0] * X + k[1] * Y + rng.uniform(0, TWO_PI))
    return f


def radial_field(n: int, s: float) -> np.ndarray:
    """Coherent (zero-phase) field ``f_hat(k) = |k|^-s`` for ``k != 0``."""
    g = get_grid(n)
    k = g.kabs.copy()
    k[0, 0] = 1.0
    F = k ** (-s)
    F[0, 0] = 0.0
    return unhat(F, n)


def band_limited_random(n: int, seed: int, kmax: float | None = None) -> np.ndarray:
    """Smooth random field with coefficients supported on ``|k_i| <= kmax`` (default n/3)."""
    rng = np.random.default_rng(seed)
    kmax = n // 3 if kmax is None else kmax
    f = rng.standard_normal((n, n))
    g = get_grid(n)
    mask = (np.abs(g.kx) <= kmax) & (np.abs(g.ky) <= kmax)
    return unhat(hat(f) * mask, n)


# --- time slabs ---------------------------------------------------------------

@dataclass(frozen=True)
class TimeSlab:
    """Frames ``values[m]`` at times ``t0 + m * dt``."""

    values: np.ndarray = field(repr=False)
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.shape[0] < 2:
            raise ValueError(f"a slab needs >= 2 frames of n x n, got shape {v.shape}")
        if not self.dt > 0:
            raise ValueError("slab time step must be positive")
        grid_of(v)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.frames)

    @property
    def T(self) -> float:
        return self.dt * (self.frames - 1)

    def like(self, values: np.ndarray) -> "TimeSlab":
        return TimeSlab(values, self.dt, self.t0)

    def aligned(self, other: "TimeSlab") -> bool:
        return (self.frames == other.frames and self.n == other.n
                and np.isclose(self.dt, other.dt, rtol=1e-12) and np.isclose(self.t0, other.t0))

    @classmethod
    def constant(cls, f: np.ndarray, frames: int, dt: float) -> "TimeSlab":
        return cls(np.repeat(np.asarray(f, dtype=float)[None], frames, axis=0), dt)
