"""White noise, mollification, renormalization constants and the enhanced noise."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .besov import resonant
from .nonlinear import EtaGrid, ParamField
from .spectral import TWO_PI, get_grid, hat, inv_laplacian, laplacian, unhat, weighted_sum, workers


@dataclass(frozen=True)
class Mollifier:
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "sharp"):
            raise ValueError(f"unknown mollifier kind {self.kind!r}")

    def profile(self, r):
        """``psi_hat`` as a function of ``|eps k|``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * r ** 2)
        return (r <= 1.0).astype(float)

    def multiplier(self, eps: float, n: int) -> np.ndarray:
        if not eps > 0:
            raise ValueError("eps must be positive")
        return self.profile(eps * get_grid(n).kabs)


# --- white noise --------------------------------------------------------------

@lru_cache(maxsize=None)
def _mode_order(n: int):
    """Half-plane representatives sorted by (square shell, k1, k2).

    The order restricted to shells <= s does not depend on ``n``, so a coarser
    grid sees exactly the leading draws of a finer one.
    """
    S = n // 2 - 1
    k = np.arange(-S, S + 1)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    K1, K2 = K1.ravel(), K2.ravel()
    half = (K1 > 0) | ((K1 == 0) & (K2 > 0))
    K1, K2 = K1[half], K2[half]
    shell = np.maximum(np.abs(K1), np.abs(K2))
    idx = np.lexsort((K2, K1, shell))
    return K1[idx], K2[idx]


def sample_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0])


def sample_white_noise(n: int, seed: int) -> np.ndarray:
    """Zero-mean white noise with ``E|xi_hat(k)|^2 = (2pi)^2`` on every resolved ``k != 0``.

    Mode ``k`` always receives the same draw for a given seed, whatever the grid.
    """
    K1, K2 = _mode_order(n)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    r = rng.standard_normal((len(K1), 2))
    z = (r[:, 0] + 1j * r[:, 1]) * (TWO_PI / np.sqrt(2.0))
    C = np.zeros((n, n), dtype=complex)
    C[K1 % n, K2 % n] = z
    C[(-K1) % n, (-K2) % n] = np.conj(z)
    return np.fft.ifft2(C).real * n * n / TWO_PI ** 2


def resolved_modes(n: int) -> int:
    return (n - 1) ** 2 - 1


def mollify(xi: np.ndarray, eps: float, m: Mollifier | None = None) -> np.ndarray:
    m = m or Mollifier()
    n = xi.shape[-1]
    return unhat(hat(xi) * m.multiplier(eps, n), n)


def make_vartheta(xi_eps: np.ndarray, eta: EtaGrid) -> ParamField:
    """Stationary solution ``(-eta Delta)^-1 xi`` as the power field ``v / eta``."""
    return ParamField.from_power(eta, inv_laplacian(xi_eps), 1.0)


# --- renormalization constants ------------------------------------------------

def sigma_eps(m: Mollifier, eps: float, n: int) -> float:
    """``(2pi)^-2 sum_{k != 0} psi_hat(eps k)^2 / |k|^2`` over the resolved lattice.

    The ``(2pi)^-2`` matches the coefficient normalization, so that
    ``E[theta o Delta theta](eta) = -sigma / eta^2`` on the discrete torus.
    """
    g = get_grid(n)
    w = g.multiplicity.copy()
    w[0, 0] = 0.0
    k2 = np.where(g.k2 > 0, g.k2, 1.0)
    terms = (w * m.multiplier(eps, n) ** 2 / k2).ravel()
    order = np.argsort(-g.k2.ravel(), kind="stable")
    return math.fsum(terms[order]) / TWO_PI ** 2


def h_eps(eta: float, sigma: float) -> float:
    if eta <= 0:
        raise ValueError("eta must be positive")
    return -sigma / eta ** 2


def counterterm_rhs(a1: Callable, da1: Callable, a2: Callable, da2: Callable,
                    u: np.ndarray, sigma: float, lam: float = 0.5) -> np.ndarray:
    """``(a1' a2^2 / a1^2 - a2' a2 / a1) sigma`` pointwise."""
    A1, A2 = a1(u), a2(u)
    if np.min(A1) < lam / 2:
        raise ValueError("diffusion coefficient degenerates below lambda/2")
    return (da1(u) * A2 ** 2 / A1 ** 2 - da2(u) * A2 / A1) * sigma


def h_eps_general(eta: tuple, etap: tuple, F: Callable, dF1: Callable, sigma: float):
    """``(eta2'/eta1) dF1(eta2, eta2) sigma - (eta1'/eta1^2) F(eta2, eta2) sigma``."""
    e1, e2 = eta
    p1, p2 = etap
    if np.min(e1) <= 0:
        raise ValueError("eta1 must be positive")
    return (p2 / e1) * dF1(e2, e2) * sigma - (p1 / e1 ** 2) * F(e2, e2) * sigma


# --- enhanced noise -----------------------------------------------------------

@dataclass(frozen=True)
class EnhancedNoise:
    xi_eps: np.ndarray = field(repr=False)
    theta: ParamField = field(repr=False)
    xi2: ParamField = field(repr=False)
    raw2: ParamField = field(repr=False)
    sigma: float
    eps: float
    seed: int | None
    mollifier: Mollifier
    eta: EtaGrid

    @property
    def n(self) -> int:
        return self.xi_eps.shape[-1]


def enhanced_noise(xi: np.ndarray, eps: float, m: Mollifier | None, eta: EtaGrid,
                   seed: int | None = None, sigma: float | None = None) -> EnhancedNoise:
    """``(xi_eps, theta o Delta theta - H)`` with ``H = -sigma / eta^2``.

    ``sigma`` defaults to the lattice sum on the same grid and mollifier.
    """
    m = m or Mollifier()
    n = xi.shape[-1]
    xe = mollify(xi, eps, m)
    xe = xe - xe.mean()
    th = make_vartheta(xe, eta)
    v = th.base
    s = sigma_eps(m, eps, n) if sigma is None else float(sigma)
    raw = resonant(v, laplacian(v))
    return EnhancedNoise(
        xe, th,
        ParamField.from_power(eta, raw + s, 2.0),
        ParamField.from_power(eta, raw, 2.0),
        s, eps, seed, m, eta,
    )


def zero_noise(n: int, eta: EtaGrid) -> EnhancedNoise:
    z = np.zeros((n, n))
    return EnhancedNoise(z, ParamField.from_power(eta, z, 1.0), ParamField.from_power(eta, z, 2.0),
                         ParamField.from_power(eta, z, 2.0), 0.0, float("inf"), None, Mollifier(), eta)


# --- Monte Carlo --------------------------------------------------------------

@dataclass(frozen=True)
class WickEstimate:
    mean: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    spatial_mean: float
    spatial_stderr: float
    samples: int


def _reduce(samples: np.ndarray) -> WickEstimate:
    M = samples.shape[0]
    avg = samples.reshape(M, -1).mean(axis=1)
    return WickEstimate(samples.mean(axis=0), samples.std(axis=0, ddof=1) / np.sqrt(M),
                        float(avg.mean()), float(avg.std(ddof=1) / np.sqrt(M)), M)


def parallel_map(fn, items: Sequence, threads: int | None = None) -> list:
    """Ordered map; results do not depend on the worker count."""
    threads = threads or workers()
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def wick_mc_estimate(M: int, eps: float, eta: float, n: int, m: Mollifier | None = None,
                     seed: int = 0, threads: int | None = None) -> WickEstimate:
    """Mean and standard error of ``theta_eps o Delta theta_eps (eta)`` over ``M`` seeds."""
    if M < 2:
        raise ValueError("need at least two samples")
    m = m or Mollifier()

    def one(i):
        xe = mollify(sample_white_noise(n, sample_seed(seed, i)), eps, m)
        v = inv_laplacian(xe - xe.mean()) / eta
        return resonant(v, laplacian(v))

    return _reduce(np.stack(parallel_map(one, range(M), threads)))


# --- parametric noise ---------------------------------------------------------

@dataclass(frozen=True)
class ParamNoise:
    """``xi(eta2, .) = sum_i c_i(eta2) W_i`` with independent white noises ``W_i``."""

    factors: tuple
    noises: np.ndarray = field(repr=False)

    def at(self, eta2: float) -> np.ndarray:
        if not self.factors:
            return np.zeros(self.noises.shape[-2:])
        c = np.array([f(eta2) for f in self.factors])
        return weighted_sum(c, self.noises)

    def d_eta(self, eta2: float, h: float = 1e-6) -> np.ndarray:
        if not self.factors:
            return np.zeros(self.noises.shape[-2:])
        c = np.array([(f(eta2 + h) - f(eta2 - h)) / (2 * h) for f in self.factors])
        return weighted_sum(c, self.noises)

    def nodes_values(self, etas) -> np.ndarray:
        return np.stack([self.at(e) for e in etas])


def sample_param_noise(factors: Sequence[tuple], n: int, eps: float | None = None,
                       m: Mollifier | None = None) -> ParamNoise:
    """Low-rank parametric noise; ``factors`` holds ``(c_i, seed_i)`` pairs."""
    cs = tuple(f for f, _ in factors)
    if not factors:
        return ParamNoise((), np.zeros((0, n, n)))
    W = np.stack([sample_white_noise(n, s) for _, s in factors])
    if eps is not None:
        W = mollify(W, eps, m)
    return ParamNoise(cs, W)
