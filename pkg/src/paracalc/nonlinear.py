"""Nonlinear paraproducts over a parameter eta in [lam, 1].

A parametric field ``h(eta, x)`` is stored separably, ``h = sum_k c_k(eta) h_k(x)``:
either one closed-form power term ``base * eta^-p`` or the Lagrange basis on a
Chebyshev grid.  Every operator below is linear in ``h``, so it acts on each
term with the modulation ``c_k(g(x))`` and the identities between
``Pi_<``, ``Pi_o``, ``Pi_>`` and the composition hold termwise.  Products in
this module are pointwise on the grid; the composition is pointwise by nature.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

from .besov import TimeKernel, para_lt, resonant, time_convolve
from .spectral import TimeSlab, get_grid, hat, laplacian, make_partition, unhat, weighted_sum, workers


# --- parameter grid -----------------------------------------------------------

@dataclass(frozen=True)
class EtaGrid:
    """Chebyshev-Lobatto nodes on ``[lam, 1]``, ascending."""

    lam: float = 0.5
    M: int = 8

    def __post_init__(self):
        if self.M < 5:
            raise ValueError("EtaGrid needs at least 5 nodes")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")

    @cached_property
    def nodes(self) -> np.ndarray:
        j = np.arange(self.M)
        return 0.5 * (1 + self.lam) - 0.5 * (1 - self.lam) * np.cos(np.pi * j / (self.M - 1))

    @cached_property
    def weights(self) -> np.ndarray:
        """Barycentric weights of the Lobatto nodes."""
        w = (-1.0) ** np.arange(self.M)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def basis(self, eta) -> np.ndarray:
        """Lagrange basis values, shape ``(M,) + eta.shape``, by the barycentric formula."""
        eta = np.asarray(eta, dtype=float)
        d = eta[None] - self.nodes.reshape((-1,) + (1,) * eta.ndim)
        hit = d == 0.0
        t = self.weights.reshape((-1,) + (1,) * eta.ndim) / np.where(hit, 1.0, d)
        out = t / weighted_sum(np.ones(self.M), t)
        on_node = hit.any(axis=0)
        return np.where(on_node[None], hit.astype(float), out)

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        x, w = self.nodes, self.weights
        dx = x[:, None] - x[None, :]
        np.fill_diagonal(dx, 1.0)
        D = (w[None, :] / w[:, None]) / dx
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    def check(self, eta, tol: float = 1e-9) -> None:
        eta = np.asarray(eta)
        if eta.size and (eta.min() < self.lam - tol or eta.max() > 1.0 + tol):
            raise ValueError(f"parameter values outside [{self.lam}, 1]")


# --- parametric fields --------------------------------------------------------

@dataclass(frozen=True)
class ParamField:
    """``h(eta, .)`` on an :class:`EtaGrid`; a slab when the spatial part has a time axis.

    ``power`` set means ``h = base * eta^-power`` exactly.  ``derivs`` may carry
    exact first and second eta-derivatives at the nodes.
    """

    eta: EtaGrid
    nodes_values: np.ndarray | None = field(default=None, repr=False)
    power: float | None = None
    base: np.ndarray | None = field(default=None, repr=False)
    derivs: tuple | None = field(default=None, repr=False)
    dt: float | None = None

    @classmethod
    def from_power(cls, eta: EtaGrid, base: np.ndarray, p: float, dt: float | None = None):
        return cls(eta, None, float(p), np.asarray(base, dtype=float), None, dt)

    @classmethod
    def constant(cls, eta: EtaGrid, base: np.ndarray, dt: float | None = None):
        return cls.from_power(eta, base, 0.0, dt)

    @classmethod
    def from_nodes(cls, eta: EtaGrid, values: np.ndarray, derivs=None, dt: float | None = None):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != eta.M:
            raise ValueError("node axis does not match the eta grid")
        return cls(eta, values, None, None, derivs, dt)

    @property
    def is_power(self) -> bool:
        return self.power is not None

    @property
    def eta_independent(self) -> bool:
        return self.power == 0.0

    @property
    def shape(self) -> tuple:
        return self.base.shape if self.is_power else self.nodes_values.shape[1:]

    @property
    def is_slab(self) -> bool:
        return len(self.shape) == 3

    @property
    def values(self) -> np.ndarray:
        if self.is_power:
            w = self.eta.nodes ** (-self.power)
            return w.reshape((-1,) + (1,) * self.base.ndim) * self.base[None]
        return self.nodes_values

    def at(self, eta_star: float) -> np.ndarray:
        """Value at an arbitrary parameter, closed form when available."""
        self.eta.check(eta_star, tol=0.0)
        if self.is_power:
            return self.base * float(eta_star) ** (-self.power)
        return weighted_sum(self.eta.basis(np.array(eta_star)), self.nodes_values)

    def derivative(self, order: int) -> np.ndarray:
        """``d^order h / d eta^order`` at the nodes."""
        if order == 0:
            return self.values
        if self.is_power:
            p = self.power
            c = np.prod([-(p + i) for i in range(order)]) if order else 1.0
            w = c * self.eta.nodes ** (-p - order)
            return w.reshape((-1,) + (1,) * self.base.ndim) * self.base[None]
        if self.derivs is not None and order <= len(self.derivs):
            return self.derivs[order - 1]
        D = np.linalg.matrix_power(self.eta.diff_matrix, order)
        return np.stack([weighted_sum(row, self.nodes_values) for row in D])

    # separable form
    def coeff_key(self):
        return ("power", self.power) if self.is_power else ("nodes",)

    def components(self) -> np.ndarray:
        return self.base[None] if self.is_power else self.nodes_values

    def map_nodes(self, fn) -> "ParamField":
        return ParamField.from_nodes(self.eta, np.stack([fn(v) for v in self.values]), dt=self.dt)

    def scaled(self, s: float) -> "ParamField":
        if self.is_power:
            return replace(self, base=s * self.base)
        d = None if self.derivs is None else tuple(s * x for x in self.derivs)
        return replace(self, nodes_values=s * self.nodes_values, derivs=d)

    def frame(self, m: int) -> "ParamField":
        if not self.is_slab:
            return self
        if self.is_power:
            return ParamField.from_power(self.eta, self.base[m], self.power)
        d = None if self.derivs is None else tuple(x[:, m] for x in self.derivs)
        return ParamField.from_nodes(self.eta, self.nodes_values[:, m], d)


def coefficients(eta: EtaGrid, key, g: np.ndarray) -> np.ndarray:
    """Separable coefficients ``c_k(g)`` stacked on a leading axis."""
    if key[0] == "power":
        return (g ** (-key[1]))[None]
    return eta.basis(g)


# --- raw block machinery (Nyquist kept inside the top block) -----------------

def _rhat(f):
    return sfft.rfft2(f, axes=(-2, -1), workers=workers())


def _runhat(F, n):
    return sfft.irfft2(F, s=(n, n), axes=(-2, -1), workers=workers())


@lru_cache(maxsize=None)
def _tilde_low(n: int) -> np.ndarray:
    """Mass-one low-pass multipliers: ``S~_q = S_max(q, 1)``."""
    P = make_partition(n)
    out = np.stack([P.low(max(q, 1)) for q in P.levels])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _res_mult(n: int) -> np.ndarray:
    """Resonant partners of block ``q`` without the pairs already in ``Pi_<``."""
    r = make_partition(n).rho
    out = r.copy()
    out[1:] += r[:-1]
    out[:-1] += r[1:]
    out[0] -= r[0]
    out[1] -= r[0]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _low_mult(n: int) -> np.ndarray:
    P = make_partition(n)
    out = np.stack([P.low(q) for q in P.levels])
    out.setflags(write=False)
    return out


def raw_blocks(f: np.ndarray) -> np.ndarray:
    n = f.shape[-1]
    rho = make_partition(n).rho
    F = _rhat(f)
    return np.stack([_runhat(F * r, n) for r in rho])


def _apply(F: np.ndarray, mult: np.ndarray, n: int) -> np.ndarray:
    return _runhat(F * mult, n)


# --- modulation cache ---------------------------------------------------------

class Modulator:
    """Smoothed modulations ``Q_i * S~_i c_k(g)`` per block, cached per coefficient family."""

    def __init__(self, g, eta: EtaGrid, kernel: TimeKernel | None = None):
        self.slab = isinstance(g, TimeSlab)
        self.values = g.values if self.slab else np.asarray(g, dtype=float)
        self.dt = g.dt if self.slab else None
        eta.check(self.values)
        self.eta = eta
        self.kernel = kernel or TimeKernel()
        self.n = self.values.shape[-1]
        self._cache: dict = {}

    def lows(self, key) -> list[np.ndarray]:
        if key not in self._cache:
            C = coefficients(self.eta, key, self.values)
            Ch = _rhat(C)
            out = []
            for i, mult in zip(make_partition(self.n).levels, _tilde_low(self.n)):
                A = _apply(Ch, mult, self.n)
                if self.slab:
                    W = self.kernel.matrix(i, self.dt, self.values.shape[0])
                    A = np.moveaxis(time_convolve(W, np.moveaxis(A, 1, 0)), 0, 1)
                out.append(A)
            self._cache[key] = out
        return self._cache[key]


def _check_range(eta: EtaGrid, g: np.ndarray) -> None:
    eta.check(g)


# --- nonlinear paraproducts ---------------------------------------------------

def nl_para_lt(g: np.ndarray, h: ParamField, mod: Modulator | None = None) -> np.ndarray:
    """``Pi_<(g, h) = sum_q sum_k S~_q[c_k(g)] Delta_q h_k``."""
    if h.eta_independent:
        _check_range(h.eta, g)
        return np.broadcast_to(h.base, np.broadcast_shapes(h.base.shape, np.shape(g))).copy()
    mod = mod or Modulator(g, h.eta)
    A = mod.lows(h.coeff_key())
    Hb = raw_blocks(h.components())
    return sum(np.sum(a * b, axis=0) for a, b in zip(A, Hb))


def nl_para_res(g: np.ndarray, h: ParamField) -> np.ndarray:
    _check_range(h.eta, g)
    n = g.shape[-1]
    C = _rhat(coefficients(h.eta, h.coeff_key(), g))
    Hb = raw_blocks(h.components())
    return sum(np.sum(_apply(C, m, n) * b, axis=0) for m, b in zip(_res_mult(n), Hb))


def nl_para_gt(g: np.ndarray, h: ParamField) -> np.ndarray:
    _check_range(h.eta, g)
    n = g.shape[-1]
    Cb = raw_blocks(coefficients(h.eta, h.coeff_key(), g))
    H = _rhat(h.components())
    return sum(np.sum(c * _apply(H, m, n), axis=0) for c, m in zip(Cb, _low_mult(n)))


def nl_compose(g: np.ndarray, h: ParamField) -> np.ndarray:
    """``Pi_diamond(g, h)(x) = h(g(x), x)``; ``g`` may carry a time axis matching a slab ``h``."""
    g = np.asarray(g, dtype=float)
    _check_range(h.eta, g)
    C = coefficients(h.eta, h.coeff_key(), g)
    return np.sum(C * h.components(), axis=0)


def nl_para_smoothed(g: TimeSlab, h: ParamField, kernel: TimeKernel | None = None,
                     mod: Modulator | None = None) -> TimeSlab:
    """``Pi_<<(g, h)``: frame ``t`` gets ``sum_i sum_k (Q_i * S~_i c_k(g))(t) Delta_i h_k(t)``."""
    if h.is_slab and h.shape[0] != g.frames:
        raise ValueError("nl_para_smoothed: misaligned slabs")
    if h.eta_independent:
        _check_range(h.eta, g.values)
        return g.like(np.broadcast_to(h.base, g.values.shape).copy())
    mod = mod or Modulator(g, h.eta, kernel)
    A = mod.lows(h.coeff_key())
    Hb = raw_blocks(h.components())
    if not h.is_slab:
        Hb = Hb[:, :, None]
    return g.like(sum(np.sum(a * b, axis=0) for a, b in zip(A, Hb)))


def self_resonance(h: ParamField) -> ParamField:
    """``(h o Delta h)(eta)`` nodewise; closed form for power fields."""
    if h.is_power:
        return ParamField.from_power(h.eta, resonant(h.base, laplacian(h.base)), 2 * h.power, h.dt)
    return h.map_nodes(lambda v: resonant(v, laplacian(v)))


def nl_commutator_Lambda(g: TimeSlab, h: ParamField, kernel: TimeKernel | None = None,
                         mod: Modulator | None = None) -> TimeSlab:
    """``Pi_<<(g,h) o Delta Pi_<<(g,h) - Pi_diamond(g, h o Delta h)``."""
    th = nl_para_smoothed(g, h, kernel, mod).values
    return g.like(resonant(th, laplacian(th)) - nl_compose(g.values, self_resonance(h)))


# --- parabolic operator and the paradifferential commutator -------------------

def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Centered differences on axis 0, second-order one-sided at both ends."""
    v = values
    if v.shape[0] < 3:
        raise ValueError("time derivative needs at least 3 frames")
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * dt)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dt)
    return d


def apply_L(W: ParamField, dt: float | None = None) -> ParamField:
    """``(L W)(eta) = d_t W(eta) - eta Delta W(eta)`` at the nodes."""
    dt = dt or W.dt
    if not W.is_slab:
        raise ValueError("apply_L needs a parametric slab")
    V = W.values
    Dt = np.stack([time_derivative(v, dt) for v in V])
    eta = W.eta.nodes.reshape(-1, 1, 1, 1)
    return ParamField.from_nodes(W.eta, Dt - eta * laplacian(V), dt=dt)


def para_Lt_op(g: TimeSlab, w: TimeSlab) -> TimeSlab:
    """``d_t w - g < Delta w``."""
    if not g.aligned(w):
        raise ValueError("para_Lt_op: misaligned slabs")
    return w.like(time_derivative(w.values, w.dt) - para_lt(g.values, laplacian(w.values)))


def psi(g: TimeSlab, W: ParamField, LW: ParamField, kernel: TimeKernel | None = None,
        mod: Modulator | None = None) -> TimeSlab:
    """``Pi_<<(g, L W) - Pi_<(g, L) Pi_<<(g, W)`` with ``L W`` supplied by the caller."""
    mod = mod or Modulator(g, W.eta, kernel)
    first = nl_para_smoothed(g, LW, kernel, mod).values
    second = para_Lt_op(g, nl_para_smoothed(g, W, kernel, mod)).values
    return g.like(first - second)


# --- parametric heat and Duhamel ----------------------------------------------

def _moments(lam: np.ndarray, h: float):
    """``m_p = int_0^h s^p exp(-lam s) ds`` for p = 0, 1, 2, stable for small ``lam h``."""
    x = lam * h
    e = np.exp(-x)
    small = x < 1e-2
    xs = np.where(small, 1.0, x)
    m0 = np.where(small, 0.0, (1 - e) / xs) * h
    m1 = np.where(small, 0.0, (1 - e * (1 + xs)) / xs ** 2) * h ** 2
    m2 = np.where(small, 0.0, (2 - e * (xs ** 2 + 2 * xs + 2)) / xs ** 3) * h ** 3
    if np.any(small):
        s0 = s1 = s2 = 0.0
        term = np.ones_like(x)
        for q in range(8):
            s0 = s0 + term / (q + 1)
            s1 = s1 + term / (q + 2)
            s2 = s2 + term / (q + 3)
            term = term * (-x) / (q + 1)
        m0 = np.where(small, s0 * h, m0)
        m1 = np.where(small, s1 * h ** 2, m1)
        m2 = np.where(small, s2 * h ** 3, m2)
    return m0, m1, m2


def duhamel_modes(f: TimeSlab, etas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exponential-integrator ``U_f`` and its first two eta-derivatives at each ``eta``."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    n, dt = f.n, f.dt
    k2 = get_grid(n).k2
    Fh = hat(f.values)
    out = [np.zeros((len(etas), f.frames, n, n)) for _ in range(3)]
    for a_i, eta in enumerate(etas):
        lam = eta * k2
        a = np.exp(-lam * dt)
        m0, m1, m2 = _moments(lam, dt)
        a1, a2 = -k2 * dt * a, k2 ** 2 * dt ** 2 * a
        b1, b2 = -k2 * m1, k2 ** 2 * m2
        U = np.zeros_like(Fh[0])
        U1 = np.zeros_like(U)
        U2 = np.zeros_like(U)
        seq = [[], [], []]
        for m in range(f.frames):
            seq[0].append(U)
            seq[1].append(U1)
            seq[2].append(U2)
            fm = Fh[m]
            U, U1, U2 = (a * U + m0 * fm,
                         a * U1 + a1 * U + b1 * fm,
                         a * U2 + 2 * a1 * U1 + a2 * U + b2 * fm)
        for d in range(3):
            out[d][a_i] = unhat(np.stack(seq[d]), n)
    return out[0], out[1], out[2]


def parametric_duhamel(f: TimeSlab, eta: EtaGrid) -> ParamField:
    U, U1, U2 = duhamel_modes(f, eta.nodes)
    return ParamField.from_nodes(eta, U, derivs=(U1, U2), dt=f.dt)


def heat_modes(u0s: np.ndarray, etas, frames: int, dt: float):
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    n = u0s.shape[-1]
    k2 = get_grid(n).k2
    F = hat(u0s)
    t = dt * np.arange(frames)
    out = []
    for eta in etas:
        E = np.exp(-eta * k2[None] * t[:, None, None]) * F[None]
        tk = -k2[None] * t[:, None, None]
        out.append((unhat(E, n), unhat(tk * E, n), unhat(tk ** 2 * E, n)))
    return tuple(np.stack([o[d] for o in out]) for d in range(3))


def parametric_heat(u0s: np.ndarray, eta: EtaGrid, frames: int, dt: float) -> ParamField:
    """``P_t u0s (eta) = exp(eta Delta t) u0s`` with exact eta-derivatives."""
    V, D1, D2 = heat_modes(u0s, eta.nodes, frames, dt)
    return ParamField.from_nodes(eta, V, derivs=(D1, D2), dt=dt)
