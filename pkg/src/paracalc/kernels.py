"""Dense-kernel reference for the paradifferential commutator (tiny grids only).

Every operator is assembled as an explicit matrix from exponential sums, with
no FFTs, so it shares no code path with the fast operators.  Only the radial
cutoff profile is reused.
"""
from __future__ import annotations

import numpy as np

from .nonlinear import EtaGrid, ParamField
from .spectral import TimeSlab, chi

MAX_N = 16


class _Dense:
    def __init__(self, n: int):
        if n > MAX_N:
            raise ValueError(f"kernel reference limited to n <= {MAX_N}")
        self.n = n
        self.N = n * n
        h = 2 * np.pi / n
        s = np.arange(n) * h
        X, Y = np.meshgrid(s, s, indexing="ij")
        self.pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        k1 = np.fft.fftfreq(n, 1.0 / n)
        K1, K2 = np.meshgrid(k1, k1, indexing="ij")
        self.k = np.stack([K1.ravel(), K2.ravel()], axis=1)
        self.kabs = np.sqrt((self.k ** 2).sum(1))
        self.keep = (self.k[:, 0] != -n // 2) & (self.k[:, 1] != -n // 2)
        self.J = int(np.log2(n)) - 2
        # synthesis / analysis on the grid
        self.Ek = np.exp(1j * self.pts @ self.k.T)  # (N points, N modes)
        m = 3 * n // 2
        sf = np.arange(m) * (2 * np.pi / m)
        XF, YF = np.meshgrid(sf, sf, indexing="ij")
        self.fine = np.stack([XF.ravel(), YF.ravel()], axis=1)
        kk = self.k[self.keep]
        up = np.exp(1j * self.fine @ kk.T) @ np.exp(-1j * self.pts @ kk.T).T / self.N
        down = np.exp(1j * self.pts @ kk.T) @ np.exp(-1j * self.fine @ kk.T).T / (m * m)
        self.up, self.down = up.real, down.real

    def mult(self, m: np.ndarray, raw: bool) -> np.ndarray:
        """Matrix of the Fourier multiplier ``m`` (values per lattice mode)."""
        w = m if raw else m * self.keep
        return ((self.Ek * w[None]) @ self.Ek.conj().T).real / self.N

    def rho(self, j: int) -> np.ndarray:
        r = self.kabs
        if j == -1:
            return chi(r)
        if j == self.J:
            return 1.0 - chi(r / 2.0 ** j)
        return chi(r / 2.0 ** (j + 1)) - chi(r / 2.0 ** j)

    def low(self, j: int) -> np.ndarray:
        out = np.zeros(self.N)
        for i in range(-1, j - 1):
            out = out + self.rho(i)
        return out

    def dealias(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return self.down @ ((self.up @ f) * (self.up @ g))


def _lagrange(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = []
    for m, em in enumerate(nodes):
        v = np.ones_like(x)
        for j, ej in enumerate(nodes):
            if j != m:
                v = v * (x - ej) / (em - ej)
        out.append(v)
    return np.stack(out)


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 0) & (r < 1)
    out[inside] = np.exp(-1.0 / (r[inside] * (1 - r[inside])))
    return out


def _time_matrix(level: int, dt: float, frames: int) -> np.ndarray:
    s = 4.0 ** level
    lags = np.arange(int(np.ceil(1.0 / (s * dt))) + 1)
    w = _bump(s * dt * lags)
    W = np.zeros((frames, frames))
    if w.sum() == 0:
        return np.eye(frames)
    w = w / w.sum()
    for t in range(frames):
        for b, wb in enumerate(w):
            W[t, max(t - b, 0)] += wb
    return W


def _dt_matrix(frames: int, dt: float) -> np.ndarray:
    D = np.zeros((frames, frames))
    for t in range(1, frames - 1):
        D[t, t - 1], D[t, t + 1] = -1.0, 1.0
    D[0, :3] = [-3.0, 4.0, -1.0]
    D[-1, -3:] = [1.0, -4.0, 3.0]
    return D / (2 * dt)


def psi_kernel_reference(g: TimeSlab, W: ParamField) -> TimeSlab:
    """Kernel form ``R1 + R2 + R0`` of the commutator, assembled from dense matrices.

    ``R1 = g <~ P(Delta W) - P(eta Delta W)``, ``R2 = g <~ [Delta, P] W - [d_t, P] W``
    and ``R0`` restores the two lowest blocks that ``<~`` (mass-one low-pass)
    adds relative to the ordinary paraproduct.  ``P = Pi_<<(g, .)``.
    """
    n, F, dt = g.n, g.frames, g.dt
    D = _Dense(n)
    eta: EtaGrid = W.eta
    levels = range(-1, D.J + 1)
    gv = g.values.reshape(F, -1)
    comps = W.values.reshape(eta.M, F, -1) if W.is_slab else np.repeat(
        W.values.reshape(eta.M, 1, -1), F, axis=1)

    blk_raw = {j: D.mult(D.rho(j), True) for j in levels}
    tlow_raw = {j: D.mult(D.low(max(j, 1)), True) for j in levels}
    blk = {j: D.mult(D.rho(j), False) for j in levels}
    tlow = {j: D.mult(D.low(max(j, 1)), False) for j in levels}
    lap = D.mult(-D.kabs ** 2, False)
    tw = {j: _time_matrix(j, dt, F) for j in levels}
    Dt = _dt_matrix(F, dt)

    ell = _lagrange(eta.nodes, gv)  # (M, F, N)

    def modulations(coef):
        return {j: np.einsum("ts,msx->mtx", tw[j], np.einsum("xy,msy->msx", tlow_raw[j], coef))
                for j in levels}

    A = modulations(ell)
    A_eta = modulations(ell * gv[None])

    def P(mods, comp):
        out = np.zeros((F, D.N))
        for j in levels:
            out += np.einsum("mtx,mtx->tx", mods[j], np.einsum("xy,mty->mtx", blk_raw[j], comp))
        return out

    def tilde_para(f, z):
        out = np.zeros((F, D.N))
        for t in range(F):
            for j in levels:
                out[t] += D.dealias(tlow[j] @ f[t], blk[j] @ z[t])
        return out

    lapW = np.einsum("xy,mty->mtx", lap, comps)
    PW = P(A, comps)
    X = P(A, lapW)
    Y = P(A_eta, lapW)
    lap_PW = PW @ lap.T
    comm_lap = lap_PW - X
    comm_t = Dt @ PW - P(A, np.einsum("ts,msx->mtx", Dt, comps))
    R1 = tilde_para(gv, X) - Y
    R2 = tilde_para(gv, comm_lap) - comm_t
    low2 = blk[-1] + blk[0]
    R0 = -np.stack([D.dealias(blk[-1] @ gv[t], low2 @ lap_PW[t]) for t in range(F)])
    return g.like((R1 + R2 + R0).reshape(F, n, n))
