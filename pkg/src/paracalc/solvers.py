"""Classical spectral solver and the paracontrolled fixed-point solver.

Both target ``d_t u - a(u) Delta u = xi_eps + sigma a'(u) / a(u)^2`` on the torus.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .besov import TimeKernel, commutator_C, para_gt, para_lt, resonant
from .noise import EnhancedNoise, counterterm_rhs
from .nonlinear import (
    EtaGrid, Modulator, apply_L, ParamField, nl_compose, nl_para_lt, nl_para_smoothed,
    parametric_duhamel, parametric_heat, psi, time_derivative,
)
from .spectral import TimeSlab, dealiased_product, get_grid, hat, laplacian, unhat

log = logging.getLogger(__name__)

BLOWUP = 1e6


class SolverError(RuntimeError):
    pass


class NoContraction(SolverError):
    pass


# --- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionSpec:
    a: Callable
    da: Callable
    dda: Callable
    lam: float = 0.5
    name: str = "custom"


def default_diffusion() -> DiffusionSpec:
    return DiffusionSpec(
        lambda v: 0.75 + 0.25 * np.sin(v),
        lambda v: 0.25 * np.cos(v),
        lambda v: -0.25 * np.sin(v),
        0.5, "default",
    )


def constant_diffusion(c: float = 1.0) -> DiffusionSpec:
    return DiffusionSpec(
        lambda v: np.full(np.shape(v), float(c)),
        lambda v: np.zeros(np.shape(v)),
        lambda v: np.zeros(np.shape(v)),
        min(0.5, float(c)), f"constant:{c}",
    )


def diffusion_from_name(name: str) -> DiffusionSpec:
    if name == "default":
        return default_diffusion()
    if name.startswith("constant:"):
        return constant_diffusion(float(name.split(":", 1)[1]))
    raise ValueError(f"unknown diffusion {name!r}")


@dataclass(frozen=True)
class SolverConfig:
    n: int = 64
    T: float = 0.05
    dt: float = 1e-3
    eta_lam: float = 0.5
    eta_M: int = 8
    imex_split: float = 1.0
    picard_max: int = 25
    picard_tol: float = 1e-8
    damping: float = 1.0
    alpha: float = 0.8

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("T and dt must be positive")
        if not self.picard_tol > 0:
            raise ValueError("picard tolerance must be positive")

    @property
    def frames(self) -> int:
        return int(round(self.T / self.dt)) + 1

    @property
    def eta(self) -> EtaGrid:
        return EtaGrid(self.eta_lam, self.eta_M)


# --- classical solver ---------------------------------------------------------

def _phi_dt(lam: np.ndarray, dt: float) -> np.ndarray:
    """``(1 - exp(-lam dt)) / lam``, equal to ``dt`` at ``lam = 0``."""
    x = lam * dt
    small = x < 1e-8
    return np.where(small, dt * (1 - 0.5 * x), -np.expm1(-x) / np.where(small, 1.0, lam))


def _etd_solve(cfg: SolverConfig, a: Callable, forcing: Callable, u0: np.ndarray) -> TimeSlab:
    """Exponential Euler with the constant-coefficient part ``lam_bar Delta`` exact.

    ``u_{m+1} = e^{lam_bar Delta dt} u_m + dt phi1(lam_bar Delta dt) [(a(u_m) - lam_bar) Delta u_m + forcing(u_m)]``
    """
    n, dt, lb = u0.shape[-1], cfg.dt, cfg.imex_split
    k2 = get_grid(n).k2
    E = np.exp(-lb * k2 * dt)
    Phi = _phi_dt(lb * k2, dt)
    frames = cfg.frames
    out = np.empty((frames, n, n))
    U = hat(u0)
    u = unhat(U, n)
    for m in range(frames):
        out[m] = u
        if m == frames - 1:
            break
        lap = unhat(-k2 * U, n)
        N = dealiased_product(a(u) - lb, lap) + forcing(u)
        U = E * U + Phi * hat(N)
        u = unhat(U, n)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP:
            raise SolverError(f"instability at step {m + 1}: reduce dt")
    return TimeSlab(out, dt)


def solve_classical(cfg: SolverConfig, spec: DiffusionSpec, xi_eps: np.ndarray, sigma: float,
                    u0: np.ndarray) -> TimeSlab:
    def forcing(u):
        return xi_eps + sigma * spec.da(u) / spec.a(u) ** 2
    return _etd_solve(cfg, spec.a, forcing, u0)


def solve_classical_rhs(cfg: SolverConfig, spec1: DiffusionSpec, spec2: DiffusionSpec,
                        xi_eps: np.ndarray, sigma: float, u0: np.ndarray) -> TimeSlab:
    """Variant with multiplicative source ``a2(u) xi`` and its counterterm."""
    def forcing(u):
        return (dealiased_product(spec2.a(u), xi_eps)
                + counterterm_rhs(spec1.a, spec1.da, spec2.a, spec2.da, u, sigma, spec1.lam))
    return _etd_solve(cfg, spec1.a, forcing, u0)


def exact_linear(xi: np.ndarray, u0: np.ndarray, times) -> np.ndarray:
    """Per-mode closed form for ``a = 1``: ``e^{t Delta} u0 + int_0^t e^{(t-s) Delta} xi ds``."""
    n = u0.shape[-1]
    k2 = get_grid(n).k2
    U0, X = hat(u0), hat(xi)
    return np.stack([unhat(np.exp(-k2 * t) * U0 + _phi_dt(k2, t) * X, n) for t in np.atleast_1d(times)])


# --- paracontrolled solver ----------------------------------------------------

@dataclass
class ParacontrolledState:
    u: TimeSlab
    Usharp: ParamField
    u0sharp: np.ndarray
    theta_slab: TimeSlab | None = None
    F_prev: np.ndarray | None = None
    residuals: list = field(default_factory=list)
    damping: float = 1.0
    converged: bool = False


def usharp0(u0: np.ndarray, theta: ParamField, spec: DiffusionSpec) -> np.ndarray:
    """``u0 - Pi_<(a(u0), theta)``: the smoothed paraproduct at ``t = 0`` sees only ``u0``."""
    return u0 - nl_para_lt(spec.a(u0), theta)


class ParacontrolledSolver:
    """Picard iteration of the map ``Gamma`` for ``u = Pi_<<(a(u), theta + U# + P u0#)``."""

    def __init__(self, cfg: SolverConfig, data: EnhancedNoise, spec: DiffusionSpec, u0: np.ndarray,
                 kernel: TimeKernel | None = None):
        self.cfg, self.data, self.spec = cfg, data, spec
        self.eta = data.eta
        self.kernel = kernel or TimeKernel()
        self.u0 = np.asarray(u0, dtype=float)
        self.u0s = usharp0(self.u0, data.theta, spec)
        self.P0 = parametric_heat(self.u0s, self.eta, cfg.frames, cfg.dt)
        self.xi_param = ParamField.constant(self.eta, data.xi_eps)

    def initial_state(self) -> ParacontrolledState:
        cfg = self.cfg
        n = self.u0.shape[-1]
        u = TimeSlab.constant(self.u0, cfg.frames, cfg.dt)
        zeros = np.zeros((self.eta.M, cfg.frames, n, n))
        return ParacontrolledState(u, ParamField.from_nodes(self.eta, zeros, dt=cfg.dt), self.u0s,
                                   F_prev=np.zeros((cfg.frames, n, n)), damping=cfg.damping)

    def terms(self, state: ParacontrolledState) -> dict:
        """Every displayed contribution to ``F`` evaluated at the current iterate."""
        spec, data = self.spec, self.data
        u = state.u.values
        A, A1 = spec.a(u), spec.da(u)
        g = state.u.like(A)
        mod = Modulator(g, self.eta, self.kernel)
        th = nl_para_smoothed(g, data.theta, mod=mod).values
        lap_th = laplacian(th)
        lap_u = laplacian(u)
        Us = nl_para_smoothed(g, state.Usharp, mod=mod).values
        Ps = nl_para_smoothed(g, self.P0, mod=mod).values
        Ra = A - para_lt(A1, u)
        Lam = resonant(th, lap_th) - nl_compose(A, data.raw2)
        # x-constant counterterm part of Xi2 is multiplied pointwise, as in the classical solver
        ct = ParamField.from_power(self.eta, data.xi2.base - data.raw2.base, data.xi2.power)
        t = {
            "a>Du": para_gt(A, lap_u),
            "C": commutator_C(A1, u, lap_th),
            "Ra o Dtheta": resonant(Ra, lap_th),
            "a' Lambda": dealiased_product(A1, Lam),
            "a' (U# o Dtheta)": dealiased_product(A1, resonant(Us, lap_th)),
            "a o DU#": resonant(A, laplacian(Us)),
            "a' (P o Dtheta)": dealiased_product(A1, resonant(Ps, lap_th)),
            "a o DP": resonant(A, laplacian(Ps)),
            "a' Theta2": dealiased_product(A1, nl_compose(A, data.raw2)) + A1 * nl_compose(A, ct),
            "Psi(theta)": psi(g, data.theta, self.xi_param, mod=mod).values,
            "Psi(U#)": psi(g, state.Usharp, apply_L(state.Usharp), mod=mod).values,
            "Psi(P)": psi(g, self.P0, ParamField.constant(self.eta, np.zeros_like(u)), mod=mod).values,
        }
        t["_theta"], t["_Us"], t["_Ps"] = th, Us, Ps
        return t

    def build_F(self, state: ParacontrolledState, terms: dict | None = None) -> np.ndarray:
        terms = terms or self.terms(state)
        return sum(v for k, v in terms.items() if not k.startswith("_"))

    def gamma_step(self, state: ParacontrolledState) -> ParacontrolledState:
        cfg = self.cfg
        terms = self.terms(state)
        F = self.build_F(state, terms)
        Fslab = TimeSlab(F, cfg.dt)
        Unew = parametric_duhamel(Fslab, self.eta)
        g = state.u.like(self.spec.a(state.u.values))
        unew = terms["_theta"] + nl_para_smoothed(g, Unew, self.kernel).values + terms["_Ps"]
        res = float(np.max(np.abs(unew - state.u.values)))
        if not np.isfinite(res) or res > BLOWUP:
            raise NoContraction("Picard iterate diverged: reduce T")
        th = state.damping
        u = (1 - th) * state.u.values + th * unew
        return replace(state, u=state.u.like(u), Usharp=Unew, theta_slab=state.u.like(terms["_theta"]),
                       F_prev=F, residuals=state.residuals + [res])

    def solve(self) -> ParacontrolledState:
        cfg = self.cfg
        state = self.initial_state()
        for it in range(cfg.picard_max):
            state = self.gamma_step(state)
            r = state.residuals
            log.debug("picard %d residual %.3e", it, r[-1])
            if r[-1] <= cfg.picard_tol:
                state.converged = True
                return state
            if len(r) >= 4 and r[-1] > r[-2] > r[-3] > r[-4] and state.damping == 1.0:
                state.damping = 0.5
        raise NoContraction(f"no contraction at T={cfg.T}: residuals {state.residuals[-3:]}")


def gamma_step(state: ParacontrolledState, solver: ParacontrolledSolver) -> ParacontrolledState:
    return solver.gamma_step(state)


def build_F(state: ParacontrolledState, solver: ParacontrolledSolver) -> ParamField:
    """``F`` broadcast over the eta nodes (it does not depend on eta)."""
    return ParamField.constant(solver.eta, solver.build_F(state), dt=solver.cfg.dt)


def solve_paracontrolled(cfg: SolverConfig, data: EnhancedNoise, spec: DiffusionSpec, u0: np.ndarray,
                         halvings: int = 3) -> ParacontrolledState:
    """Picard iteration from ``u = u0``, ``U# = 0``; halves ``T`` on failure up to ``halvings`` times."""
    for attempt in range(halvings + 1):
        try:
            return ParacontrolledSolver(cfg, data, spec, u0).solve()
        except NoContraction:
            if attempt == halvings:
                raise
            log.warning("no contraction at T=%g, halving", cfg.T)
            cfg = replace(cfg, T=cfg.T / 2)
    raise AssertionError("unreachable")


def renormalized_product(state: ParacontrolledState, solver: ParacontrolledSolver) -> np.ndarray:
    """``a(u) <> Delta u = a(u) < Delta u + a'(u) Pi_diamond(a(u), Xi2) + Phi1 + Phi2``."""
    t = solver.terms(state)
    u = state.u.values
    A = solver.spec.a(u)
    keys = ["a>Du", "C", "Ra o Dtheta", "a' Lambda", "a' (U# o Dtheta)", "a o DU#",
            "a' (P o Dtheta)", "a o DP", "a' Theta2"]
    return para_lt(A, laplacian(u)) + sum(t[k] for k in keys)


def equation_residual(u: TimeSlab, product: np.ndarray, xi_eps: np.ndarray) -> np.ndarray:
    """``d_t u - product - xi_eps`` with the centered time stencil."""
    return time_derivative(u.values, u.dt) - product - xi_eps


def classical_product(u: TimeSlab, spec: DiffusionSpec, sigma: float) -> np.ndarray:
    v = u.values
    return dealiased_product(spec.a(v), laplacian(v)) + sigma * spec.da(v) / spec.a(v) ** 2
