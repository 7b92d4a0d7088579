"""Stability-preserving Dai-Yuan conjugate gradient on the Stiefel manifold.

The left projection is tied to the right one through a Lyapunov certificate
``H`` (``A^T H + H A < 0``, ``H > 0``)::

    W = H V (V^T H V)^{-1},   Ahat = (V^T H V)^{-1} V^T H A V,

which makes every reduced model Hurwitz. The cost then depends on ``V`` only
and is minimized over orthonormal ``V`` with a Dai-Yuan direction, scaled
projection transport and a backtracking Wolfe search.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .densela import solve_lyapunov
from .exceptions import IllConditionedGram, LqoError, LineSearchExhausted, NotHurwitz
from .lqo import CrossTerms, LqoSystem, ReducedLqo, _grads_from_terms
from .manifold import (
    qr_positive,
    scaled_transport,
    stiefel_metric,
    stiefel_norm,
    stiefel_project,
    stiefel_retract,
    transport,
)

log = logging.getLogger(__name__)

__all__ = [
    "StabilityCertificate",
    "SrcgConfig",
    "CgState",
    "SrcgRecord",
    "SrcgResult",
    "certificate",
    "reduce_from_v",
    "riemannian_grad_j2",
    "dai_yuan_beta",
    "wolfe_stable_step",
    "run_srcg",
]


@dataclass(frozen=True)
class StabilityCertificate:
    H: np.ndarray

    def validate(self, A) -> None:
        H = self.H
        if np.linalg.norm(H - H.T) > 1e-12 * max(np.linalg.norm(H), 1.0):
            raise ValueError("H must be symmetric")
        if np.min(np.linalg.eigvalsh(H)) <= 0:
            raise ValueError("H must be positive definite")
        S = A.T @ H + H @ A
        if np.max(np.linalg.eigvalsh(0.5 * (S + S.T))) >= 0:
            raise ValueError("A^T H + H A must be negative definite")


@dataclass(frozen=True)
class SrcgConfig:
    c1: float = 0.01
    c2: float = 0.7
    omega: float = 0.7
    gamma: float = 0.01
    grad_tol: float = 1e-4
    max_iters: int = 1000
    max_backtracks: int = 60
    cost_rtol: float = 1e-13
    stability_check: str = "petrov"
    tau_sing: float = 1e-12

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if not 0 < self.omega < 1:
            raise ValueError("omega must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.stability_check not in ("petrov", "galerkin"):
            raise ValueError("stability_check must be 'petrov' or 'galerkin'")


@dataclass
class CgState:
    V: np.ndarray
    grad: np.ndarray
    eta: np.ndarray
    beta: float
    cost: float
    red: ReducedLqo | None = None


@dataclass
class SrcgRecord:
    iter: int
    cost: float
    rel_grad_norm: float
    t: float
    beta: float
    abscissa: float
    galerkin_abscissa: float
    curvature_waived: bool = False


@dataclass
class SrcgResult:
    reduced: ReducedLqo
    history: list[SrcgRecord]
    V: np.ndarray
    W: np.ndarray
    H: np.ndarray
    iterates_hurwitz: list[bool] = field(default_factory=list)

    def __iter__(self):
        return iter((self.reduced, self.history))


def certificate(sys: LqoSystem) -> StabilityCertificate:
    """``H`` solving ``A^T H + H A + I = 0``."""
    H = solve_lyapunov(None, np.eye(sys.n), schur_a=sys.schur, transpose=True)
    return StabilityCertificate(H)


def _gram(V, H, tau_sing):
    G = V.T @ H @ V
    G = 0.5 * (G + G.T)
    if np.linalg.cond(G) > 1.0 / tau_sing:
        raise IllConditionedGram("V^T H V is ill-conditioned")
    return G


def _left(sys, H, V, tau_sing=1e-12):
    G = _gram(V, H, tau_sing)
    HV = H @ V
    return np.linalg.solve(G, HV.T).T  # W = H V G^{-1}


def reduce_from_v(sys: LqoSystem, H, V, tau_sing=1e-12) -> ReducedLqo:
    """``((V^T H V)^{-1} V^T H A V, (V^T H V)^{-1} V^T H B, C V, V^T M V)``."""
    H = H.H if isinstance(H, StabilityCertificate) else H
    W = _left(sys, H, V, tau_sing)
    return ReducedLqo(W.T @ sys.A @ V, W.T @ sys.B, sys.C @ V, V.T @ sys.M @ V)


def _euclid_grad(sys, H, V, W, ct):
    """Euclidean gradient of ``V -> J(reduce_from_v(V))`` via the chain rule through W."""
    J1W, J1V = _grads_from_terms(sys, W, V, ct)
    F1 = 0.5 * J1W
    G = V.T @ H @ V
    HF = H @ (F1 - V @ (W.T @ F1))  # H (I - V W^T) F1
    term = np.linalg.solve(G, HF.T).T  # ... (V^T H V)^{-1}, G symmetric
    return 2.0 * (term - W @ F1.T @ W) + J1V


def riemannian_grad_j2(sys: LqoSystem, H, V, *, approx=None, _terms=None) -> np.ndarray:
    """Stiefel gradient of the stability-preserving cost at orthonormal ``V``."""
    H = H.H if isinstance(H, StabilityCertificate) else H
    W = _left(sys, H, V)
    ct = _terms if _terms is not None else CrossTerms(
        sys, ReducedLqo(W.T @ sys.A @ V, W.T @ sys.B, sys.C @ V, V.T @ sys.M @ V), approx)
    return stiefel_project(V, _euclid_grad(sys, H, V, W, ct))


def dai_yuan_beta(state_prev: CgState, grad_new, transported_eta, V_new=None) -> float:
    """``||g_new||^2 / (<g_new, T eta_prev> - <g_prev, eta_prev>)``; 0 on a degenerate denominator."""
    num = stiefel_metric(grad_new, grad_new)
    if num == 0.0:
        return 0.0
    den = stiefel_metric(grad_new, transported_eta) - stiefel_metric(state_prev.grad, state_prev.eta)
    if abs(den) < 1e-14 * num:
        log.info("Dai-Yuan denominator degenerate; restarting with steepest descent")
        return 0.0
    return num / den


class _Objective:
    """Cost/gradient evaluation at orthonormal ``V`` for fixed ``(sys, H)``."""

    def __init__(self, sys, H, cfg, approx=None):
        self.sys, self.H, self.cfg, self.approx = sys, H, cfg, approx

    def terms(self, V):
        W = _left(self.sys, self.H, V, self.cfg.tau_sing)
        s = self.sys
        red = ReducedLqo(W.T @ s.A @ V, W.T @ s.B, s.C @ V, V.T @ s.M @ V)
        return W, CrossTerms(s, red, self.approx)

    def grad(self, V, W, ct):
        return stiefel_project(V, _euclid_grad(self.sys, self.H, V, W, ct))

    def stable(self, V, red) -> bool:
        if self.cfg.stability_check == "galerkin":
            a = np.linalg.eigvals(V.T @ self.sys.A @ V).real.max()
            return bool(a < 0)
        return red.is_hurwitz


@dataclass
class _Trial:
    t: float
    V: np.ndarray
    W: np.ndarray
    ct: CrossTerms
    cost: float
    grad: np.ndarray | None = None


def _wolfe(obj: _Objective, state: CgState, cfg: SrcgConfig):
    """Backtracking over ``t = omega^m gamma``; returns (trial, waived) or raises."""
    slope = stiefel_metric(state.grad, state.eta)
    t = cfg.gamma
    first_armijo = None
    for _ in range(cfg.max_backtracks + 1):
        Vt = stiefel_retract(state.V, t * state.eta)
        try:
            W, ct = obj.terms(Vt)
            ok = obj.stable(Vt, ct.red)
            c = ct.cost() if ok else np.inf
        except LqoError:
            ok, c = False, np.inf
        if ok and np.isfinite(c) and c <= state.cost + cfg.c1 * t * slope:
            trial = _Trial(t, Vt, W, ct, c)
            trial.grad = obj.grad(Vt, W, ct)
            Teta = transport(state.V, t * state.eta, state.eta)
            if stiefel_metric(trial.grad, Teta) >= cfg.c2 * slope:
                return trial, False
            if first_armijo is None:
                first_armijo = trial
        t *= cfg.omega
    if first_armijo is not None:
        log.warning("curvature condition not met within %d backtracks; waived", cfg.max_backtracks)
        return first_armijo, True
    raise LineSearchExhausted("no step satisfied sufficient decrease and stability")


def wolfe_stable_step(sys: LqoSystem, H, state: CgState, cfg: SrcgConfig, approx=None):
    """One line search from ``state``.

    If ``state.eta`` is not a descent direction it is reset to ``-grad``.

    Returns
    -------
    t, V_new, grad_new
    """
    H = H.H if isinstance(H, StabilityCertificate) else H
    if stiefel_metric(state.grad, state.eta) >= 0:
        state.eta = -state.grad
    trial, _ = _wolfe(_Objective(sys, H, cfg, approx), state, cfg)
    return trial.t, trial.V, trial.grad


def run_srcg(sys: LqoSystem, V0, cfg: SrcgConfig | None = None, H=None, approx=None) -> SrcgResult:
    """Riemannian CG until the relative gradient norm falls below ``grad_tol``.

    ``H`` defaults to the solution of ``A^T H + H A + I = 0``; a user-supplied
    certificate is validated first.
    """
    cfg = cfg or SrcgConfig()
    if H is None:
        H = certificate(sys).H
    else:
        H = H.H if isinstance(H, StabilityCertificate) else np.asarray(H, dtype=float)
        StabilityCertificate(H).validate(sys.A)
    obj = _Objective(sys, H, cfg, approx)
    V = qr_positive(np.asarray(V0, dtype=float))
    W, ct = obj.terms(V)
    if not ct.red.is_hurwitz:
        raise NotHurwitz("reduced model from V0 is not Hurwitz")
    cost = ct.cost()
    g = obj.grad(V, W, ct)
    g0 = stiefel_norm(g)
    state = CgState(V, g, -g, 0.0, cost, ct.red)
    floor = cfg.cost_rtol * sys.h2_norm_sq

    def record(k, t, beta, waived=False):
        red = state.red
        gal = float(np.linalg.eigvals(state.V.T @ sys.A @ state.V).real.max())
        return SrcgRecord(k, state.cost, stiefel_norm(state.grad) / g0 if g0 > 0 else 0.0,
                          t, beta, red.spectral_abscissa, gal, waived)

    history = [record(0, 0.0, 0.0)]
    hurwitz = [state.red.is_hurwitz]
    k = 0
    while (k < cfg.max_iters and g0 > 0 and state.cost > floor
           and stiefel_norm(state.grad) / g0 >= cfg.grad_tol):
        if stiefel_metric(state.grad, state.eta) >= 0:
            state.eta = -state.grad
        try:
            trial, waived = _wolfe(obj, state, cfg)
        except LineSearchExhausted:
            if np.array_equal(state.eta, -state.grad):
                log.warning("line search exhausted on steepest descent; stopping at iterate %d", k)
                break
            state.eta = -state.grad
            try:
                trial, waived = _wolfe(obj, state, cfg)
            except LineSearchExhausted:
                log.warning("line search exhausted after restart; stopping at iterate %d", k)
                break
        k += 1
        step = trial.t * state.eta
        Teta = scaled_transport(state.V, step, state.eta)
        beta = dai_yuan_beta(state, trial.grad, Teta)
        eta_new = -trial.grad + beta * Teta
        state = CgState(trial.V, trial.grad, eta_new, beta, trial.cost, trial.ct.red)
        hurwitz.append(state.red.is_hurwitz)
        history.append(record(k, trial.t, beta, waived))
        log.debug("srcg %d: J=%.6e rel_grad=%.3e t=%.2e", k, state.cost, history[-1].rel_grad_norm, trial.t)
    W = _left(sys, H, state.V, cfg.tau_sing)
    return SrcgResult(state.red, history, state.V, W, H, hurwitz)
