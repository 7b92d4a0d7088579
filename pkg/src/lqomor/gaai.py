"""Bivariable alternating optimization on the Grassmann manifold.

Each sweep fixes ``W`` and moves ``V`` toward the stationary point
``X Phat^{-1}`` of a frozen-Gramian surrogate, then fixes the new ``V`` and
moves ``W`` toward ``-Y Qhat^{-1}``. Moves are projected to the horizontal
space, pulled back onto ``W^T V = I`` and accepted by Armijo backtracking with
a stability test on the reduced state matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LqoError, NotHurwitz, SingularGram
from .lqo import CrossTerms, LqoSystem, ReducedLqo, _grads_from_terms, check_biorthogonal, petrov_galerkin
from .manifold import grassmann_metric, grassmann_project

log = logging.getLogger(__name__)

__all__ = [
    "GaaiConfig",
    "IterateRecord",
    "GaaiResult",
    "StepInfo",
    "biorthogonalize",
    "v_candidate",
    "w_candidate",
    "surrogate_grad_v",
    "surrogate_grad_w",
    "search_direction_v",
    "search_direction_w",
    "armijo_step_v",
    "armijo_step_w",
    "riemannian_grad_norm",
    "run_gaai",
]


@dataclass(frozen=True)
class GaaiConfig:
    alpha1: float = 1e-4
    alpha2: float = 1e-4
    omega1: float = 0.3
    omega2: float = 0.3
    gamma1: float = 2.0
    gamma2: float = 2.0
    max_iters: int = 16
    max_backtracks: int = 30
    grad_tol: float = 0.0
    cost_rtol: float = 1e-13
    stability_check: str = "spectral"
    tau_sing: float = 1e-12

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "omega1", "omega2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("gamma1", "gamma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.stability_check not in ("spectral", "trace"):
            raise ValueError("stability_check must be 'spectral' or 'trace'")


@dataclass
class IterateRecord:
    iter: int
    cost: float
    rel_grad_norm: float
    step_v: float
    step_w: float
    reduced_stable: bool


@dataclass
class StepInfo:
    accepted: bool
    backtracks: int
    cost: float


@dataclass
class GaaiResult:
    reduced: ReducedLqo
    history: list[IterateRecord]
    W: np.ndarray
    V: np.ndarray
    n_exhausted: int = 0
    costs: list[float] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (reduced, history)
        return iter((self.reduced, self.history))


def biorthogonalize(W, V):
    """Rescale ``V <- V (W^T V)^{-1}`` so that ``W^T V = I``."""
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    return W, np.linalg.solve((W.T @ V).T, V.T).T


def _right_inverse(Z, G, tau_sing, what):
    Z, G = np.atleast_2d(np.asarray(Z, dtype=float)), np.atleast_2d(np.asarray(G, dtype=float))
    if np.linalg.cond(G) > 1.0 / tau_sing:
        raise SingularGram(f"{what} is singular to working precision")
    return np.linalg.solve(G.T, Z.T).T


def v_candidate(X, Phat, tau_sing=1e-12) -> np.ndarray:
    """``X Phat^{-1}``: the zero of the frozen-Gramian surrogate gradient in V."""
    return _right_inverse(X, Phat, tau_sing, "Phat")


def w_candidate(Y, Qhat, tau_sing=1e-12) -> np.ndarray:
    """``-Y Qhat^{-1}``: the zero of ``2 B B^T (Y + W Qhat)``."""
    return -_right_inverse(Y, Qhat, tau_sing, "Qhat")


def surrogate_grad_v(full: LqoSystem, V, X, Phat) -> np.ndarray:
    D = V @ Phat - X
    C, M = full.C, full.M
    return 2.0 * (C.T @ (C @ D) + 2.0 * M @ V @ (D.T @ M @ D))


def surrogate_grad_w(full: LqoSystem, W, Y, Qhat) -> np.ndarray:
    B = full.B
    return 2.0 * B @ (B.T @ (Y + W @ Qhat))


def search_direction_v(V_k, V_tilde) -> np.ndarray:
    return grassmann_project(V_k, V_tilde - V_k)


search_direction_w = search_direction_v


def _stable(full, red, W, V, mode):
    if mode == "trace":
        return float(np.trace(W.T @ full.A @ V)) < 0
    return red.is_hurwitz


def _try_cost(full, W, V, mode, approx):
    red = petrov_galerkin(full, W, V)
    if not _stable(full, red, W, V, mode):
        return None, None
    try:
        ct = CrossTerms(full, red, approx)
        c = ct.cost()
    except LqoError:
        return None, None
    if not np.isfinite(c):
        return None, None
    return ct, c


def _curve(X0, S, Fixed, t):
    Z = X0 + t * S
    return np.linalg.solve((Fixed.T @ Z).T, Z.T).T


def _armijo(full, fixed, moving, S, grad, cost0, alpha, omega, gamma, cfg, approx, move_v):
    slope = abs(grassmann_metric(moving, S, grad)) if grad is not None else 0.0
    if not np.any(S):
        return moving, gamma, StepInfo(False, 0, cost0), None
    t = gamma
    for m in range(cfg.max_backtracks + 1):
        try:
            cand = _curve(moving, S, fixed, t)
        except np.linalg.LinAlgError:
            cand = None
        if cand is not None and np.all(np.isfinite(cand)):
            W, V = (fixed, cand) if move_v else (cand, fixed)
            ct, c = _try_cost(full, W, V, cfg.stability_check, approx)
            if c is not None and cost0 - c >= alpha * t * slope:
                return cand, t, StepInfo(True, m, c), ct
        t *= omega
    return moving, t, StepInfo(False, cfg.max_backtracks + 1, cost0), None


def armijo_step_v(full: LqoSystem, W_k, V_k, S_k, cfg: GaaiConfig, F_V=None,
                  cost=None, approx=None):
    """Backtracking along ``V(t) = (V + tS)(W^T (V + tS))^{-1}``.

    Accepts the first ``t = omega1^m gamma1`` with a stable reduced model and
    ``J(old) - J(new) >= alpha1 t |<S, F_V>|``. If none is found within
    ``max_backtracks`` the iterate is returned unchanged with
    ``info.accepted = False``.

    Returns
    -------
    V_next, t, info
    """
    if cost is None or F_V is None:
        ct, c = _try_cost(full, W_k, V_k, "spectral", approx)
        if ct is None:
            raise NotHurwitz("current reduced model is not stable")
        cost = c if cost is None else cost
        if F_V is None:
            F_V = surrogate_grad_v(full, V_k, ct.X, ct.Phat)
    V, t, info, _ = _armijo(full, W_k, V_k, S_k, F_V, cost,
                            cfg.alpha1, cfg.omega1, cfg.gamma1, cfg, approx, True)
    return V, t, info


def armijo_step_w(full: LqoSystem, W_k, V_next, S_k, cfg: GaaiConfig, G_W=None,
                  cost=None, approx=None):
    """``W``-side counterpart of :func:`armijo_step_v`."""
    if cost is None or G_W is None:
        ct, c = _try_cost(full, W_k, V_next, "spectral", approx)
        if ct is None:
            raise NotHurwitz("current reduced model is not stable")
        cost = c if cost is None else cost
        if G_W is None:
            G_W = surrogate_grad_w(full, W_k, ct.Y, ct.Qhat)
    W, t, info, _ = _armijo(full, V_next, W_k, S_k, G_W, cost,
                            cfg.alpha2, cfg.omega2, cfg.gamma2, cfg, approx, False)
    return W, t, info


def riemannian_grad_norm(full, W, V, ct) -> float:
    """Norm of the pair of horizontal gradients ``P_W(J1W) W^T W``, ``P_V(J1V) V^T V``."""
    J1W, J1V = _grads_from_terms(full, W, V, ct)
    gW = grassmann_project(W, J1W) @ (W.T @ W)
    gV = grassmann_project(V, J1V) @ (V.T @ V)
    return float(np.sqrt(np.sum(gW * gW) + np.sum(gV * gV)))


def _direction(cand_fn, grad_fn, U):
    try:
        return grassmann_project(U, cand_fn() - U)
    except SingularGram:
        log.info("singular reduced Gramian; falling back to a surrogate gradient step")
        return -grassmann_project(U, grad_fn()) @ (U.T @ U)


def run_gaai(full: LqoSystem, W0, V0, cfg: GaaiConfig | None = None, approx=None) -> GaaiResult:
    """Alternate V- and W-updates until ``max_iters`` or the gradient tolerance.

    ``W0, V0`` are biorthogonalized on entry. The returned history has one
    row for the initial point and one per sweep.
    """
    cfg = cfg or GaaiConfig()
    W, V = biorthogonalize(W0, V0)
    ct, cost = _try_cost(full, W, V, "spectral", approx)
    if ct is None:
        raise NotHurwitz("initial reduced model is not stable")
    g0 = riemannian_grad_norm(full, W, V, ct)
    floor = cfg.cost_rtol * full.h2_norm_sq
    history = [IterateRecord(0, cost, 1.0 if g0 > 0 else 0.0, 0.0, 0.0, True)]
    costs = [cost]
    exhausted = 0

    def done(g):
        return g0 == 0 or cost <= floor or (cfg.grad_tol > 0 and g / g0 < cfg.grad_tol)

    g = g0
    k = 0
    while k < cfg.max_iters and not done(g):
        k += 1
        # V-update with W fixed
        X, Ph = ct.X, ct.Phat
        F_V = surrogate_grad_v(full, V, X, Ph)
        S = _direction(lambda: v_candidate(X, Ph, cfg.tau_sing), lambda: F_V, V)
        V_new, t_v, info, ct_new = _armijo(full, W, V, S, F_V, cost, cfg.alpha1, cfg.omega1,
                                           cfg.gamma1, cfg, approx, True)
        if info.accepted:
            V, ct, cost = V_new, ct_new, info.cost
            costs.append(cost)
        else:
            exhausted += 1
            t_v = 0.0
        # W-update with the new V fixed
        Y, Qh = ct.Y, ct.Qhat
        G_W = surrogate_grad_w(full, W, Y, Qh)
        S = _direction(lambda: w_candidate(Y, Qh, cfg.tau_sing), lambda: G_W, W)
        W_new, t_w, info, ct_new = _armijo(full, V, W, S, G_W, cost, cfg.alpha2, cfg.omega2,
                                           cfg.gamma2, cfg, approx, False)
        if info.accepted:
            W, ct, cost = W_new, ct_new, info.cost
            costs.append(cost)
        else:
            exhausted += 1
            t_w = 0.0
        check_biorthogonal(W, V, tol=1e-8)
        g = riemannian_grad_norm(full, W, V, ct)
        history.append(IterateRecord(k, cost, g / g0, t_v, t_w, ct.red.is_hurwitz))
        log.debug("gaai %d: J=%.6e rel_grad=%.3e", k, cost, g / g0)
    red = petrov_galerkin(full, W, V)
    return GaaiResult(red, history, W, V, exhausted, costs)
