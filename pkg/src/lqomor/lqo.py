"""Linear systems with quadratic output: Gramians, H2 norm, error cost and gradients.

An LQO system is

    x' = A x + B u,    y = C x + x^T M x

with Hurwitz ``A``, scalar output and symmetric ``M``. The squared H2 norm is
``tr(B^T Q B)`` where ``A P + P A^T + B B^T = 0`` and
``A^T Q + Q A + C^T C + M P M = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .densela import (
    TAU_PSD,
    SchurForm,
    real_schur,
    solve_lyapunov,
    solve_sylvester_schur,
)
from .exceptions import BiorthogonalityViolated, NotHurwitz

__all__ = [
    "LqoSystem",
    "ReducedLqo",
    "GramianSet",
    "CrossGramians",
    "CrossTerms",
    "gramians",
    "h2_norm",
    "error_system",
    "cross_gramians",
    "cost_j",
    "h2_error",
    "petrov_galerkin",
    "euclidean_grads",
]


def _mat(a, shape=None, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1 and shape is not None:
        a = a.reshape(shape)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class LqoSystem:
    """Full-order LQO system ``(A, B, C, M)``.

    ``M`` is replaced by its symmetric part on construction, which leaves
    the quadratic form unchanged. ``A`` must be Hurwitz unless
    ``check_stable=False``.

    Schur factors of ``A`` and the Gramians are computed lazily and cached;
    the instance is treated as immutable.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    M: np.ndarray
    check_stable: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = _mat(self.A, name="A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim <= 1:
            B = B.reshape(n, -1)
        B = _mat(B, name="B")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        C = _mat(self.C, (1, n), "C")
        M = _mat(self.M, (n, n), "M")
        M = 0.5 * (M + M.T)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "M", M)
        if self.check_stable and not self.is_hurwitz:
            raise NotHurwitz(f"A is not Hurwitz (abscissa {self.spectral_abscissa:.3e})")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def schur(self) -> SchurForm:
        return real_schur(self.A)

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.schur.eigvals.real))

    @property
    def is_hurwitz(self) -> bool:
        return self.spectral_abscissa < 0

    @cached_property
    def gramians(self) -> "GramianSet":
        P = solve_lyapunov(None, self.B @ self.B.T, schur_a=self.schur)
        Q = solve_lyapunov(None, self.C.T @ self.C + self.M @ P @ self.M,
                           schur_a=self.schur, transpose=True)
        return GramianSet(P, Q)

    @cached_property
    def h2_norm_sq(self) -> float:
        Q = self.gramians.Q
        return float(np.trace(self.B.T @ Q @ self.B))


@dataclass(frozen=True, eq=False)
class ReducedLqo:
    """Reduced-order model ``(Ahat, Bhat, Chat, Mhat)``."""

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Mhat: np.ndarray

    def __post_init__(self):
        Ahat = _mat(self.Ahat, name="Ahat")
        r = Ahat.shape[0]
        if Ahat.shape != (r, r):
            raise ValueError(f"Ahat must be square, got {Ahat.shape}")
        Bhat = np.asarray(self.Bhat, dtype=float)
        if Bhat.ndim <= 1:
            Bhat = Bhat.reshape(r, -1)
        object.__setattr__(self, "Ahat", Ahat)
        object.__setattr__(self, "Bhat", _mat(Bhat, name="Bhat"))
        object.__setattr__(self, "Chat", _mat(self.Chat, (1, r), "Chat"))
        Mhat = _mat(self.Mhat, (r, r), "Mhat")
        object.__setattr__(self, "Mhat", 0.5 * (Mhat + Mhat.T))

    # uniform access so simulation / IO treat both model kinds alike
    A = property(lambda self: self.Ahat)
    B = property(lambda self: self.Bhat)
    C = property(lambda self: self.Chat)
    M = property(lambda self: self.Mhat)

    @property
    def r(self) -> int:
        return self.Ahat.shape[0]

    n = r

    @cached_property
    def schur(self) -> SchurForm:
        return real_schur(self.Ahat)

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.schur.eigvals.real))

    @property
    def is_hurwitz(self) -> bool:
        return self.spectral_abscissa < 0

    def as_system(self) -> LqoSystem:
        return LqoSystem(self.Ahat, self.Bhat, self.Chat, self.Mhat)


@dataclass(frozen=True)
class GramianSet:
    P: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True)
class CrossGramians:
    X: np.ndarray
    Phat: np.ndarray
    Y: np.ndarray
    Qhat: np.ndarray
    K: np.ndarray
    L: np.ndarray


def gramians(sys: LqoSystem) -> GramianSet:
    return sys.gramians


def h2_norm(sys: LqoSystem, check_dual: bool = False) -> float:
    """H2 norm ``sqrt(tr(B^T Q B))``.

    With ``check_dual`` the controllability form
    ``sqrt(tr(C P C^T) + tr(P M P M))`` is also evaluated and an
    ``AssertionError`` raised if the two disagree beyond 1e-8 relative.
    """
    val = max(sys.h2_norm_sq, 0.0)
    if check_dual:
        P = sys.gramians.P
        PM = P @ sys.M
        dual = float(np.trace(sys.C @ P @ sys.C.T) + np.trace(PM @ PM))
        assert abs(dual - val) <= 1e-8 * max(abs(val), abs(dual), 1e-300), (val, dual)
    return float(np.sqrt(val))


def error_system(full: LqoSystem, red: ReducedLqo) -> LqoSystem:
    """Block realization of ``full - red``; raises NotHurwitz if ``red`` is unstable."""
    if not red.is_hurwitz:
        raise NotHurwitz("reduced system is not Hurwitz; error system inadmissible")
    n, r = full.n, red.r
    Ae = np.zeros((n + r, n + r))
    Ae[:n, :n] = full.A
    Ae[n:, n:] = red.Ahat
    Be = np.vstack([full.B, red.Bhat])
    Ce = np.hstack([full.C, -red.Chat])
    Me = np.zeros((n + r, n + r))
    Me[:n, :n] = full.M
    Me[n:, n:] = -red.Mhat
    return LqoSystem(Ae, Be, Ce, Me)


class CrossTerms:
    """Lazily solved coupling matrices between a full and a reduced model.

    Each attribute solves its defining equation on first access::

        A X + X Ahat^T + B Bhat^T = 0
        Ahat Phat + Phat Ahat^T + Bhat Bhat^T = 0
        A^T Y + Y Ahat - C^T Chat - M X Mhat = 0
        Ahat^T Qhat + Qhat Ahat + Chat^T Chat + Mhat Phat Mhat = 0
        A^T K + K Ahat - C^T Chat - 2 M X Mhat = 0
        Ahat^T L + L Ahat + Chat^T Chat + 2 Mhat Phat Mhat = 0

    ``approx`` may supply a low-rank surrogate (see :mod:`lqomor.laguerre`)
    that replaces the three ``n x r`` solves for X, Y and K.
    """

    def __init__(self, full: LqoSystem, red: ReducedLqo, approx=None):
        self.full = full
        self.red = red
        self.approx = approx

    @cached_property
    def _rs(self) -> SchurForm:
        return self.red.schur

    def _solve_n(self, trans_a: bool, trans_b: bool, C):
        return solve_sylvester_schur(self.full.schur, trans_a, self._rs, trans_b, C)

    @cached_property
    def _online(self):
        return self.approx.online(self.red)

    @cached_property
    def X(self) -> np.ndarray:
        if self.approx is not None:
            return self._online.X
        f, r = self.full, self.red
        return self._solve_n(False, True, f.B @ r.Bhat.T)

    @cached_property
    def Phat(self) -> np.ndarray:
        r = self.red
        return solve_lyapunov(None, r.Bhat @ r.Bhat.T, schur_a=self._rs)

    @cached_property
    def Y(self) -> np.ndarray:
        if self.approx is not None:
            return self._online.Y
        f, r = self.full, self.red
        return self._solve_n(True, False, -(f.C.T @ r.Chat) - f.M @ self.X @ r.Mhat)

    @cached_property
    def Qhat(self) -> np.ndarray:
        r = self.red
        S = r.Chat.T @ r.Chat + r.Mhat @ self.Phat @ r.Mhat
        return solve_lyapunov(None, S, schur_a=self._rs, transpose=True)

    @cached_property
    def K(self) -> np.ndarray:
        if self.approx is not None:
            return self._online.K
        f, r = self.full, self.red
        return self._solve_n(True, False, -(f.C.T @ r.Chat) - 2.0 * f.M @ self.X @ r.Mhat)

    @cached_property
    def L(self) -> np.ndarray:
        r = self.red
        S = r.Chat.T @ r.Chat + 2.0 * r.Mhat @ self.Phat @ r.Mhat
        return solve_lyapunov(None, S, schur_a=self._rs, transpose=True)

    def cost(self) -> float:
        """``tr(B^T Q B + 2 B^T Y Bhat + Bhat^T Qhat Bhat)``."""
        f, r = self.full, self.red
        return float(f.h2_norm_sq
                     + 2.0 * np.sum(f.B * (self.Y @ r.Bhat))
                     + np.sum(r.Bhat * (self.Qhat @ r.Bhat)))

    def cost_dual(self) -> float:
        """Controllability-side expansion of the same cost (needs only X, Phat)."""
        f, r = self.full, self.red
        P, X, Ph = f.gramians.P, self.X, self.Phat
        lin = (f.C @ P @ f.C.T - 2.0 * f.C @ X @ r.Chat.T + r.Chat @ Ph @ r.Chat.T).item()
        PM = P @ f.M
        PhMh = Ph @ r.Mhat
        quad = (np.sum(PM * PM.T) - 2.0 * np.sum((X.T @ f.M @ X) * r.Mhat)
                + np.sum(PhMh * PhMh.T))
        return float(lin + quad)

    def freeze(self) -> CrossGramians:
        return CrossGramians(self.X, self.Phat, self.Y, self.Qhat, self.K, self.L)


def cross_gramians(full: LqoSystem, red: ReducedLqo) -> CrossGramians:
    return CrossTerms(full, red).freeze()


def cost_j(full: LqoSystem, red: ReducedLqo, form: str = "observability") -> float:
    """Squared H2 norm of ``full - red``.

    ``form="observability"`` evaluates ``tr(B^T Q B + 2 B^T Y Bhat + Bhat^T Qhat Bhat)``;
    ``form="controllability"`` the ``C P C^T`` / ``P M P M`` expansion.
    """
    ct = CrossTerms(full, red)
    if form == "observability":
        return ct.cost()
    if form == "controllability":
        return ct.cost_dual()
    raise ValueError(f"unknown form {form!r}")


def h2_error(full: LqoSystem, red: ReducedLqo) -> float:
    """H2 norm of ``full - red``, i.e. ``sqrt(J)``.

    ``J`` is a difference of terms of size ``||full||^2 + ||red||^2``, so values
    below ``64 eps`` times that scale are pure cancellation and reported as 0
    (the square root would otherwise inflate them to ~1e-7 relative).
    """
    ct = CrossTerms(full, red)
    J = ct.cost()
    scale = full.h2_norm_sq + float(np.trace(red.B.T @ ct.Qhat @ red.B))
    if J <= 64 * np.finfo(float).eps * abs(scale):
        return 0.0
    return float(np.sqrt(J))


def petrov_galerkin(full: LqoSystem, W, V) -> ReducedLqo:
    """``(W^T A V, W^T B, C V, V^T M V)``."""
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    return ReducedLqo(W.T @ full.A @ V, W.T @ full.B, full.C @ V, V.T @ full.M @ V)


def check_biorthogonal(W, V, tol=1e-10) -> None:
    r = V.shape[1]
    err = np.linalg.norm(W.T @ V - np.eye(r))
    if err > tol:
        raise BiorthogonalityViolated(f"||W^T V - I|| = {err:.3e} > {tol:.1e}")


def _grads_from_terms(full: LqoSystem, W, V, ct: CrossTerms):
    A, B, C, M = full.A, full.B, full.C, full.M
    X, Ph, K, L = ct.X, ct.Phat, ct.K, ct.L
    Mh = ct.red.Mhat
    inner = X.T @ K + Ph @ L
    F1 = A @ (V @ inner) + B @ (B.T @ (K + W @ L))
    J1W = 2.0 * F1
    J1V = 2.0 * (A.T @ (W @ inner.T)
                 + C.T @ (C @ (V @ Ph - X))
                 + 2.0 * M @ (V @ (Ph @ Mh @ Ph - X.T @ M @ X)))
    return J1W, J1V


def euclidean_grads(full: LqoSystem, W, V, *, check=True, approx=None):
    """Partial derivatives of ``J1(W, V) = J(W^T A V, W^T B, C V, V^T M V)``.

    Returns
    -------
    J1W, J1V : (n, r) arrays
        ``J1W = 2 (A V (X^T K + Phat L) + B B^T (K + W L))`` and
        ``J1V = 2 (A^T W (K^T X + L Phat) + C^T C (V Phat - X)
        + 2 M V (Phat Mhat Phat - X^T M X))``.
    """
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    if check:
        check_biorthogonal(W, V)
    red = petrov_galerkin(full, W, V)
    if not red.is_hurwitz:
        raise NotHurwitz("reduced system at (W, V) is not Hurwitz")
    return _grads_from_terms(full, W, V, CrossTerms(full, red, approx))


def is_psd(S, tol=TAU_PSD) -> bool:
    return bool(np.min(np.linalg.eigvalsh(0.5 * (S + S.T))) >= -tol)
