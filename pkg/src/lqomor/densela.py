"""Dense real matrix kernel.

Direct Sylvester/Lyapunov solvers of Bartels-Stewart type: both coefficient
matrices are brought to real Schur form and the quasi-triangular equation is
solved by LAPACK ``?trsyl`` (which resolves the 2x2 blocks of complex
conjugate pairs by small coupled solves). A :class:`SchurForm` can be computed
once and reused, which is what makes repeated ``n x r`` solves against a fixed
full-order ``A`` cost ``O(n^2 r)`` instead of ``O(n^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as spla
from scipy.linalg.lapack import dtrsyl

from .exceptions import NotHurwitz, SingularPencil

TAU_SOLVE = 1e-10
TAU_ABS = 1e-12
TAU_PSD = 1e-8
TAU_CLASH = 1e-10

__all__ = [
    "SchurForm",
    "StabilityReport",
    "real_schur",
    "solve_sylvester",
    "solve_lyapunov",
    "stability",
    "sylvester_residual_ok",
]


@dataclass(frozen=True)
class StabilityReport:
    spectral_abscissa: float
    is_hurwitz: bool


@dataclass(frozen=True, eq=False)
class SchurForm:
    """Real Schur factorization ``A = U T U^T`` with ``T`` quasi upper triangular."""

    T: np.ndarray
    U: np.ndarray

    @cached_property
    def eigvals(self) -> np.ndarray:
        return _quasi_triangular_eigvals(self.T)

    @property
    def n(self) -> int:
        return self.T.shape[0]


def _as_square(A, name="A") -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _quasi_triangular_eigvals(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    out = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            a, b, c, d = T[i, i], T[i, i + 1], T[i + 1, i], T[i + 1, i + 1]
            half_tr = 0.5 * (a + d)
            disc = complex(0.25 * (a - d) ** 2 + b * c)
            root = np.sqrt(disc)
            out[i], out[i + 1] = half_tr + root, half_tr - root
            i += 2
        else:
            out[i] = T[i, i]
            i += 1
    return out


def real_schur(A) -> SchurForm:
    A = _as_square(A)
    T, U = spla.schur(A, output="real")
    return SchurForm(T, U)


def _check_clash(ea: np.ndarray, eb: np.ndarray) -> None:
    # |l_i(A) + l_j(B)| / (1 + |l_i| + |l_j|) must stay above TAU_CLASH
    s = np.abs(ea[:, None] + eb[None, :])
    scale = 1.0 + np.abs(ea)[:, None] + np.abs(eb)[None, :]
    if np.any(s / scale < TAU_CLASH):
        raise SingularPencil("spectra of A and -B intersect; Sylvester equation is singular")


def _schur_solve(sa: SchurForm, trans_a: bool, sb: SchurForm, trans_b: bool, C: np.ndarray) -> np.ndarray:
    """Solve ``op(A) X + X op(B) + C = 0`` given Schur forms of A and B."""
    ea = sa.eigvals
    eb = sb.eigvals
    _check_clash(ea, eb)
    # op(A) = U op(T) U^T, op(B) = Z op(S) Z^T
    F = sa.U.T @ C @ sb.U
    Y, scale, info = dtrsyl(
        sa.T, sb.T, -F,
        trana="T" if trans_a else "N",
        tranb="T" if trans_b else "N",
        isgn=1,
    )
    if info < 0:
        raise ValueError(f"dtrsyl: illegal argument {-info}")
    if info == 1:
        raise SingularPencil("dtrsyl perturbed near-common eigenvalues")
    return sa.U @ (Y / scale) @ sb.U.T


def solve_sylvester(A, B, C, *, schur_a: SchurForm | None = None,
                    schur_b: SchurForm | None = None) -> np.ndarray:
    """Solve ``A X + X B + C = 0``.

    Parameters
    ----------
    A : (n, n) array
    B : (r, r) array
    C : (n, r) array
    schur_a, schur_b : SchurForm, optional
        Precomputed real Schur forms of ``A`` and ``B``. When given, the
        corresponding matrix argument is only used for its shape and may be
        ``None``.

    Raises
    ------
    SingularPencil
        If an eigenvalue of ``A`` equals the negation of one of ``B``.
    """
    sa = schur_a if schur_a is not None else real_schur(A)
    sb = schur_b if schur_b is not None else real_schur(B)
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C.reshape(sa.n, sb.n)
    if C.shape != (sa.n, sb.n):
        raise ValueError(f"C must have shape {(sa.n, sb.n)}, got {C.shape}")
    return _schur_solve(sa, False, sb, False, C)


def solve_sylvester_schur(sa: SchurForm, trans_a: bool, sb: SchurForm, trans_b: bool, C) -> np.ndarray:
    """Like :func:`solve_sylvester` on ``op(A) X + X op(B) + C = 0`` with cached factors.

    ``op(M)`` is ``M^T`` when the matching ``trans_*`` flag is set, which
    lets one Schur factorization of ``A`` serve both ``A X`` and ``A^T Y``
    equations.
    """
    return _schur_solve(sa, trans_a, sb, trans_b, np.asarray(C, dtype=float))


def stability(A) -> StabilityReport:
    A = _as_square(A)
    alpha = float(np.max(np.linalg.eigvals(A).real))
    return StabilityReport(alpha, alpha < 0)


def solve_lyapunov(A, S, *, schur_a: SchurForm | None = None, transpose: bool = False) -> np.ndarray:
    """Solve ``A P + P A^T + S = 0`` for symmetric ``P``.

    With ``transpose=True`` the observability form ``A^T P + P A + S = 0``
    is solved instead. The result is symmetrized exactly.

    Raises
    ------
    NotHurwitz
        If the spectral abscissa of ``A`` is nonnegative.
    """
    sa = schur_a if schur_a is not None else real_schur(A)
    abscissa = float(np.max(sa.eigvals.real))
    if abscissa >= 0:
        raise NotHurwitz(f"spectral abscissa {abscissa:.3e} >= 0")
    S = np.asarray(S, dtype=float)
    S = np.atleast_2d(S)
    if S.shape != (sa.n, sa.n):
        raise ValueError(f"S must have shape {(sa.n, sa.n)}, got {S.shape}")
    # A P + P A^T: op(A)=A, op(B)=A^T ; transposed form: op(A)=A^T, op(B)=A
    P = _schur_solve(sa, transpose, sa, not transpose, S)
    return 0.5 * (P + P.T)


def sylvester_residual_ok(A, B, C, X, tau=TAU_SOLVE, tau_abs=TAU_ABS) -> bool:
    """Residual contract ``||AX + XB + C|| <= tau (||A|| + ||B||) ||X|| + tau_abs``."""
    res = np.linalg.norm(A @ X + X @ B + C)
    bound = tau * (np.linalg.norm(A) + np.linalg.norm(B)) * np.linalg.norm(X) + tau_abs
    return bool(res <= bound)
