"""Comparison reducers: one-sided rational Krylov and square-root balanced truncation."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .densela import TAU_PSD
from .exceptions import ShiftSingular
from .lqo import LqoSystem, ReducedLqo, petrov_galerkin

log = logging.getLogger(__name__)

__all__ = [
    "BtFactors",
    "NumericalRankLoss",
    "default_shift",
    "krylov_basis",
    "krylov_reduce",
    "bt_factors",
    "bt_projection",
    "bt_reduce",
]


class NumericalRankLoss(UserWarning):
    """Requested order exceeds the numerical rank of the balancing product."""


@dataclass(frozen=True)
class BtFactors:
    Lp: np.ndarray
    Lq: np.ndarray
    hankel_values: np.ndarray


def default_shift(sys: LqoSystem) -> float:
    return 0.1 * abs(sys.spectral_abscissa)


def _orth_against(v, basis):
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        if basis:
            Vb = np.column_stack(basis)
            v = v - Vb @ (Vb.T @ v)
    nv = np.linalg.norm(v)
    return v, nv


def krylov_basis(sys: LqoSystem, r: int, shifts=None) -> np.ndarray:
    """Orthonormal basis of ``span{(s I - A)^{-1} B, (s I - A)^{-2} B, ...}``.

    ``shifts`` is cycled block by block; the default is a single real shift
    ``0.1 |abscissa(A)|``. On breakdown (an invariant subspace was reached) the
    basis is padded with deterministic pseudo-random directions.
    """
    n = sys.n
    if not 0 < r <= n:
        raise ValueError(f"need 0 < r <= n, got r={r}, n={n}")
    shifts = [default_shift(sys)] if shifts is None else list(shifts)
    lus = {}
    for s in set(shifts):
        Ms = s * np.eye(n) - sys.A
        if np.linalg.cond(Ms) > 1e14:
            raise ShiftSingular(f"shift {s} is (nearly) an eigenvalue of A")
        lus[s] = spla.lu_factor(Ms)

    basis: list[np.ndarray] = []
    block = sys.B.copy()
    k = 0
    rng = np.random.default_rng(0)
    scale = np.linalg.norm(sys.B) or 1.0
    while len(basis) < r:
        s = shifts[k % len(shifts)]
        block = spla.lu_solve(lus[s], block)
        new_cols = []
        for j in range(block.shape[1]):
            if len(basis) >= r:
                break
            v, nv = _orth_against(block[:, j], basis)
            if nv <= 1e-12 * max(np.linalg.norm(block[:, j]), 1e-300):
                continue
            v = v / nv
            basis.append(v)
            new_cols.append(v)
        if not new_cols:
            log.info("Krylov breakdown after %d vectors; padding", len(basis))
            v, nv = _orth_against(rng.standard_normal(n) * scale, basis)
            basis.append(v / nv)
            block = basis[-1][:, None]
        else:
            block = np.column_stack(new_cols)
        k += 1
    return np.column_stack(basis[:r])


def krylov_reduce(sys: LqoSystem, r: int, shifts=None):
    """One-sided (Galerkin) rational Krylov reduction.

    Returns
    -------
    red : ReducedLqo
    W, V : (n, r) arrays
        ``W = V`` with orthonormal columns.
    """
    V = krylov_basis(sys, r, shifts)
    red = petrov_galerkin(sys, V, V)
    if not red.is_hurwitz:
        log.warning("Krylov reduced model is not Hurwitz (abscissa %.3e)", red.spectral_abscissa)
    return red, V.copy(), V


def _psd_sqrt(S):
    lam, U = np.linalg.eigh(0.5 * (S + S.T))
    if lam.min() < -TAU_PSD * max(np.abs(lam).max(), 1.0):
        raise ValueError("Gramian is indefinite beyond round-off")
    return U * np.sqrt(np.clip(lam, 0.0, None))


def bt_factors(sys: LqoSystem) -> BtFactors:
    G = sys.gramians
    Lp = _psd_sqrt(G.P)
    Lq = _psd_sqrt(G.Q)
    hsv = np.linalg.svd(Lq.T @ Lp, compute_uv=False)
    return BtFactors(Lp, Lq, hsv)


def bt_projection(sys: LqoSystem, r: int):
    """Square-root balancing projection ``(W, V, hankel_values)`` of order ``<= r``."""
    if not 0 < r <= sys.n:
        raise ValueError(f"need 0 < r <= n, got r={r}, n={sys.n}")
    f = bt_factors(sys)
    U, s, Zt = np.linalg.svd(f.Lq.T @ f.Lp)
    rank = int(np.sum(s > TAU_PSD * s[0])) if s[0] > 0 else 0
    if rank < r:
        warnings.warn(f"numerical rank {rank} < requested order {r}; capping",
                      NumericalRankLoss, stacklevel=2)
        r = max(rank, 1)
    isq = 1.0 / np.sqrt(s[:r])
    W = f.Lq @ U[:, :r] * isq
    V = f.Lp @ Zt[:r].T * isq
    return W, V, s


def bt_reduce(sys: LqoSystem, r: int):
    """Structure-preserving balanced truncation; returns ``(red, hankel_values)``.

    ``Mhat = V^T M V`` with the oblique balancing basis ``V``.
    """
    W, V, hsv = bt_projection(sys, r)
    red = petrov_galerkin(sys, W, V)
    if not red.is_hurwitz:
        log.warning("BT reduced model is not Hurwitz (abscissa %.3e)", red.spectral_abscissa)
    return red, hsv
