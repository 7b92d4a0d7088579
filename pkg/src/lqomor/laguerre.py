"""Low-rank Sylvester approximations from scaled Laguerre expansions.

With ``phi_k`` the orthonormal Laguerre functions of scale ``alpha`` on
``[0, inf)``, ``exp(A t) = sum_k A_k phi_k(t)`` where

    A_0 = sqrt(2 alpha) (alpha I - A)^{-1},
    A_k = (A + alpha I)(A - alpha I)^{-1} A_{k-1}.

For Hurwitz ``A`` the ratio has spectral radius < 1, so the blocks decay
geometrically. Orthonormality turns the integral representation of ``X`` into
``X ~ F Fhat^T`` with ``F = [A_0 B, ..., A_{N-1} B]``, and likewise
``K ~ -G Ghat^T`` with ``G = [A_k^T (C^T, sqrt(2) M F)]_k``.

The full-order blocks ``F`` and ``G`` are built once per ``(sys, alpha, N)``;
each iterate then only needs the ``r``-dimensional ``Fhat`` and ``Ghat``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.linalg as spla

from .exceptions import DimensionMismatch, ResolventSingular

__all__ = [
    "LaguerreConfig",
    "LaguerreFactors",
    "laguerre_coeffs",
    "full_factors",
    "reduced_factors",
    "approx_x",
    "approx_k",
    "calibrate",
    "offline_online_split",
    "LaguerreApprox",
    "auto_alpha",
]

_N_MAX = 320
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class LaguerreConfig:
    """Expansion settings.

    ``recurrence="printed"`` swaps in ``A_0 = sqrt(2a)(aI + A)^{-1}`` with
    ratio ``(A - aI)(A + aI)^{-1}``, whose ratio has modulus > 1 on a Hurwitz
    spectrum; it is kept only to demonstrate that it diverges.
    """

    alpha: float | str = 1.0
    N: int = 40
    auto_calibrate: bool = False
    tol: float = 1e-6
    recurrence: str = "corrected"

    def __post_init__(self):
        if self.alpha != "auto" and not (isinstance(self.alpha, (int, float)) and self.alpha > 0):
            raise ValueError("alpha must be positive or 'auto'")
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if self.recurrence not in ("corrected", "printed"):
            raise ValueError(f"unknown recurrence {self.recurrence!r}")


def auto_alpha(A) -> float:
    """``sqrt(min|lambda| * max|lambda|)`` over the eigenvalues of ``A``."""
    lam = np.abs(np.linalg.eigvals(np.atleast_2d(A)))
    lo, hi = lam.min(), lam.max()
    if hi == 0:
        return 1.0
    return float(np.sqrt(max(lo, 1e-300) * hi))


def _resolve(cfg: LaguerreConfig, A) -> LaguerreConfig:
    if cfg.alpha == "auto":
        return replace(cfg, alpha=auto_alpha(A))
    return cfg


def _resolvent_lu(A, alpha, recurrence):
    n = A.shape[0]
    I = np.eye(n)
    if recurrence == "corrected":
        inv_of, num = A - alpha * I, A + alpha * I
    else:
        inv_of, num = A + alpha * I, A - alpha * I
    sv = np.linalg.svd(inv_of, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1.0):
        raise ResolventSingular(f"alpha={alpha} collides with the spectrum of A")
    return spla.lu_factor(inv_of), num


def laguerre_coeffs(A, cfg: LaguerreConfig) -> list[np.ndarray]:
    """Explicit coefficient blocks ``A_0, ..., A_{N-1}``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    cfg = _resolve(cfg, A)
    lu, num = _resolvent_lu(A, cfg.alpha, cfg.recurrence)
    sgn = -1.0 if cfg.recurrence == "corrected" else 1.0
    # (alpha I - A)^{-1} = -(A - alpha I)^{-1}
    blk = sgn * np.sqrt(2 * cfg.alpha) * spla.lu_solve(lu, np.eye(n))
    out = [blk]
    for _ in range(1, int(cfg.N)):
        blk = num @ spla.lu_solve(lu, blk)
        out.append(blk)
    return out


def _apply_blocks(lu, num, sgn, alpha, Z, N, trans=False):
    """Return ``[A_0 Z, ..., A_{N-1} Z]`` (or with ``A_k^T``) without forming A_k."""
    cols = []
    if trans:
        b = sgn * np.sqrt(2 * alpha) * spla.lu_solve(lu, Z, trans=1)
    else:
        b = sgn * np.sqrt(2 * alpha) * spla.lu_solve(lu, Z)
    cols.append(b)
    for _ in range(1, N):
        if trans:
            b = spla.lu_solve(lu, num.T @ b, trans=1)
        else:
            b = num @ spla.lu_solve(lu, b)
        cols.append(b)
    return np.hstack(cols)


@dataclass(frozen=True, eq=False)
class LaguerreFactors:
    """Block factors for one side of the expansion.

    ``coeff_blocks`` is only populated for the small (reduced) side; for the
    full-order side the products ``A_k B`` and ``A_k^T (C^T, sqrt2 M F)`` are
    generated directly from one LU factorization.
    """

    alpha: float
    N: int
    F: np.ndarray
    G: np.ndarray
    coeff_blocks: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, LaguerreFactors):
            return NotImplemented
        return (self.alpha == other.alpha and self.N == other.N
                and np.array_equal(self.F, other.F) and np.array_equal(self.G, other.G))

    __hash__ = None


def _gblock(Cm, Mm, F):
    return np.hstack([Cm.T, _SQRT2 * (Mm @ F)])


def full_factors(sys, cfg: LaguerreConfig, N: int | None = None) -> LaguerreFactors:
    N = int(cfg.N if N is None else N)
    cfg = _resolve(cfg, sys.A)
    lu, num = _resolvent_lu(sys.A, cfg.alpha, cfg.recurrence)
    sgn = -1.0 if cfg.recurrence == "corrected" else 1.0
    F = _apply_blocks(lu, num, sgn, cfg.alpha, sys.B, N)
    G = _apply_blocks(lu, num, sgn, cfg.alpha, _gblock(sys.C, sys.M, F), N, trans=True)
    return LaguerreFactors(cfg.alpha, N, F, G)


def reduced_factors(red, alpha: float, N: int, recurrence: str = "corrected",
                    y_scale: bool = False) -> LaguerreFactors:
    """Factors ``Fhat, Ghat`` of a reduced model (explicit ``r x r`` blocks)."""
    cfg = LaguerreConfig(alpha, N, recurrence=recurrence)
    blocks = laguerre_coeffs(red.A, cfg)
    Fh = np.hstack([Ak @ red.B for Ak in blocks])
    Z = _gblock(red.C, red.M, Fh)
    if y_scale:
        # Y carries M X Mhat with weight 1 instead of 2
        Z = Z.copy()
        Z[:, 1:] *= 0.5
    Gh = np.hstack([Ak.T @ Z for Ak in blocks])
    return LaguerreFactors(alpha, N, Fh, Gh, tuple(blocks))


def _match(full: LaguerreFactors, red: LaguerreFactors):
    if full.N != red.N or full.alpha != red.alpha:
        raise DimensionMismatch("full and reduced factors use different (alpha, N)")


def approx_x(full: LaguerreFactors, red: LaguerreFactors) -> np.ndarray:
    """``X ~ F Fhat^T`` solving ``A X + X Ahat^T + B Bhat^T = 0`` approximately."""
    _match(full, red)
    if full.F.shape[1] != red.F.shape[1]:
        raise DimensionMismatch("input dimensions differ")
    return full.F @ red.F.T


def approx_k(full: LaguerreFactors, red: LaguerreFactors) -> np.ndarray:
    """``K ~ -G Ghat^T`` solving ``A^T K + K Ahat - C^T Chat - 2 M X Mhat = 0`` approximately."""
    _match(full, red)
    if full.G.shape[1] != red.G.shape[1]:
        raise DimensionMismatch("factor widths differ")
    return -full.G @ red.G.T


def _x_residual(sys, red, X):
    R = sys.B @ red.B.T
    res = sys.A @ X + X @ red.A.T + R
    return np.linalg.norm(res) / max(np.linalg.norm(R), 1e-300)


def calibrate(sys, red, cfg: LaguerreConfig) -> int:
    """Double ``N`` from ``cfg.N`` until the X residual drops below ``cfg.tol`` (cap 320)."""
    N = int(cfg.N)
    cfg = _resolve(cfg, sys.A)
    while True:
        ff = full_factors(sys, cfg, N)
        rf = reduced_factors(red, cfg.alpha, N, cfg.recurrence)
        if _x_residual(sys, red, approx_x(ff, rf)) < cfg.tol or N >= _N_MAX:
            return N
        N = min(2 * N, _N_MAX)


def offline_online_split(sys, cfg: LaguerreConfig, N: int | None = None) -> LaguerreFactors:
    """Full-order factors, cached on ``sys`` per ``(alpha, N, recurrence)``."""
    cfg = _resolve(cfg, sys.A)
    key = (cfg.alpha, int(cfg.N if N is None else N), cfg.recurrence)
    cache = sys.__dict__.setdefault("_laguerre_cache", {})
    if key not in cache:
        cache[key] = full_factors(sys, cfg, key[1])
    return cache[key]


class _Online:
    def __init__(self, approx: "LaguerreApprox", red):
        self._a = approx
        self._red = red

    @cached_property
    def _rf(self):
        a = self._a
        return reduced_factors(self._red, a.cfg.alpha, a.N, a.cfg.recurrence)

    @cached_property
    def X(self):
        return approx_x(self._a.factors, self._rf)

    @cached_property
    def _ky(self):
        # K and Y share the full-order factor; one pass over it serves both
        a = self._a
        rf = self._rf
        _match(a.factors, rf)
        Gy = _gblock(self._red.C, self._red.M, rf.F)
        Gy[:, 1:] *= 0.5
        Gy = np.hstack([Ak.T @ Gy for Ak in rf.coeff_blocks])
        r = rf.G.shape[0]
        out = -a.factors.G @ np.vstack([rf.G, Gy]).T
        return out[:, :r], out[:, r:]

    @property
    def K(self):
        return self._ky[0]

    @property
    def Y(self):
        return self._ky[1]


class LaguerreApprox:
    """Plug-in for :class:`lqomor.lqo.CrossTerms` replacing the ``n x r`` solves."""

    def __init__(self, sys, cfg: LaguerreConfig, red0=None):
        self.sys = sys
        self.cfg = cfg = _resolve(cfg, sys.A)
        N = int(cfg.N)
        if cfg.auto_calibrate and red0 is not None:
            N = calibrate(sys, red0, cfg)
        self.N = N

    @property
    def factors(self) -> LaguerreFactors:
        return offline_online_split(self.sys, self.cfg, self.N)

    def online(self, red) -> _Online:
        return _Online(self, red)
