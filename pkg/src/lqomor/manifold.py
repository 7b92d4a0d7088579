"""Grassmann and Stiefel geometry used by the two reduction iterations.

Grassmann points are handled through full-column-rank representatives; the
horizontal space at ``[U]`` is ``{xi : xi^T U = 0}`` with metric
``tr((U^T U)^{-1} xi^T eta)``. Stiefel points are orthonormal ``n x r``
matrices with the embedded metric ``tr(xi^T eta)``, QR retraction and
projection-based vector transport.
"""
from __future__ import annotations

import numpy as np

from .exceptions import RankDeficient

RANK_TOL = 1e-12

__all__ = [
    "check_full_rank",
    "grassmann_project",
    "grassmann_metric",
    "stiefel_project",
    "stiefel_metric",
    "stiefel_norm",
    "stiefel_retract",
    "transport",
    "scaled_transport",
    "qr_positive",
]


def check_full_rank(U: np.ndarray) -> None:
    s = np.linalg.svd(U, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient("representative is not of full column rank")


def grassmann_project(U, Z) -> np.ndarray:
    """Horizontal projection ``(I - U (U^T U)^{-1} U^T) Z``."""
    U = np.asarray(U, dtype=float)
    Z = np.asarray(Z, dtype=float)
    check_full_rank(U)
    # least squares avoids forming (U^T U)^{-1} explicitly
    coef = np.linalg.lstsq(U, Z, rcond=None)[0]
    return Z - U @ coef


def grassmann_metric(U, xi, eta) -> float:
    U = np.asarray(U, dtype=float)
    check_full_rank(U)
    G = U.T @ U
    return float(np.trace(np.linalg.solve(G, xi.T @ eta)))


def stiefel_project(V, D) -> np.ndarray:
    """Tangent projection ``D - V sym(V^T D)`` at an orthonormal ``V``."""
    VtD = V.T @ D
    return D - 0.5 * V @ (VtD + VtD.T)


def stiefel_metric(xi, eta) -> float:
    return float(np.sum(xi * eta))


def stiefel_norm(xi) -> float:
    return float(np.linalg.norm(xi))


def qr_positive(Y) -> np.ndarray:
    """Thin QR factor ``Q`` with the sign convention ``diag(R) > 0``."""
    Q, R = np.linalg.qr(Y)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def stiefel_retract(V, xi) -> np.ndarray:
    """QR retraction ``qf(V + xi)``."""
    return qr_positive(V + xi)


def transport(V_from, step, eta) -> np.ndarray:
    """Carry ``eta`` to the tangent space at ``stiefel_retract(V_from, step)``."""
    V_to = stiefel_retract(V_from, step)
    return stiefel_project(V_to, eta)


def scaled_transport(V_from, step, eta, transport_fn=transport) -> np.ndarray:
    """Transport rescaled so its norm never exceeds ``||eta||``.

    With the default projection transport the factor is always 1, since an
    orthogonal projection cannot increase the norm; ``transport_fn`` allows
    other (possibly expanding) transports.
    """
    T = transport_fn(V_from, step, eta)
    nt = stiefel_norm(T)
    ne = stiefel_norm(eta)
    if nt <= ne or nt == 0.0:
        return T
    out = T * (ne / nt)
    # rounding in the rescale may overshoot by an ulp; the bound is exact
    while stiefel_norm(out) > ne:
        out = out * (1.0 - 2.0 ** -52)
    return out
