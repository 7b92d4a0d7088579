"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatch
from .lqo import LqoSystem, ReducedLqo

__all__ = ["check_lqo_system", "check_order", "check_projection", "check_time_grid"]


def check_lqo_system(system, *, require_stable: bool = True) -> LqoSystem:
    """Coerce ``system`` to an :class:`LqoSystem`.

    Accepts an existing system, a :class:`ReducedLqo`, or a tuple ``(A, B, C, M)``.
    Arrays must be finite; ``B`` may be given as a vector.
    """
    if isinstance(system, LqoSystem):
        if require_stable and not system.is_hurwitz:
            from .exceptions import NotHurwitz
            raise NotHurwitz("A is not Hurwitz")
        return system
    if isinstance(system, ReducedLqo):
        return LqoSystem(system.A, system.B, system.C, system.M, check_stable=require_stable)
    try:
        A, B, C, M = system
    except (TypeError, ValueError):
        raise TypeError("expected an LqoSystem or a tuple (A, B, C, M)") from None
    A = check_array(A, ensure_2d=True, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    B = np.asarray(B, dtype=float)
    B = check_array(B.reshape(n, -1) if B.ndim == 1 else B, dtype=np.float64)
    C = check_array(np.atleast_2d(np.asarray(C, dtype=float)), dtype=np.float64)
    M = check_array(M, dtype=np.float64)
    return LqoSystem(A, B, C, M, check_stable=require_stable)


def check_order(r, n: int) -> int:
    if isinstance(r, bool) or not isinstance(r, numbers.Integral):
        raise TypeError(f"reduced order must be an integer, got {r!r}")
    r = int(r)
    if not 0 < r < n:
        raise ValueError(f"reduced order must satisfy 0 < r < n={n}, got {r}")
    return r


def check_projection(P, n: int, r: int, name: str = "V") -> np.ndarray:
    P = check_array(P, dtype=np.float64)
    if P.shape != (n, r):
        raise DimensionMismatch(f"{name} must be {n} x {r}, got {P.shape}")
    return P


def check_time_grid(t_end, dt) -> tuple[float, float]:
    t_end, dt = float(t_end), float(dt)
    if not (np.isfinite(t_end) and np.isfinite(dt) and t_end > 0 and dt > 0):
        raise ValueError("t_end and dt must be positive and finite")
    return t_end, dt
