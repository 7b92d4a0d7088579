"""Reducers with a scikit-learn style interface.

``fit`` takes a full-order system and stores the reduced model in
``reduced_``; ``predict`` simulates the reduced model for a given input.
Hyperparameters live on the instance so ``get_params``/``set_params`` and
``sklearn.base.clone`` behave as usual.
"""
from __future__ import annotations

from dataclasses import fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import bt_projection, krylov_reduce
from .gaai import GaaiConfig, run_gaai
from .laguerre import LaguerreApprox, LaguerreConfig
from .lqo import cost_j, petrov_galerkin
from .simbench import make_input, simulate
from .srcg import SrcgConfig, run_srcg
from .validation import check_lqo_system, check_order, check_projection, check_time_grid

__all__ = ["KrylovReducer", "BalancedTruncationReducer", "GaaiReducer", "SrcgReducer"]


class _ReducerMixin:
    def predict(self, u="exp_sin2", t_end=10.0, dt=1e-3):
        """Output trajectory of the reduced model from a zero initial state.

        Parameters
        ----------
        u : str or callable
            Input spec understood by :func:`lqomor.simbench.make_input`, or a
            function of time returning the input vector.
        """
        check_is_fitted(self, "reduced_")
        t_end, dt = check_time_grid(t_end, dt)
        if isinstance(u, str):
            u = make_input(u, self.reduced_.B.shape[1])
        return simulate(self.reduced_, u, t_end, dt)

    def score(self, system) -> float:
        """Negative squared H2 error against ``system`` (higher is better)."""
        check_is_fitted(self, "reduced_")
        return -cost_j(check_lqo_system(system), self.reduced_)

    def _store(self, red, W, V, history):
        self.reduced_ = red
        self.W_ = W
        self.V_ = V
        self.history_ = history
        self.n_iter_ = max(len(history) - 1, 0) if history else 0
        return self


def _config(cls, est, prefix=""):
    return cls(**{f.name: getattr(est, prefix + f.name) for f in fields(cls)
                  if hasattr(est, prefix + f.name)})


class KrylovReducer(_ReducerMixin, BaseEstimator):
    """One-sided rational Krylov projection.

    Parameters
    ----------
    r : int
    shifts : sequence of float, optional
        Interpolation points, cycled block by block. Defaults to
        ``0.1 |abscissa(A)|``.
    """

    def __init__(self, r=10, shifts=None):
        self.r = r
        self.shifts = shifts

    def fit(self, system, y=None):
        sys = check_lqo_system(system)
        r = check_order(self.r, sys.n)
        red, W, V = krylov_reduce(sys, r, self.shifts)
        return self._store(red, W, V, [])


class BalancedTruncationReducer(_ReducerMixin, BaseEstimator):
    """Square-root balanced truncation with the quadratic-output Gramian."""

    def __init__(self, r=10):
        self.r = r

    def fit(self, system, y=None):
        sys = check_lqo_system(system)
        r = check_order(self.r, sys.n)
        W, V, hsv = bt_projection(sys, r)
        self.hankel_values_ = hsv
        return self._store(petrov_galerkin(sys, W, V), W, V, [])


class GaaiReducer(_ReducerMixin, BaseEstimator):
    """Alternating Grassmann optimization started from a Krylov basis.

    ``fit(system, W0=None, V0=None)`` accepts an explicit start.
    """

    def __init__(self, r=10, alpha1=1e-4, alpha2=1e-4, omega1=0.3, omega2=0.3,
                 gamma1=2.0, gamma2=2.0, max_iters=16, max_backtracks=30, grad_tol=0.0,
                 stability_check="spectral", shifts=None, fast_gradient=False,
                 laguerre_alpha="auto", laguerre_N=40):
        self.r = r
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.omega1 = omega1
        self.omega2 = omega2
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.max_iters = max_iters
        self.max_backtracks = max_backtracks
        self.grad_tol = grad_tol
        self.stability_check = stability_check
        self.shifts = shifts
        self.fast_gradient = fast_gradient
        self.laguerre_alpha = laguerre_alpha
        self.laguerre_N = laguerre_N

    def fit(self, system, y=None, W0=None, V0=None):
        sys = check_lqo_system(system)
        r = check_order(self.r, sys.n)
        if V0 is None:
            red0, W0, V0 = krylov_reduce(sys, r, self.shifts)
        else:
            V0 = check_projection(V0, sys.n, r, "V0")
            W0 = V0 if W0 is None else check_projection(W0, sys.n, r, "W0")
            red0 = petrov_galerkin(sys, *_bio(W0, V0))
        approx = None
        if self.fast_gradient:
            approx = LaguerreApprox(sys, LaguerreConfig(self.laguerre_alpha, self.laguerre_N), red0)
        res = run_gaai(sys, W0, V0, _config(GaaiConfig, self), approx)
        self.n_backtrack_failures_ = res.n_exhausted
        return self._store(res.reduced, res.W, res.V, res.history)


def _bio(W, V):
    return W, np.linalg.solve((W.T @ V).T, V.T).T


class SrcgReducer(_ReducerMixin, BaseEstimator):
    """Stability-preserving Stiefel conjugate gradient started from a Krylov basis."""

    def __init__(self, r=10, c1=0.01, c2=0.7, omega=0.7, gamma=0.01, grad_tol=1e-4,
                 max_iters=1000, max_backtracks=60, stability_check="petrov", shifts=None,
                 fast_gradient=False, laguerre_alpha="auto", laguerre_N=40):
        self.r = r
        self.c1 = c1
        self.c2 = c2
        self.omega = omega
        self.gamma = gamma
        self.grad_tol = grad_tol
        self.max_iters = max_iters
        self.max_backtracks = max_backtracks
        self.stability_check = stability_check
        self.shifts = shifts
        self.fast_gradient = fast_gradient
        self.laguerre_alpha = laguerre_alpha
        self.laguerre_N = laguerre_N

    def fit(self, system, y=None, V0=None, H=None):
        sys = check_lqo_system(system)
        r = check_order(self.r, sys.n)
        if V0 is None:
            red0, _, V0 = krylov_reduce(sys, r, self.shifts)
        else:
            V0 = check_projection(V0, sys.n, r, "V0")
            red0 = None
        approx = None
        if self.fast_gradient:
            approx = LaguerreApprox(sys, LaguerreConfig(self.laguerre_alpha, self.laguerre_N), red0)
        res = run_srcg(sys, V0, _config(SrcgConfig, self), H=H, approx=approx)
        self.H_ = res.H
        self.all_iterates_hurwitz_ = all(res.iterates_hurwitz)
        return self._store(res.reduced, res.W, res.V, res.history)
