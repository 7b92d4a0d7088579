import numpy as np
import pytest

from lqomor.densela import solve_sylvester
from lqomor.exceptions import DimensionMismatch, ResolventSingular
from lqomor.laguerre import (
    LaguerreApprox,
    LaguerreConfig,
    approx_k,
    approx_x,
    auto_alpha,
    calibrate,
    full_factors,
    laguerre_coeffs,
    offline_online_split,
    reduced_factors,
)
from lqomor.lqo import CrossTerms, LqoSystem, ReducedLqo, _grads_from_terms

from conftest import random_reduced, random_system, relerr, stable_matrix


class TestCoeffs:
    def test_terminating_scalar(self):
        blocks = laguerre_coeffs([[-1.0]], LaguerreConfig(alpha=1.0, N=3))
        assert blocks[0][0, 0] == pytest.approx(np.sqrt(2) / 2, abs=1e-15)
        assert blocks[1][0, 0] == 0.0 and blocks[2][0, 0] == 0.0

    def test_geometric_scalar(self):
        blocks = laguerre_coeffs([[-2.0]], LaguerreConfig(alpha=1.0, N=6))
        for k, b in enumerate(blocks):
            assert b[0, 0] == pytest.approx(np.sqrt(2) / 3 * (1 / 3) ** k, rel=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_decay(self, seed):
        A = stable_matrix(np.random.default_rng(seed), 8)
        norms = [np.linalg.norm(b, 2) for b in laguerre_coeffs(A, LaguerreConfig(N=200))]
        assert norms[-1] < 1e-3 * norms[0]
        assert max(norms[150:]) < max(norms[:50])

    def test_printed_recurrence_diverges(self):
        blocks = laguerre_coeffs([[-2.0]], LaguerreConfig(alpha=1.0, N=5, recurrence="printed"))
        ratios = [blocks[k + 1][0, 0] / blocks[k][0, 0] for k in range(4)]
        assert np.allclose(np.abs(ratios), 3.0)

    def test_resolvent_singular(self):
        with pytest.raises(ResolventSingular):
            laguerre_coeffs([[1.0]], LaguerreConfig(alpha=1.0))
        with pytest.raises(ResolventSingular):
            laguerre_coeffs([[-1.0]], LaguerreConfig(alpha=1.0, recurrence="printed"))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LaguerreConfig(alpha=-1.0)
        with pytest.raises(ValueError):
            LaguerreConfig(N=0)

    def test_auto_alpha(self):
        assert auto_alpha(np.diag([-1.0, -100.0])) == pytest.approx(10.0)


class TestApprox:
    def test_s2_x_exact(self, s1, s2_red):
        cfg = LaguerreConfig(alpha=1.0, N=1)
        X = approx_x(full_factors(s1, cfg), reduced_factors(s2_red, 1.0, 1))
        assert X[0, 0] == pytest.approx(1 / 3, abs=1e-14)

    def test_s2_k_exact(self, s1, s2_red):
        cfg = LaguerreConfig(alpha=1.0, N=2)
        ff, rf = full_factors(s1, cfg), reduced_factors(s2_red, 1.0, 2)
        assert np.allclose(ff.G[:, :3], np.sqrt(2) / 2 * np.array([[1.0, 1.0, 0.0]]), atol=1e-15)
        assert approx_k(ff, rf)[0, 0] == pytest.approx(-5 / 9, abs=1e-14)

    def test_zero_input(self, rng):
        s = LqoSystem(stable_matrix(rng, 5), np.zeros((5, 1)), np.ones((1, 5)), np.eye(5))
        red = random_reduced(rng, 2)
        cfg = LaguerreConfig(N=10)
        assert np.all(approx_x(full_factors(s, cfg), reduced_factors(red, 1.0, 10)) == 0)

    def test_no_output(self, rng):
        s = LqoSystem(stable_matrix(rng, 5), np.ones((5, 1)), np.zeros((1, 5)), np.zeros((5, 5)))
        red = ReducedLqo(stable_matrix(rng, 2), np.ones((2, 1)), np.zeros((1, 2)), np.zeros((2, 2)))
        cfg = LaguerreConfig(N=10)
        assert np.all(approx_k(full_factors(s, cfg), reduced_factors(red, 1.0, 10)) == 0)

    def test_random_against_direct(self, rng):
        s, red = random_system(rng, 20), random_reduced(rng, 3)
        cfg = LaguerreConfig(alpha=1.0, N=60)
        ff, rf = full_factors(s, cfg), reduced_factors(red, 1.0, 60)
        ct = CrossTerms(s, red)
        assert relerr(approx_x(ff, rf), ct.X) <= 1e-6
        assert relerr(approx_k(ff, rf), ct.K) <= 1e-5
        X = solve_sylvester(s.A, red.A.T, s.B @ red.B.T)
        assert relerr(approx_x(ff, rf), X) <= 1e-6

    def test_monotone_in_n(self, rng):
        s, red = random_system(rng, 15), random_reduced(rng, 3)
        X = CrossTerms(s, red).X
        errs = []
        for N in (5, 10, 20, 40, 80):
            e = relerr(approx_x(full_factors(s, LaguerreConfig(N=N)), reduced_factors(red, 1.0, N)), X)
            errs.append(max(e, 1e-12))
        assert all(b <= a * (1 + 1e-6) for a, b in zip(errs, errs[1:]))

    def test_mismatch(self, s1, s2_red):
        with pytest.raises(DimensionMismatch):
            approx_x(full_factors(s1, LaguerreConfig(N=3)), reduced_factors(s2_red, 1.0, 4))
        with pytest.raises(DimensionMismatch):
            approx_k(full_factors(s1, LaguerreConfig(alpha=2.0, N=3)), reduced_factors(s2_red, 1.0, 3))


class TestOfflineOnline:
    def test_cache_identity_and_keying(self, rng):
        s = random_system(rng, 10)
        a = offline_online_split(s, LaguerreConfig(N=10))
        b = offline_online_split(s, LaguerreConfig(N=10))
        assert a is b and a == full_factors(s, LaguerreConfig(N=10))
        c = offline_online_split(s, LaguerreConfig(N=12))
        d = offline_online_split(s, LaguerreConfig(alpha=2.0, N=10))
        assert c.N == 12 and d.alpha == 2.0 and c is not a and d is not a

    def test_calibrate_reaches_tol(self, rng):
        s, red = random_system(rng, 12), random_reduced(rng, 2)
        cfg = LaguerreConfig(N=5, tol=1e-8)
        N = calibrate(s, red, cfg)
        ff, rf = full_factors(s, cfg, N), reduced_factors(red, 1.0, N)
        X = approx_x(ff, rf)
        res = np.linalg.norm(s.A @ X + X @ red.A.T + s.B @ red.B.T) / np.linalg.norm(s.B @ red.B.T)
        assert res < 1e-8 and N in (5, 10, 20, 40, 80, 160, 320)

    def test_gradient_consistency(self, rng):
        s, red = random_system(rng, 12), random_reduced(rng, 2)
        V = np.linalg.qr(rng.standard_normal((12, 2)))[0]
        from lqomor.lqo import petrov_galerkin
        red = petrov_galerkin(s, V, V)
        ref = _grads_from_terms(s, V, V, CrossTerms(s, red))
        ap = LaguerreApprox(s, LaguerreConfig(N=10, auto_calibrate=True, tol=1e-10), red)
        fast = _grads_from_terms(s, V, V, CrossTerms(s, red, ap))
        assert relerr(fast[0], ref[0]) < 1e-5 and relerr(fast[1], ref[1]) < 1e-5
