import numpy as np
import pytest

from lqomor.exceptions import GridMismatch, NonFiniteState
from lqomor.lqo import LqoSystem, ReducedLqo
from lqomor.simbench import (ExperimentConfig, Trajectory, fmt, gen_random_system, make_input,
                             relative_error_series, report_files, run_experiment, simulate)


def _scalar(C, M):
    return ReducedLqo([[-1.0]], [[1.0]], [[C]], [[M]])


class TestGenerator:
    def test_deterministic(self):
        a, b = gen_random_system(20, 7), gen_random_system(20, 7)
        assert np.array_equal(a.A, b.A)
        assert not np.array_equal(a.A, gen_random_system(20, 8).A)

    def test_hurwitz_sweep(self):
        for seed in range(100):
            s = gen_random_system(50, seed)
            assert np.linalg.eigvalsh(0.5 * (s.A + s.A.T)).max() < 0
            assert s.spectral_abscissa < 0

    def test_structure(self):
        s = gen_random_system(6, 0)
        assert np.array_equal(s.C, np.ones((1, 6))) and np.array_equal(s.B, np.ones((6, 1)))
        assert np.array_equal(s.M, np.eye(6))
        x = np.arange(6.0)
        assert (s.C @ x).item() == x.sum()

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            gen_random_system(1, 0)


class TestSimulate:
    def test_zero_input(self):
        tr = simulate(gen_random_system(10, 0), make_input("zero"), 2.0, 0.01)
        assert np.all(tr.outputs == 0)

    def test_linear_closed_form(self):
        tr = simulate(_scalar(1.0, 0.0), make_input("step"), 10.0, 1e-3)
        assert np.abs(tr.outputs - (1 - np.exp(-tr.times))).max() <= 1e-8
        assert tr.times[0] == 0 and tr.times[-1] == pytest.approx(10.0) and len(tr.times) == 10001

    def test_quadratic_closed_form(self):
        tr = simulate(_scalar(0.0, 1.0), make_input("const:1"), 10.0, 1e-3)
        assert np.abs(tr.outputs - (1 - np.exp(-tr.times)) ** 2).max() <= 1e-8

    def test_fourth_order(self):
        errs = []
        for dt in (0.1, 0.05, 0.025):
            tr = simulate(_scalar(1.0, 1.0), make_input("step"), 5.0, dt)
            e = 1 - np.exp(-tr.times)
            errs.append(np.abs(tr.outputs - (e + e * e)).max())
        for a, b in zip(errs, errs[1:]):
            assert 8 <= a / b <= 32

    def test_callable_input_and_reduced(self):
        red = ReducedLqo(np.diag([-1.0, -2.0]), np.ones((2, 1)), np.ones((1, 2)), np.eye(2))
        a = simulate(red, lambda t: np.array([np.exp(np.sin(2 * t))]), 1.0, 0.01)
        b = simulate(red, make_input("exp_sin2"), 1.0, 0.01)
        assert np.allclose(a.outputs, b.outputs, rtol=1e-14)

    def test_blowup(self):
        s = LqoSystem([[1.0]], [[1.0]], [[1.0]], [[1.0]], check_stable=False)
        with pytest.raises(NonFiniteState):
            simulate(s, make_input("step"), 1000.0, 0.5)

    def test_dt_must_divide(self):
        with pytest.raises(ValueError):
            simulate(_scalar(1.0, 0.0), make_input("step"), 1.0, 0.3)

    def test_unknown_input(self):
        with pytest.raises(ValueError):
            make_input("sawtooth")


class TestErrors:
    def test_identical(self):
        tr = simulate(_scalar(1.0, 0.0), make_input("step"), 1.0, 0.1)
        assert np.all(relative_error_series(tr, tr).outputs == 0)

    def test_zero_prediction(self):
        t = np.linspace(0, 1, 5)
        y = Trajectory(t, np.array([0.0, 1.0, -2.0, 3.0, 4.0]))
        e = relative_error_series(y, Trajectory(t, np.zeros(5)))
        assert np.array_equal(e.outputs, [0.0, 1.0, 1.0, 1.0, 1.0])

    def test_guard(self):
        t = np.linspace(0, 1, 3)
        e = relative_error_series(Trajectory(t, np.array([1.0, 0.0, 1.0])), Trajectory(t, np.array([1.0, 1e-12, 1.0])))
        assert e.outputs[1] == pytest.approx(1.0)

    def test_grid_mismatch(self):
        a = Trajectory(np.linspace(0, 1, 3), np.ones(3))
        b = Trajectory(np.linspace(0, 1, 4), np.ones(4))
        with pytest.raises(GridMismatch):
            relative_error_series(a, b)

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 0.0]), np.ones(2))

    def test_fmt(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert float(fmt(np.pi)) == np.pi


class TestConfig:
    def test_mapping_roundtrip(self):
        cfg = ExperimentConfig.from_mapping({"n": "40", "r": "3", "methods": "ks,bt",
                                             "gaai_max_iters": "4", "srcg_gamma": "0.02",
                                             "laguerre_alpha": "auto", "ks_shifts": "0.5,1.5"})
        assert cfg.n == 40 and cfg.methods == ("ks", "bt") and cfg.gaai.max_iters == 4
        assert cfg.srcg.gamma == 0.02 and cfg.laguerre.alpha == "auto" and cfg.ks_shifts == (0.5, 1.5)
        assert ExperimentConfig.from_mapping(cfg.to_mapping()) == cfg

    def test_typed_mapping_without_shifts(self):
        cfg = ExperimentConfig(n=40, r=3)
        again = ExperimentConfig.from_mapping({**cfg.to_mapping(), "seed": 5})
        assert again.ks_shifts is None and again.seed == 5
        assert ExperimentConfig.from_mapping({"ks_shifts": [0.5]}).ks_shifts == (0.5,)

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            ExperimentConfig.from_mapping({"nn": "3"})

    def test_invalid(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=5, r=5)
        with pytest.raises(ValueError):
            ExperimentConfig(methods=("irka",))


class TestExperiment:
    def test_single_method(self):
        rep = run_experiment(ExperimentConfig(n=30, r=4, methods=("ks",), t_end=2.0, dt=0.01))
        assert [r.method for r in rep.results] == ["ks"]
        assert rep.row("ks").status == "ok" and rep.gradient_timing is None
        assert set(report_files(rep)) == {"trajectory_ks.csv", "summary.txt"}

    def test_failure_isolated(self):
        cfg = ExperimentConfig(n=12, r=3, methods=("ks", "bt"), t_end=1.0, dt=0.01,
                               ks_shifts=(-1e300,))
        rep = run_experiment(cfg)
        assert rep.row("bt").status == "ok"

    def test_deterministic_values(self):
        cfg = ExperimentConfig(n=20, r=3, methods=("bt", "gaai"), t_end=1.0, dt=0.01,
                               time_gradients=False)
        a, b = run_experiment(cfg), run_experiment(cfg)
        files = report_files(a)
        csvs = [k for k in files if k.endswith(".csv")]
        assert len(csvs) == 3 and all(files[k] == report_files(b)[k] for k in csvs)
        assert files["history_gaai.csv"].splitlines()[0] == "iter,cost,rel_grad_norm,step_v,step_w,stable"
        assert files["trajectory_bt.csv"].splitlines()[0] == "t,y,yhat,rel_err"
