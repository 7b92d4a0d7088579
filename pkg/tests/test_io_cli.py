import os

import numpy as np
import pytest

from lqomor import io as lio
from lqomor.cli import main
from lqomor.exceptions import DimensionMismatch
from lqomor.lqo import ReducedLqo
from lqomor.simbench import gen_random_system


class TestMatrixMarket:
    def test_roundtrip_exact(self, tmp_path, rng):
        a = rng.standard_normal((4, 3))
        lio.write_mtx(tmp_path / "a.mtx", a)
        assert np.array_equal(lio.read_mtx(tmp_path / "a.mtx"), a)
        assert (tmp_path / "a.mtx").read_text().startswith("%%MatrixMarket matrix array real general")

    def test_column_major(self):
        body = [ln for ln in lio.mtx_text(np.array([[1.0, 2.0], [3.0, 4.0]])).splitlines()
                if not ln.startswith("%")]
        assert body[0].split() == ["2", "2"]
        assert [float(v) for v in body[1:]] == [1.0, 3.0, 2.0, 4.0]

    def test_system_roundtrip(self, tmp_path):
        s = gen_random_system(7, 3)
        lio.write_system(s, tmp_path / "sys", extra={"seed": 3})
        t = lio.read_system(tmp_path / "sys")
        assert all(np.array_equal(getattr(s, k), getattr(t, k)) for k in "ABCM")
        man = lio.read_kv(tmp_path / "sys" / "manifest.txt")
        assert man["kind"] == "full" and man["seed"] == "3" and man["n"] == "7"

    def test_reduced_kind(self, tmp_path, s2_red):
        lio.write_system(s2_red, tmp_path / "r")
        assert lio.read_kv(tmp_path / "r" / "manifest.txt")["kind"] == "reduced"

    def test_dimension_mismatch(self, tmp_path):
        lio.write_system(gen_random_system(4, 0), tmp_path / "s")
        lio.write_mtx(tmp_path / "s" / "M.mtx", np.eye(3))
        with pytest.raises(DimensionMismatch):
            lio.read_system(tmp_path / "s")

    def test_atomic_failure_leaves_nothing(self, tmp_path):
        class Boom:
            def __str__(self):
                raise RuntimeError("boom")
        with pytest.raises(RuntimeError):
            lio.write_system(gen_random_system(3, 0), tmp_path / "out", extra={"x": Boom()})
        assert not (tmp_path / "out").exists()
        assert os.listdir(tmp_path) == []

    def test_read_kv(self, tmp_path):
        p = tmp_path / "c.conf"
        p.write_text("# comment\n[section]\nn = 5  # trailing\n\nmethods=ks,bt\n")
        assert lio.read_kv(p) == {"n": "5", "methods": "ks,bt"}
        p.write_text("oops\n")
        with pytest.raises(ValueError):
            lio.read_kv(p)


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestCli:
    def test_gen_reduce_simulate_roundtrip(self, tmp_path, capsys):
        full, red, csv = tmp_path / "full", tmp_path / "red", tmp_path / "y.csv"
        assert _run(capsys, "gen", "--n", 300, "--seed", 0, "--out", full)[0] == 0
        assert _run(capsys, "reduce", "--system", full, "--method", "bt", "--r", 10, "--out", red)[0] == 0
        man = lio.read_kv(red / "manifest.txt")
        assert man["kind"] == "reduced" and man["n"] == "10" and man["method"] == "bt"
        assert _run(capsys, "simulate", "--system", red, "--tend", 1, "--dt", 0.001, "--out", csv)[0] == 0
        lines = csv.read_text().splitlines()
        assert lines[0] == "t,y" and len(lines) == 1002
        code, out, _ = _run(capsys, "h2error", "--full", full, "--reduced", red)
        assert code == 0 and float(out) == pytest.approx(float(man["h2_error"]), rel=1e-12)

    @pytest.mark.parametrize("method", ["ks", "gaai", "srcg"])
    def test_reduce_methods(self, tmp_path, capsys, method):
        conf = tmp_path / "c.conf"
        conf.write_text("gaai_max_iters = 3\nsrcg_max_iters = 5\n")
        _run(capsys, "gen", "--n", 20, "--seed", 1, "--out", tmp_path / "f")
        code, _, err = _run(capsys, "reduce", "--system", tmp_path / "f", "--method", method,
                            "--r", 3, "--out", tmp_path / "r", "--config", conf)
        assert code == 0, err
        red = lio.read_system(tmp_path / "r")
        assert red.n == 3 and red.is_hurwitz

    def test_fast_gradient_flag(self, tmp_path, capsys):
        _run(capsys, "gen", "--n", 20, "--seed", 1, "--out", tmp_path / "f")
        code, _, err = _run(capsys, "reduce", "--system", tmp_path / "f", "--method", "gaai",
                            "--r", 3, "--out", tmp_path / "r", "--fast-gradient")
        assert code == 0, err

    def test_h2error_identical(self, tmp_path, capsys):
        _run(capsys, "gen", "--n", 12, "--seed", 2, "--out", tmp_path / "f")
        code, out, _ = _run(capsys, "h2error", "--full", tmp_path / "f", "--reduced", tmp_path / "f")
        assert code == 0 and abs(float(out)) <= 1e-10

    @pytest.mark.parametrize("argv", [
        [],
        ["gen", "--n", "5", "--out", "x"],
        ["gen", "--n", "abc", "--seed", "1", "--out", "x"],
        ["reduce", "--system", "nowhere", "--method", "bt", "--r", "2", "--out", "x"],
        ["reduce", "--system", "SYS", "--method", "irka", "--r", "2", "--out", "x"],
        ["reduce", "--system", "SYS", "--method", "bt", "--r", "9", "--out", "x"],
        ["simulate", "--system", "SYS", "--tend", "-1", "--dt", "0.1", "--out", "x"],
        ["simulate", "--system", "SYS", "--tend", "1", "--dt", "0.3", "--out", "x"],
        ["bench", "--config", "missing.conf", "--out", "x"],
    ])
    def test_usage_errors(self, tmp_path, capsys, argv):
        lio.write_system(gen_random_system(6, 0), tmp_path / "SYS")
        argv = [str(tmp_path / a) if a in ("SYS", "x", "nowhere", "missing.conf") else a for a in argv]
        code, out, err = _run(capsys, *argv)
        assert code == 1 and out == "" and err
        assert not (tmp_path / "x").exists()

    def test_unknown_config_key(self, tmp_path, capsys):
        conf = tmp_path / "c.conf"
        conf.write_text("bogus = 1\n")
        code, _, err = _run(capsys, "bench", "--config", conf, "--out", tmp_path / "o")
        assert code == 1 and "bogus" in err

    def test_numerical_failure(self, tmp_path, capsys):
        A = np.array([[0.5, 0.0], [0.0, -1.0]])
        lio.write_system(ReducedLqo(A, np.ones((2, 1)), np.ones((1, 2)), np.eye(2)), tmp_path / "u")
        code, out, err = _run(capsys, "simulate", "--system", tmp_path / "u", "--tend", 1,
                              "--dt", 0.1, "--out", tmp_path / "y.csv")
        assert code == 2 and "numerical" in err
        assert not (tmp_path / "y.csv").exists()

    def test_thread_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("LQOMOR_THREADS", "1")
        assert _run(capsys, "gen", "--n", 4, "--seed", 0, "--out", tmp_path / "f")[0] == 0
        monkeypatch.setenv("LQOMOR_THREADS", "zero")
        assert _run(capsys, "gen", "--n", 4, "--seed", 0, "--out", tmp_path / "g")[0] == 1

    def test_bench_deterministic(self, tmp_path, capsys):
        conf = tmp_path / "b.conf"
        conf.write_text("n = 25\nr = 3\nt_end = 2\ndt = 0.01\nmethods = ks,bt,gaai,srcg\n"
                        "gaai_max_iters = 3\nsrcg_max_iters = 10\n")
        for d in ("a", "b"):
            code, out, err = _run(capsys, "bench", "--config", conf, "--out", tmp_path / d)
            assert code == 0, err
        names = sorted(p for p in os.listdir(tmp_path / "a") if p.endswith(".csv"))
        assert names == ["history_gaai.csv", "history_srcg.csv", "trajectory_bt.csv",
                         "trajectory_gaai.csv", "trajectory_ks.csv", "trajectory_srcg.csv"]
        for nm in names:
            assert (tmp_path / "a" / nm).read_bytes() == (tmp_path / "b" / nm).read_bytes()
        summary = (tmp_path / "a" / "summary.txt").read_text()
        assert "[gradient_timing]" in summary and "speedup_vs_direct_schur" in summary

    def test_module_entry_point(self, tmp_path):
        import subprocess
        import sys
        p = subprocess.run([sys.executable, "-m", "lqomor", "gen", "--n", "3", "--seed", "0",
                            "--out", str(tmp_path / "s")], capture_output=True)
        assert p.returncode == 0 and (tmp_path / "s" / "A.mtx").exists()
