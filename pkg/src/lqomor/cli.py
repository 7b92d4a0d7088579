"""Command line interface: ``lqomor {gen,reduce,simulate,h2error,bench}``.

Exit status is 0 on success, 1 on a usage error (bad or missing flag, unreadable
input) and 2 when a numerical step fails. Outputs are written atomically, so
nothing appears on disk for a failed command.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io as lio
from .baselines import bt_reduce, krylov_reduce
from .exceptions import LqoError
from .gaai import run_gaai
from .laguerre import LaguerreApprox
from .lqo import ReducedLqo, h2_error
from .simbench import ExperimentConfig, fmt, make_input, run_experiment, simulate
from .srcg import run_srcg

log = logging.getLogger("lqomor")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(flag):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {s!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {v}")
        return v
    return conv


def _positive_float(flag):
    def conv(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {s!r}") from None
        if not (np.isfinite(v) and v > 0):
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lqomor", description="Model reduction for linear systems with quadratic output.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random stable test system")
    g.add_argument("--n", type=_positive_int("--n"), required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)

    r = sub.add_parser("reduce", help="reduce a system directory")
    r.add_argument("--system", required=True)
    r.add_argument("--method", choices=("ks", "bt", "gaai", "srcg"), required=True)
    r.add_argument("--r", type=_positive_int("--r"), required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--fast-gradient", action="store_true")
    r.add_argument("--config")

    s = sub.add_parser("simulate", help="simulate a system and write t,y as CSV")
    s.add_argument("--system", required=True)
    s.add_argument("--tend", type=_positive_float("--tend"), required=True)
    s.add_argument("--dt", type=_positive_float("--dt"), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--input", default="exp_sin2")

    h = sub.add_parser("h2error", help="print the H2 norm of full - reduced")
    h.add_argument("--full", required=True)
    h.add_argument("--reduced", required=True)

    b = sub.add_parser("bench", help="run the comparison experiment")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    return p


def _read_config(path, flag="--config") -> ExperimentConfig:
    if not os.path.isfile(path):
        raise UsageError(f"{flag}: no such file {path!r}")
    try:
        return ExperimentConfig.from_mapping(lio.read_kv(path))
    except KeyError as exc:
        raise UsageError(f"{flag}: unknown key {exc.args[0]!r} in {path}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{flag}: {exc}") from None


def _read_system(path, flag):
    if not os.path.isdir(path) or not os.path.isfile(os.path.join(path, "manifest.txt")):
        raise UsageError(f"{flag}: {path!r} is not a system directory")
    return lio.read_system(path)


def _reduced_from(sys):
    return ReducedLqo(sys.A, sys.B, sys.C, sys.M)


_REDUCE_KEYS = ("ks_shifts", "ks_shift_scale", "fast_gradient")


def cmd_gen(a):
    from .simbench import gen_random_system
    if a.n < 2:
        raise UsageError("--n must be at least 2")
    lio.write_system(gen_random_system(a.n, a.seed), a.out, extra={"seed": a.seed})


def cmd_reduce(a):
    sys = _read_system(a.system, "--system")
    if not a.r < sys.n:
        raise UsageError(f"--r must be smaller than n={sys.n}")
    cfg = ExperimentConfig(n=sys.n, r=a.r)
    if a.config:
        if not os.path.isfile(a.config):
            raise UsageError(f"--config: no such file {a.config!r}")
        raw = lio.read_kv(a.config)
        keep = {k: v for k, v in raw.items()
                if k in _REDUCE_KEYS or k.split("_", 1)[0] in ("gaai", "srcg", "laguerre")}
        ignored = set(raw) - set(keep) - {f for f in ExperimentConfig().to_mapping()}
        if ignored:
            raise UsageError(f"--config: unknown key {sorted(ignored)[0]!r} in {a.config}")
        try:
            cfg = ExperimentConfig.from_mapping({**keep, "n": str(sys.n), "r": str(a.r)})
        except KeyError as exc:
            raise UsageError(f"--config: unknown key {exc.args[0]!r}") from None
        except (ValueError, TypeError) as exc:
            raise UsageError(f"--config: {exc}") from None
    shifts = cfg.ks_shifts or [cfg.ks_shift_scale * abs(sys.spectral_abscissa)]
    if a.method == "bt":
        red, _ = bt_reduce(sys, a.r)
        iters = 0
    else:
        red0, W0, V0 = krylov_reduce(sys, a.r, shifts)
        approx = LaguerreApprox(sys, cfg.laguerre, red0) if (a.fast_gradient or cfg.fast_gradient) else None
        if a.method == "ks":
            red, iters = red0, 0
        elif a.method == "gaai":
            res = run_gaai(sys, W0, V0, cfg.gaai, approx)
            red, iters = res.reduced, len(res.history) - 1
        else:
            res = run_srcg(sys, V0, cfg.srcg, approx=approx)
            red, iters = res.reduced, len(res.history) - 1
    if not red.is_hurwitz:
        raise LqoError(f"{a.method} produced a reduced model that is not Hurwitz")
    lio.write_system(red, a.out, extra={"method": a.method, "iterations": iters,
                                        "h2_error": fmt(h2_error(sys, red))})


def cmd_simulate(a):
    sys = _read_system(a.system, "--system")
    try:
        u = make_input(a.input, sys.m)
    except ValueError as exc:
        raise UsageError(f"--input: {exc}") from None
    try:
        tr = simulate(sys, u, a.tend, a.dt)
    except ValueError as exc:
        if "divide" in str(exc):
            raise UsageError(f"--dt: {exc}") from None
        raise
    lines = ["t,y"] + [f"{fmt(t)},{fmt(y)}" for t, y in zip(tr.times, tr.outputs)]
    lio.write_text_atomic(a.out, "\n".join(lines) + "\n")


def cmd_h2error(a):
    full = _read_system(a.full, "--full")
    red = _reduced_from(_read_system(a.reduced, "--reduced"))
    if red.B.shape[1] != full.m:
        raise UsageError("--reduced: input dimension differs from --full")
    print(fmt(h2_error(full, red)))


def cmd_bench(a):
    cfg = _read_config(a.config)
    report = run_experiment(cfg)
    if all(r.status != "ok" for r in report.results):
        raise LqoError("every method failed: " + "; ".join(r.message for r in report.results))
    from .simbench import write_report
    write_report(report, a.out)
    for r in report.results:
        print(f"{r.method}: {r.status} h2_error={fmt(r.h2_error)} max_rel_error={fmt(r.max_rel_error)}")


COMMANDS = {"gen": cmd_gen, "reduce": cmd_reduce, "simulate": cmd_simulate,
            "h2error": cmd_h2error, "bench": cmd_bench}


def _thread_limit():
    v = os.environ.get("LQOMOR_THREADS")
    if not v:
        return None
    try:
        n = int(v)
    except ValueError:
        raise UsageError(f"LQOMOR_THREADS must be a positive integer, got {v!r}") from None
    if n <= 0:
        raise UsageError(f"LQOMOR_THREADS must be a positive integer, got {v!r}")
    return n


def main(argv=None) -> int:
    from threadpoolctl import threadpool_limits

    try:
        args = build_parser().parse_args(argv)
        limit = _thread_limit()
    except UsageError as exc:
        print(f"lqomor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=limit):
            COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lqomor {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LqoError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"lqomor {args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
