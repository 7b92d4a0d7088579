"""Random test systems, fixed-step simulation, error metrics and the comparison runner."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .baselines import bt_reduce, krylov_reduce
from .exceptions import GridMismatch, LqoError, NonFiniteState
from .gaai import GaaiConfig, run_gaai
from .io import write_files_atomic
from .laguerre import LaguerreApprox, LaguerreConfig
from .lqo import CrossTerms, LqoSystem, ReducedLqo, _grads_from_terms, cost_j, petrov_galerkin
from .srcg import SrcgConfig, run_srcg

log = logging.getLogger(__name__)

__all__ = [
    "Trajectory",
    "ExperimentConfig",
    "MethodResult",
    "ExperimentReport",
    "gen_random_system",
    "make_input",
    "simulate",
    "relative_error_series",
    "time_gradient_paths",
    "run_experiment",
    "fmt",
]

METHODS = ("ks", "bt", "gaai", "srcg")


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if t.ndim != 1 or y.shape != t.shape:
            raise ValueError("times and outputs must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.times.size


def gen_random_system(n: int, seed: int, delta: float = 0.1) -> LqoSystem:
    """``A = -(R R^T + delta I) + (S - S^T)/2``, ``B = C^T = ones``, ``M = I``.

    ``R`` and ``S`` are standard normal draws from ``numpy.random.default_rng(seed)``.
    The symmetric part of ``A`` is negative definite, so ``A`` is Hurwitz.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, n))
    S = rng.standard_normal((n, n))
    A = -(R @ R.T + delta * np.eye(n)) + 0.5 * (S - S.T)
    return LqoSystem(A, np.ones((n, 1)), np.ones((1, n)), np.eye(n))


def make_input(spec: str, m: int = 1):
    """Input function from a short spec string.

    ``"exp_sin2"``
        ``exp(sin(2 t))`` on every channel.
    ``"const:<c>"``
        constant ``c``.
    ``"zero"``
        identically zero.
    ``"step"``
        unit step (same as ``const:1``).
    """
    spec = spec.strip()
    if spec == "exp_sin2":
        def f(t):
            t = np.asarray(t, dtype=float)
            return np.repeat(np.exp(np.sin(2.0 * t))[..., None], m, axis=-1)
    elif spec in ("zero", "step") or spec.startswith("const:"):
        c = 0.0 if spec == "zero" else 1.0 if spec == "step" else float(spec.split(":", 1)[1])

        def f(t):
            t = np.asarray(t, dtype=float)
            return np.full(t.shape + (m,), c)
    else:
        raise ValueError(f"unknown input spec {spec!r}")
    return f


def _n_steps(t_end, dt):
    if not (t_end > 0 and dt > 0):
        raise ValueError("t_end and dt must be positive")
    k = int(round(t_end / dt))
    if k < 1 or abs(k * dt - t_end) > 1e-9 * t_end:
        raise ValueError(f"dt={dt} does not divide t_end={t_end}")
    return k


def _sample_input(u, ts, m):
    try:
        U = np.asarray(u(ts), dtype=float)
        if U.shape == ts.shape and m == 1:
            U = U[:, None]
        if U.shape == (ts.size, m):
            return U
    except (TypeError, ValueError):
        pass
    # scalar-only callables
    return np.array([np.broadcast_to(np.asarray(u(t), dtype=float), (m,)) for t in ts])


def simulate(system, u, t_end: float = 10.0, dt: float = 1e-3) -> Trajectory:
    """Classical RK4 from ``x(0) = 0``; output ``C x + x^T M x`` on the grid ``k dt``.

    ``system`` may be an :class:`LqoSystem` or a :class:`ReducedLqo`. ``u`` maps
    time (scalar or array) to the input vector.
    """
    A, B, C, M = system.A, system.B, system.C, system.M
    n, m = B.shape
    k = _n_steps(t_end, dt)
    ts = np.arange(k + 1) * dt
    U0 = _sample_input(u, ts, m) @ B.T
    Uh = _sample_input(u, ts[:-1] + 0.5 * dt, m) @ B.T
    X = np.empty((k + 1, n))
    x = np.zeros(n)
    X[0] = x
    h2, h6 = 0.5 * dt, dt / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(k):
            k1 = A @ x + U0[i]
            k2 = A @ (x + h2 * k1) + Uh[i]
            k3 = A @ (x + h2 * k2) + Uh[i]
            k4 = A @ (x + dt * k3) + U0[i + 1]
            x = x + h6 * (k1 + 2.0 * (k2 + k3) + k4)
            X[i + 1] = x
            if i % 1024 == 0 and not np.all(np.isfinite(x)):
                break
        if not np.all(np.isfinite(X)):
            raise NonFiniteState("state trajectory is not finite")
        y = X @ C[0] + np.einsum("ij,ij->i", X @ M, X)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("output is not finite")
    return Trajectory(ts, y)


def relative_error_series(y: Trajectory, yhat: Trajectory) -> Trajectory:
    """``|y - yhat| / max(|y|, 1e-12 max|y|)`` pointwise."""
    if y.times.shape != yhat.times.shape or not np.array_equal(y.times, yhat.times):
        raise GridMismatch("trajectories are sampled on different grids")
    ay = np.abs(y.outputs)
    eps = 1e-12 * ay.max() if ay.size else 0.0
    den = np.maximum(ay, eps)
    with np.errstate(invalid="ignore", divide="ignore"):
        err = np.abs(y.outputs - yhat.outputs) / den
    err[den == 0] = 0.0  # y identically zero and yhat equal
    err[(den == 0) & (yhat.outputs != 0)] = np.inf
    return Trajectory(y.times, err)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one comparison run.

    Solver settings are nested; in flat ``key = value`` files they appear as
    ``gaai_<field>`` and ``srcg_<field>``, Laguerre settings as
    ``laguerre_<field>``.
    """

    n: int = 300
    r: int = 10
    seed: int = 0
    t_end: float = 10.0
    dt: float = 1e-3
    input_spec: str = "exp_sin2"
    methods: tuple = METHODS
    fast_gradient: bool = False
    time_gradients: bool = True
    ks_shifts: tuple | None = None
    ks_shift_scale: float = 1.0
    laguerre: LaguerreConfig = field(default_factory=lambda: LaguerreConfig(alpha="auto", auto_calibrate=True))
    gaai: GaaiConfig = field(default_factory=GaaiConfig)
    srcg: SrcgConfig = field(default_factory=SrcgConfig)

    def __post_init__(self):
        if not 0 < self.r < self.n:
            raise ValueError("need 0 < r < n")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        bad = [mt for mt in self.methods if mt not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}")
        _n_steps(self.t_end, self.dt)
        make_input(self.input_spec)

    _NESTED = {"laguerre": LaguerreConfig, "gaai": GaaiConfig, "srcg": SrcgConfig}

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        """Build from flat string (or typed) values; unknown keys raise KeyError."""
        top = {f.name: f for f in fields(cls)}
        nested: dict[str, dict] = {k: {} for k in cls._NESTED}
        kw = {}
        for key, raw in d.items():
            key = key.strip()
            pre, _, rest = key.partition("_")
            if pre in cls._NESTED and rest:
                sub = {f.name: f for f in fields(cls._NESTED[pre])}
                if rest not in sub:
                    raise KeyError(key)
                default = getattr(cls._NESTED[pre](), rest)
                nested[pre][rest] = _coerce(raw, default, key)
            elif key in top and key not in cls._NESTED:
                default = getattr(cls(), key) if key != "ks_shifts" else ()
                kw[key] = _coerce(raw, default, key)
            else:
                raise KeyError(key)
        base = cls()
        for k, v in nested.items():
            if v:
                kw[k] = replace(getattr(base, k), **v)
        return cls(**kw)

    def to_mapping(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in self._NESTED:
                for k, sv in asdict(v).items():
                    out[f"{f.name}_{k}"] = sv
            else:
                out[f.name] = v
        return out


def _coerce(raw, default, key):
    if raw is None:
        return None
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, tuple) or key == "ks_shifts" else raw
    s = raw.strip().strip('"').strip("'")
    try:
        if key == "laguerre_alpha":
            return s if s == "auto" else float(s)
        if isinstance(default, bool):
            low = s.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(s)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(s)
        if isinstance(default, float):
            return float(s)
        if isinstance(default, tuple) or default is None:
            items = [x.strip() for x in s.strip("[]()").split(",") if x.strip()]
            if key == "ks_shifts":
                return tuple(float(x) for x in items) or None
            return tuple(x.strip('"').strip("'") for x in items)
    except ValueError as exc:
        raise ValueError(f"bad value for {key}: {raw!r}") from exc
    return s


@dataclass
class MethodResult:
    method: str
    status: str
    h2_error: float = float("nan")
    rel_h2_error: float = float("nan")
    max_rel_error: float = float("nan")
    wall_time: float = float("nan")
    iterations: int = 0
    message: str = ""


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    h2_norm: float
    results: list[MethodResult]
    full: Trajectory | None = None
    reduced: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)
    gradient_timing: dict | None = None
    models: dict = field(default_factory=dict)

    def row(self, method) -> MethodResult:
        for r in self.results:
            if r.method == method:
                return r
        raise KeyError(method)


def time_gradient_paths(sys: LqoSystem, W, V, lcfg: LaguerreConfig, repeats: int = 5) -> dict:
    """Wall-clock seconds for one gradient assembly ``(J1W, J1V)`` at ``(W, V)``.

    ``direct_schur``: Bartels-Stewart with a fresh Schur form of ``A`` per call
    (the textbook cost). ``direct_cached``: reusing the Schur form of ``A``.
    ``laguerre``: low-rank expansion for ``X, Y, K`` after the one-off
    factorization (reported separately as ``laguerre_offline``).
    """
    red = petrov_galerkin(sys, W, V)

    def best(fn):
        ts = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t0)
        return min(ts)

    def schur_fresh():
        fresh = LqoSystem(sys.A, sys.B, sys.C, sys.M, check_stable=False)
        _grads_from_terms(fresh, W, V, CrossTerms(fresh, red))

    sys.schur  # noqa: B018  warm the cache
    t0 = time.perf_counter()
    approx = LaguerreApprox(sys, lcfg, red0=red)
    approx.factors  # noqa: B018
    offline = time.perf_counter() - t0
    return {
        "direct_schur": best(schur_fresh),
        "direct_cached": best(lambda: _grads_from_terms(sys, W, V, CrossTerms(sys, red))),
        "laguerre": best(lambda: _grads_from_terms(sys, W, V, CrossTerms(sys, red, approx))),
        "laguerre_offline": offline,
        "laguerre_N": approx.N,
        "laguerre_alpha": approx.cfg.alpha,
    }


def _reduce(method, sys, cfg, approx, ks):
    if method == "ks":
        red, W, V = ks
        return red, W, V, None, 0
    if method == "bt":
        red, _ = bt_reduce(sys, cfg.r)
        return red, None, None, None, 0
    _, W0, V0 = ks
    if method == "gaai":
        res = run_gaai(sys, W0, V0, cfg.gaai, approx)
        return res.reduced, res.W, res.V, res.history, len(res.history) - 1
    res = run_srcg(sys, V0, cfg.srcg, approx=approx)
    return res.reduced, res.W, res.V, res.history, len(res.history) - 1


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Generate, reduce with each method, simulate and compare.

    A failing method is recorded with ``status="failed"`` and does not stop
    the others. When ``out_dir`` is given the CSV files and ``summary.txt``
    are written there (see :func:`write_report`).
    """
    sys = gen_random_system(cfg.n, cfg.seed)
    u = make_input(cfg.input_spec, sys.m)
    h2 = float(np.sqrt(sys.h2_norm_sq))
    y = simulate(sys, u, cfg.t_end, cfg.dt)
    report = ExperimentReport(cfg, h2, [], full=y)
    ks = None
    approx = None
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            if method in ("ks", "gaai", "srcg") and ks is None:
                shifts = cfg.ks_shifts or [cfg.ks_shift_scale * abs(sys.spectral_abscissa)]
                ks = krylov_reduce(sys, cfg.r, shifts)
            if cfg.fast_gradient and method in ("gaai", "srcg") and approx is None:
                approx = LaguerreApprox(sys, cfg.laguerre, red0=ks[0])
            red, W, V, hist, iters = _reduce(method, sys, cfg, approx, ks)
            wall = time.perf_counter() - t0
            yhat = simulate(red, u, cfg.t_end, cfg.dt)
            err = relative_error_series(y, yhat)
            J = max(cost_j(sys, red), 0.0)
        except (LqoError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            log.warning("method %s failed: %s", method, exc)
            report.results.append(MethodResult(method, "failed", wall_time=time.perf_counter() - t0,
                                               message=f"{type(exc).__name__}: {exc}"))
            continue
        report.results.append(MethodResult(method, "ok", float(np.sqrt(J)), float(np.sqrt(J)) / h2,
                                           float(np.max(err.outputs)), wall, iters))
        report.reduced[method] = yhat
        report.errors[method] = err
        report.models[method] = red
        if hist is not None:
            report.histories[method] = hist
        if cfg.time_gradients and method in ("gaai", "srcg") and report.gradient_timing is None:
            try:
                report.gradient_timing = time_gradient_paths(sys, W, V, cfg.laguerre)
            except LqoError as exc:
                log.warning("gradient timing skipped: %s", exc)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def summary_text(report: ExperimentReport) -> str:
    cfg = report.config
    lines = ["# lqomor benchmark summary", "", "[config]"]
    for k, v in cfg.to_mapping().items():
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, float):
            v = fmt(v)
        lines.append(f"{k} = {v}")
    lines += ["", "[full]", f"h2_norm = {fmt(report.h2_norm)}", "", "[results]",
              "method,status,h2_error,rel_h2_error,max_rel_error,wall_time_s,iterations,message"]
    for r in report.results:
        lines.append(",".join([r.method, r.status, fmt(r.h2_error), fmt(r.rel_h2_error),
                               fmt(r.max_rel_error), fmt(r.wall_time), str(r.iterations),
                               r.message.replace(",", ";").replace("\n", " ")]))
    if report.gradient_timing:
        lines += ["", "[gradient_timing]"]
        for k, v in report.gradient_timing.items():
            lines.append(f"{k} = {fmt(v)}")
        g = report.gradient_timing
        lines.append(f"speedup_vs_direct_schur = {fmt(g['direct_schur'] / g['laguerre'])}")
        lines.append(f"speedup_vs_direct_cached = {fmt(g['direct_cached'] / g['laguerre'])}")
    return "\n".join(lines) + "\n"


_CSV_RENAME = {"reduced_stable": "stable"}


def report_files(report: ExperimentReport) -> dict[str, str]:
    """File name -> content for every artifact of a report."""
    files = {}
    y = report.full
    for method, yhat in report.reduced.items():
        err = report.errors[method]
        files[f"trajectory_{method}.csv"] = _csv_text(
            ["t", "y", "yhat", "rel_err"], zip(y.times, y.outputs, yhat.outputs, err.outputs))
    for method, hist in report.histories.items():
        names = [f.name for f in fields(hist[0])]
        header = [_CSV_RENAME.get(k, k) for k in names]
        files[f"history_{method}.csv"] = _csv_text(header, ([getattr(h, k) for k in names] for h in hist))
    files["summary.txt"] = summary_text(report)
    return files


def write_report(report: ExperimentReport, out_dir) -> None:
    write_files_atomic(report_files(report), out_dir)
