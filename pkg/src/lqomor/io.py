"""Matrix Market files and on-disk system directories.

A system directory holds ``A.mtx, B.mtx, C.mtx, M.mtx`` (dense ``array``
format) and ``manifest.txt`` with ``key = value`` lines (``n``, ``m``,
``kind``, ``names``). Reduced models use the same layout.
"""
from __future__ import annotations

import io as _io
import os
import shutil
import tempfile

import numpy as np
import scipy.io

from .exceptions import DimensionMismatch
from .lqo import LqoSystem, ReducedLqo

__all__ = ["write_files_atomic", "write_text_atomic", "write_mtx", "read_mtx", "mtx_text", "write_system", "read_system", "read_kv"]

NAMES = ("A", "B", "C", "M")


def write_files_atomic(files: dict[str, str], out_dir) -> None:
    """Write all files into a scratch directory first, then move them in place.

    If anything fails before the move, ``out_dir`` is left untouched.
    """
    out_dir = os.path.abspath(os.fspath(out_dir))
    parent = os.path.dirname(out_dir) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".lqomor-", dir=parent)
    try:
        for name, text in files.items():
            with open(os.path.join(tmp, name), "w", newline="") as fh:
                fh.write(text)
        os.makedirs(out_dir, exist_ok=True)
        for name in files:
            os.replace(os.path.join(tmp, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def write_text_atomic(path, text: str) -> None:
    """Write one file through a temporary sibling and ``os.replace``."""
    path = os.path.abspath(os.fspath(path))
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".lqomor-", dir=d)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def mtx_text(a) -> str:
    """Dense Matrix Market text (column-major values, 17 significant digits)."""
    buf = _io.BytesIO()
    scipy.io.mmwrite(buf, np.atleast_2d(np.asarray(a, dtype=float)), field="real",
                     precision=17, symmetry="general")
    return buf.getvalue().decode("ascii")


def write_mtx(path, a) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(mtx_text(a))


def read_mtx(path) -> np.ndarray:
    out = scipy.io.mmread(os.fspath(path))
    if hasattr(out, "toarray"):
        out = out.toarray()
    return np.asarray(out, dtype=float)


def read_kv(path) -> dict:
    """``key = value`` lines; ``#`` comments and blank lines are skipped."""
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_system(system, out_dir, *, extra: dict | None = None) -> None:
    """Write an :class:`LqoSystem` or :class:`ReducedLqo` atomically."""
    kind = "reduced" if isinstance(system, ReducedLqo) else "full"
    mats = dict(zip(NAMES, (system.A, system.B, system.C, system.M)))
    files = {f"{k}.mtx": mtx_text(v) for k, v in mats.items()}
    n, m = system.B.shape
    lines = [f"n = {n}", f"m = {m}", f"kind = {kind}", "names = " + ",".join(f"{k}.mtx" for k in NAMES)]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    files["manifest.txt"] = "\n".join(lines) + "\n"
    write_files_atomic(files, out_dir)


def read_system(path, *, check_stable: bool = True) -> LqoSystem:
    """Read a system directory back as an :class:`LqoSystem`."""
    man_path = os.path.join(path, "manifest.txt")
    if not os.path.isfile(man_path):
        raise FileNotFoundError(f"{path} is not a system directory (no manifest.txt)")
    man = read_kv(man_path)
    names = [s.strip() for s in man.get("names", ",".join(f"{k}.mtx" for k in NAMES)).split(",")]
    if len(names) != 4:
        raise ValueError("manifest names must list four files")
    A, B, C, M = (read_mtx(os.path.join(path, nm)) for nm in names)
    n = int(man.get("n", A.shape[0]))
    if A.shape != (n, n) or B.shape[0] != n or C.shape[-1] != n or M.shape != (n, n):
        raise DimensionMismatch(f"matrices in {path} do not match n={n}")
    if "m" in man and B.shape[1] != int(man["m"]):
        raise DimensionMismatch("B does not match m in manifest")
    return LqoSystem(A, B, C, M, check_stable=check_stable)
