"""Transverse integrals over lowest-Landau modes, plus an on-disk element cache.

With ``s = rho^2 / 2`` (field strength one) the radial density of
``|chi_m|^2`` is the Gamma(m+1) law ``s^m e^{-s} / m!``.  Every kernel met
here (``1/rho``, ``log rho``, ``K0``) is singular at ``rho = 0``, so the
integrals are done by the trapezoidal rule in ``v = log s``, which converges
geometrically for integrands analytic in a strip around the real axis.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import AccuracyError

RADIAL_TOL = 1e-8


def radial_range(m: int) -> tuple[float, float]:
    v_peak = math.log(m + 1.0)
    lo = v_peak - max(90.0 / (m + 0.5), 14.0 / math.sqrt(m + 1.0))
    hi = math.log(m + 60.0 + 15.0 * math.sqrt(m + 1.0))
    return lo, hi


def radial_expectation(m: int, f: Callable[[np.ndarray], np.ndarray],
                       v_range: tuple[float, float] | None = None,
                       tol: float = RADIAL_TOL) -> tuple[np.ndarray, float]:
    """``E_m[f] = int_0^inf s^m e^{-s} f(s) ds / m!`` and an error estimate.

    ``f`` maps an array of ``s`` values of shape ``(n,)`` to ``(n,)`` or
    ``(n, k)``.  The step is halved until successive trapezoid sums agree;
    if the last change exceeds ``tol`` relative to ``E_m[|f|]`` an
    :class:`AccuracyError` is raised.
    """
    lo, hi = v_range if v_range is not None else radial_range(m)
    lg = math.lgamma(m + 1.0)

    def g(v: np.ndarray) -> np.ndarray:
        w = np.exp((m + 1.0) * v - np.exp(v) - lg)
        fv = np.asarray(f(np.exp(v)), dtype=float)
        return fv * (w if fv.ndim == 1 else w[:, None])

    h = 0.2
    n = int(math.ceil((hi - lo) / h))
    h = (hi - lo) / n
    vals = g(lo + h * np.arange(n + 1))
    total = vals[1:-1].sum(axis=0) + 0.5 * (vals[0] + vals[-1])
    abs_total = np.abs(vals[1:-1]).sum(axis=0) + 0.5 * (np.abs(vals[0]) + np.abs(vals[-1]))
    est = h * total
    change = np.inf
    for _ in range(5):
        mids = g(lo + h * (np.arange(n) + 0.5))
        total = total + mids.sum(axis=0)
        abs_total = abs_total + np.abs(mids).sum(axis=0)
        h *= 0.5
        n *= 2
        new = h * total
        scale = np.maximum(h * abs_total, 1e-300)
        change = float(np.max(np.abs(new - est) / scale))
        est = new
        if change < 1e-13:
            break
    if change > tol:
        raise AccuracyError(
            f"radial quadrature for m={m} changed by {change:.2e} on node doubling", tol)
    return est, change


@lru_cache(maxsize=None)
def talmi_coefficients(a: int, b: int) -> tuple[float, ...]:
    """Expansion of ``chi_a(zeta_1) chi_b(zeta_2)`` in center/relative modes.

    With ``u = (zeta_1 + zeta_2)/sqrt 2`` and ``v = (zeta_1 - zeta_2)/sqrt 2``,
    ``chi_a chi_b = sum_q T_q chi_{a+b-q}(u) chi_q(v)``; returns ``T_0..T_{a+b}``.
    """
    n = a + b
    out = []
    for q in range(n + 1):
        s = sum(math.comb(a, i) * math.comb(b, q - i) * (-1) ** (q - i)
                for i in range(max(0, q - b), min(a, q) + 1))
        if s == 0:
            out.append(0.0)
            continue
        ratio = Fraction(math.factorial(n - q) * math.factorial(q),
                         math.factorial(a) * math.factorial(b) * 2 ** n)
        out.append(math.copysign(math.sqrt(abs(s) ** 2 * ratio), s))
    return tuple(out)


# ------------------------------------------------------------------ cache

class ElementCache:
    """JSON map ``key -> {re, im, est_error}`` persisted with atomic rewrites.

    Without a directory the cache lives in memory only.  Concurrent writers
    merge with what is on disk; identical keys carry identical values, so
    last-writer-wins is harmless.
    """

    FILENAME = "leff-elements.json"

    def __init__(self, directory: str | None = None):
        self._lock = threading.Lock()
        self._mem: dict[str, dict] = {}
        self._dirty = False
        self.directory = directory
        self._loaded = False

    @property
    def path(self) -> str | None:
        if not self.directory:
            return None
        return os.path.join(self.directory, self.FILENAME)

    def _load(self):
        if self._loaded:
            return
        self._loaded = True
        p = self.path
        if p and os.path.exists(p):
            try:
                with open(p, encoding="utf-8") as fh:
                    self._mem.update(json.load(fh))
            except (OSError, ValueError):
                pass

    def get(self, key: str) -> dict | None:
        with self._lock:
            self._load()
            return self._mem.get(key)

    def put(self, key: str, re: float, im: float = 0.0, est_error: float = 0.0):
        with self._lock:
            self._load()
            self._mem[key] = {"re": float(re), "im": float(im), "est_error": float(est_error)}
            self._dirty = True

    def flush(self):
        with self._lock:
            p = self.path
            if not (p and self._dirty):
                return
            os.makedirs(self.directory, exist_ok=True)
            merged: dict[str, dict] = {}
            if os.path.exists(p):
                try:
                    with open(p, encoding="utf-8") as fh:
                        merged = json.load(fh)
                except (OSError, ValueError):
                    merged = {}
            merged.update(self._mem)
            fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".leff-", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(merged, fh, sort_keys=True)
            os.replace(tmp, p)
            self._dirty = False

    def __len__(self) -> int:
        with self._lock:
            self._load()
            return len(self._mem)


_CACHE = ElementCache(os.environ.get("LEFF_CACHE_DIR") or None)


def get_cache() -> ElementCache:
    return _CACHE


def set_cache_dir(directory: str | None) -> ElementCache:
    """Select the persistent cache location (``None`` keeps it in memory)."""
    global _CACHE
    _CACHE.flush()
    _CACHE = ElementCache(directory)
    return _CACHE


def cache_key(op: str, m: tuple, mp: tuple, arg) -> str:
    def fmt(t):
        return "(" + ",".join(str(int(v)) for v in t) + ")"
    return f"{op}|B=1|m={fmt(m)}|m'={fmt(mp)}|arg={arg!r}"


def cached_scalar(op: str, m: tuple, mp: tuple, arg, compute: Callable[[], tuple[float, float]]) -> float:
    cache = get_cache()
    key = cache_key(op, m, mp, arg)
    hit = cache.get(key)
    if hit is not None:
        return hit["re"]
    value, err = compute()
    cache.put(key, value, 0.0, err)
    return value
