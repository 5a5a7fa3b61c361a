"""Scalar special functions and the field-dependent coupling alpha(B).

Everything here is hand-written in plain floating point so that test
oracles (library routines, quadrature) stay independent of the
implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError

EULER_GAMMA = 0.57721566490153286060651209008240243


def euler_gamma() -> float:
    """Euler-Mascheroni constant."""
    return EULER_GAMMA


# ---------------------------------------------------------------- Lambert W

def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real ``x >= 0``.

    Initial guess ``log1p(x)`` for ``x <= e`` and ``L1 - L2 + L2/L1``
    (``L1 = log x``, ``L2 = log L1``) above.  Small arguments are refined
    with Halley steps on ``w e^w - x``; large ones with Halley steps on
    ``w + log w - log x``, which cannot overflow.
    """
    x = float(x)
    if not x >= 0.0 or math.isinf(x):
        raise DomainError(f"lambert_w0 needs a finite x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if x <= math.e:
        w = math.log1p(x)
        for _ in range(50):
            ew = math.exp(w)
            f = w * ew - x
            wp1 = w + 1.0
            step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
            w -= step
            if abs(step) <= 1e-16 * max(abs(w), 1e-300):
                break
    else:
        lx = math.log(x)
        l2 = math.log(lx)
        w = lx - l2 + l2 / lx
        for _ in range(50):
            g = w + math.log(w) - lx
            g1 = 1.0 + 1.0 / w
            g2 = -1.0 / (w * w)
            step = g / (g1 - 0.5 * g * g2 / g1)
            w -= step
            if abs(step) <= 1e-16 * w:
                break
    return w


# ----------------------------------------------------------- coupling alpha

@dataclass(frozen=True)
class CouplingAlpha:
    """Solution of ``(c/2) a + log a = (1/2) log B``."""

    value: float
    B: float
    c: float = 2.0

    @property
    def residual(self) -> float:
        """Relative residual of ``a - (2/c) log(sqrt(B)/a)``."""
        a = self.value
        rhs = (2.0 / self.c) * (0.5 * math.log(self.B) - math.log(a))
        return abs(a - rhs) / max(abs(a), 1e-300)

    def __float__(self) -> float:
        return self.value


def _safeguarded_newton(f, df, lo: float, hi: float, tol: float = 1e-15,
                        maxit: int = 200) -> float:
    """Newton iteration kept inside a shrinking bracket ``[lo, hi]``.

    ``f`` must be increasing with ``f(lo) <= 0 <= f(hi)``.
    """
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise AccuracyError(f"root not bracketed in [{lo}, {hi}]")
    x = 0.5 * (lo + hi)
    for _ in range(maxit):
        fx = f(x)
        if fx == 0.0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        d = df(x)
        xn = x - fx / d if d > 0 else 0.5 * (lo + hi)
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * abs(xn):
            return xn
        x = xn
    raise AccuracyError("safeguarded Newton did not converge", tol)


def _alpha_bracket(k: float, B: float) -> tuple[float, float]:
    """Bracket for ``k a + log a = (1/2) log B`` with ``k = c/2``."""
    hb = 0.5 * math.log(B)
    if k == 1.0 and B > math.e:
        lo = max(1e-12, hb - math.log(math.log(B)) - 1.0)
        hi = hb + 1.0
        return lo, hi
    # k a e^{k a} = k sqrt(B): a <= sqrt(B), and a >= sqrt(B) e^{-k sqrt(B)}
    sb = math.sqrt(B)
    hi = min(sb, max(hb / k, 0.0) + 1.0) if hb > 0 else sb
    hi = max(hi, 1e-300)
    lo = sb * math.exp(-k * hi)
    return min(lo, hi), hi


def alpha_c(c: float, B: float) -> CouplingAlpha:
    """Unique positive root of ``a = (2/c) log(sqrt(B)/a)``."""
    c = float(c)
    B = float(B)
    if not (c > 0 and math.isfinite(c)):
        raise DomainError(f"c must be positive, got {c!r}")
    if not (B > 0 and math.isfinite(B)):
        raise DomainError(f"B must be positive, got {B!r}")
    k = 0.5 * c
    hb = 0.5 * math.log(B)
    lo, hi = _alpha_bracket(k, B)
    root = _safeguarded_newton(lambda a: k * a + math.log(a) - hb,
                               lambda a: k + 1.0 / a, lo, hi)
    return CouplingAlpha(root, B, c)


def alpha_of_B(B: float) -> CouplingAlpha:
    """Coupling ``alpha(B)``: positive root of ``a + log a = (1/2) log B``."""
    return alpha_c(2.0, B)


# ------------------------------------------------------------------ K0

def _k0_series(x: float) -> float:
    y = 0.25 * x * x
    term = 1.0
    harmonic = 0.0
    i0 = 1.0
    tail = 0.0
    for k in range(1, 60):
        term *= y / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term < 1e-18 * i0:
            break
    return -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail


def _k0_steed(x: float) -> float:
    # continued fraction of Temme (Steed's algorithm), order zero
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    else:  # pragma: no cover
        raise AccuracyError("K0 continued fraction did not converge")
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s


def bessel_k0(x: float) -> float:
    """Macdonald function ``K_0(x)`` for ``x > 0``.

    Power series below ``x = 2``; Temme's continued fraction above.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k0 needs x > 0, got {x!r}")
    if math.isinf(x):
        return 0.0
    if x < 2.0:
        return _k0_series(x)
    if x > 745.0:
        return 0.0
    return _k0_steed(x)


# ------------------------------------------------------- digamma / gamma

# Bernoulli numbers B_2k for k = 1..8
_B2K = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66,
        -691.0 / 2730, 7.0 / 6, -3617.0 / 510)


def digamma(x: float) -> float:
    """Digamma function ``psi(x)`` for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"digamma needs a finite x > 0, got {x!r}")
    shift = 0.0
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    p = inv2
    for k, b in enumerate(_B2K, start=1):
        series += b / (2 * k) * p
        p *= inv2
    return shift + math.log(x) - 0.5 / x - series


def log_gamma(x: float) -> float:
    """``log Gamma(x)`` for ``x > 0`` (Stirling series with upward shift)."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma needs a finite x > 0, got {x!r}")
    prod = 1.0
    shift = 0.0
    while x < 15.0:
        prod *= x
        if prod > 1e250:
            shift += math.log(prod)
            prod = 1.0
        x += 1.0
    shift += math.log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    p = inv
    for k, b in enumerate(_B2K, start=1):
        series += b / (2 * k * (2 * k - 1)) * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + 0.5 * math.log(2 * math.pi) + series - shift


def gamma_fn(x: float) -> float:
    """Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"gamma_fn needs a finite x > 0, got {x!r}")
    if x == math.floor(x) and x <= 171:
        return float(math.prod(range(1, int(x))))
    if x < 15.0:
        # recurrence down from a shifted Stirling value keeps relative error small
        n = int(math.floor(15.0 - x)) + 1
        return math.exp(log_gamma(x + n)) / math.prod(x + i for i in range(n))
    return math.exp(log_gamma(x))


def bessel_k0_array(x) -> np.ndarray:
    """Vectorized :func:`bessel_k0` (same two branches); ``x`` must be positive."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("bessel_k0_array needs x > 0")
    out = np.zeros_like(x)
    small = x < 2.0
    if np.any(small):
        xs = x[small]
        y = 0.25 * xs * xs
        term = np.ones_like(xs)
        i0 = np.ones_like(xs)
        tail = np.zeros_like(xs)
        harmonic = 0.0
        for k in range(1, 40):
            term = term * y / (k * k)
            harmonic += 1.0 / k
            i0 += term
            tail += term * harmonic
            if term.max() < 1e-17:
                break
        out[small] = -(np.log(0.5 * xs) + EULER_GAMMA) * i0 + tail
    big = (~small) & (x <= 745.0)
    if np.any(big):
        idx = np.flatnonzero(big)
        xb = x.ravel()[idx]
        b = 2.0 * (1.0 + xb)
        d = 1.0 / b
        delh = d.copy()
        q1 = np.zeros_like(xb)
        q2 = np.ones_like(xb)
        a1 = 0.25
        q = np.full_like(xb, a1)
        c = a1
        a = -a1
        s = 1.0 + q * delh
        # converged entries are retired so the loop only touches live ones
        live = np.arange(xb.size)
        s_out = np.empty_like(xb)
        for i in range(2, 2000):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1, q2 = q2, qnew
            q = q + c * qnew
            b = b + 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            dels = q * delh
            s = s + dels
            done = np.abs(dels / s) < 1e-17
            if done.any():
                s_out[live[done]] = s[done]
                keep = ~done
                live = live[keep]
                if live.size == 0:
                    break
                b, d, delh, q1, q2, q, s = (v[keep] for v in (b, d, delh, q1, q2, q, s))
        else:  # pragma: no cover
            raise AccuracyError("K0 continued fraction did not converge")
        out.ravel()[idx] = np.sqrt(np.pi / (2.0 * xb)) * np.exp(-xb) / s_out
    return out
