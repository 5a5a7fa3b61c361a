"""Explicit theorem constants and admissible windows for the spectral parameter.

Every constant is a deterministic function of ``(Z, N, M)``; only
``mu_eff`` also depends on the field through ``alpha(B)``.  Field
thresholds such as ``16 C^2 e^{8C}`` overflow a double for moderate
charges, so all thresholds are carried as natural logarithms and
exponentiated only for display (``inf`` when out of range).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import __version__
from .errors import AccuracyError, BelowThresholdError, ValidationError
from .landau import ProblemParams
from .potentials import (
    constant_C37,
    constant_C63,
    constant_C_asympVj,
    constant_Ce,
    constant_Cn,
    constant_CV11,
)
from .specialfn import EULER_GAMMA, _safeguarded_newton, alpha_of_B

CLOSED_FORM = "ClosedForm"
QUADRATURE = "Quadrature"
CONFIGURED = "Configured"
PROVENANCES = (CLOSED_FORM, QUADRATURE, CONFIGURED)

THEOREMS = ("T1_eff", "T2_coulomb", "T3_delta")

# entry name -> equation label it is taken from
ANCHORS = {
    "B_14": "constant-B",
    "c0": "constant-C",
    "C_15": "constant-C",
    "C_37": "AsympPot1a:c",
    "C_asympVj": "asympVj",
    "C_ConstVeff": "ConstV-eff",
    "C_constW": "const-W",
    "C_estWC": "est-W:C",
    "C_refPf1": "refPf1",
    "C_V11": "HypAsympPot1a",
    "C_63": "supVchapMoinsDelta",
    "eps_eff": "FMT':eps",
    "mu_eff": "FMT'mu1",
    "c_eff": "FMT':c-eff",
    "B_FMTB": "FMT':B",
    "B_eff": "FMT:B-eff",
    "C_eff": "FMT:B-eff",
    "nu_C": "SMT':mu1",
    "C_C_prime": "SMT':i",
    "C_C_doubleprime": "SMT':iii",
    "B_C_prime": "SMT':i",
    "B_C": "PfSMT:1",
    "c_C": "PfSMT:2",
    "C_C": "PfSMT:3",
    "nu_delta": "SMT'':mu1",
    "C_ConstVeffVdelta": "ConstVeff-Vdelta",
    "C_delta_prime": "SMT'':i",
    "C_delta_doubleprime": "ConstVeff-Vdelta",
    "B_delta_prime": "SMT'':i",
    "B_delta": "cdelta",
    "c_delta": "cdelta",
    "C_delta": "cdelta",
}
FIELDS = tuple(ANCHORS)
THRESHOLDS = ("B_14", "B_FMTB", "B_eff", "B_C_prime", "B_C", "B_delta_prime", "B_delta")


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < 709.0 else math.inf


def alpha_from_log(log_B: float) -> float:
    """``alpha(B)`` from ``log B``; valid far beyond the double range of ``B``."""
    if log_B < 700.0:
        return alpha_of_B(math.exp(log_B)).value
    hb = 0.5 * log_B
    return _safeguarded_newton(lambda a: a + math.log(a) - hb,
                               lambda a: 1.0 + 1.0 / a,
                               hb - math.log(hb) - 1.0, hb)


def _solve_alpha(p: float, target: float) -> float:
    """Root of ``p log a + a = target`` (increasing in ``a``)."""
    lo, hi = 1e-300, max(target, 0.0) + 1.0
    while p * math.log(hi) + hi < target:
        hi *= 2.0
    if p * math.log(lo) + lo > target:
        return lo
    return _safeguarded_newton(lambda a: p * math.log(a) + a - target,
                               lambda a: p / a + 1.0, lo, hi)


# ------------------------------------------------------------------ eps_eff

def eps_eff_equation(eps: float) -> float:
    """``eps (|log eps| + 2)``, strictly increasing on ``(0, e)``."""
    return eps * (abs(math.log(eps)) + 2.0)


def solve_eps_eff(k: float) -> float:
    """Unique ``eps`` in ``(0, e)`` with ``k eps (|log eps| + 2) = 1/4``.

    Bisection-safeguarded Newton on ``log eps``; the map is monotone so a
    bracket suffices.  ``k`` below ``1 / (12 e)`` has no root in the interval.
    """
    if not (k > 0 and math.isfinite(k)):
        raise ValidationError(f"eps_eff equation needs a positive coefficient, got {k!r}")
    target = 0.25 / k
    if target >= eps_eff_equation(math.e):
        raise ValidationError(f"no root of the eps_eff equation in (0, e) for coefficient {k:.6g}")

    def f(t):
        return math.log(eps_eff_equation(math.exp(t))) - math.log(target)

    def df(t):
        a = abs(t) + 2.0
        return 1.0 + (-1.0 if t < 0 else 1.0) / a

    lo = math.log(target) - math.log(2.0 + abs(math.log(target))) - 50.0
    t = _safeguarded_newton(f, df, lo, 1.0, tol=1e-16)
    return math.exp(t)


# ------------------------------------------------------------------ nu_C

def _term_epsilon(a_neg: float, p: float, share: float) -> float:
    # solve eps (a_neg/2 + p C (|log eps| + 1)) = share; monotone in eps
    c = _refpf1()

    def f(t):
        eps = math.exp(t)
        return math.log(eps * (0.5 * a_neg + p * c * (abs(t) + 1.0))) - math.log(share)

    def df(t):
        k = 0.5 * a_neg + p * c * (abs(t) + 1.0)
        return 1.0 + p * c * (1.0 if t > 0 else -1.0) / k

    lo, hi = -60.0, 60.0
    return math.exp(_safeguarded_newton(f, df, lo, hi, tol=1e-15))


def coulomb_form_bound(params: ProblemParams) -> dict:
    """Explicit ``b`` with ``h00 + 2 v_delta + v_Q / alpha >= h00 / 2 - b`` for ``alpha >= 1``.

    Each hyperplane term is written in its unit-normal coordinate ``w`` as
    ``a delta(w) + p Pf(1/|w|)``.  The pair planes pick up ``log 2`` from
    the dilation rule for ``Pf`` under ``w -> sqrt(2) w``.  Every term obeys
    ``|term| <= k (-eps d_w^2 + 1/eps)`` with
    ``k = |a_-| / 2 + p C_refPf1 (|log eps| + 1)`` and ``-d_w^2 <= 2 h00``;
    giving each of the ``T`` terms the kinetic share ``1/(4T)`` leaves half
    of ``h00`` and ``b = sum k / eps``.  Negative parts are taken at the
    worst ``alpha`` in ``[1, inf)``.
    """
    Z, N = params.Z, params.N
    terms = []
    if Z > 0:
        lam_n = float(np.max(np.linalg.eigvalsh(constant_Cn(params, 0))))
        a = Z * max(2.0, 2.0 + lam_n)
        terms += [("nucleus", a, Z)] * N
    if N >= 2:
        lam_e = float(np.min(np.linalg.eigvalsh(constant_Ce(params, 0, 1))))
        a = -min(2.0, 2.0 + lam_e + math.log(2.0)) / math.sqrt(2.0)
        terms += [("pair", max(a, 0.0), 1.0 / math.sqrt(2.0))] * (N * (N - 1) // 2)
    total = 0.0
    parts = []
    share = 0.25 / max(len(terms), 1)
    c = _refpf1()
    for kind, a_neg, p in terms:
        eps = _term_epsilon(a_neg, p, share)
        k = 0.5 * a_neg + p * c * (abs(math.log(eps)) + 1.0)
        total += k / eps
        parts.append({"kind": kind, "delta_negative_part": a_neg, "pf_weight": p,
                      "epsilon": eps, "contribution": k / eps})
    return {"b": total, "terms": parts}


# ------------------------------------------------------------------ ledger

def _refpf1() -> float:
    return math.sqrt(math.pi ** 2 / 2.0 + 2.0 * math.log(2.0) ** 2) + EULER_GAMMA


@lru_cache(maxsize=None)
def _quadrature_constants(N: int, M: int) -> dict:
    p = ProblemParams(1.0, 1.0, N, M)
    return {
        "C_37": constant_C37(),
        "C_V11": constant_CV11(p),
        "C_63": constant_C63(p),
        "C_asympVj": constant_C_asympVj(p),
    }


@lru_cache(maxsize=None)
def _nu_C_default(Z: float, N: int, M: int) -> tuple[float, str]:
    info = coulomb_form_bound(ProblemParams(1.0, Z, N, M))
    return 0.5 + info["b"], json.dumps(info)


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    value: float | None
    provenance: str
    paper_anchor: str
    log_value: float | None = None
    note: str = ""

    @property
    def available(self) -> bool:
        return self.value is not None

    def to_json(self) -> dict:
        out = {"name": self.name,
               "value": self.value if self.value is None or math.isfinite(self.value) else None,
               "provenance": self.provenance,
               "paper_anchor": self.paper_anchor,
               "available": self.available}
        if self.log_value is not None:
            out["log_value"] = self.log_value
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_json(cls, d: dict) -> "LedgerEntry":
        value = d["value"]
        if value is None and d.get("available", False):
            value = math.inf
        return cls(d["name"], value, d["provenance"], d["paper_anchor"],
                   d.get("log_value"), d.get("note", ""))


@dataclass(frozen=True)
class ConstantsLedger:
    params: ProblemParams
    entries: dict = field(default_factory=dict)

    def __getattr__(self, name: str) -> float:
        entries = object.__getattribute__(self, "entries")
        if name not in entries:
            raise AttributeError(name)
        e = entries[name]
        if e.value is None:
            raise ValidationError(f"ledger field {name} is unavailable for these parameters")
        return e.value

    def log_of(self, name: str) -> float:
        e = self.entries[name]
        if e.log_value is not None:
            return e.log_value
        return math.log(e.value)

    def available(self) -> list[str]:
        return [n for n, e in self.entries.items() if e.available]

    def to_json(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "version": __version__,
            "values": {n: e.to_json()["value"] for n, e in self.entries.items()},
            "constants": [e.to_json() for e in self.entries.values()],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ConstantsLedger":
        params = ProblemParams(**d["params"])
        entries = {c["name"]: LedgerEntry.from_json(c) for c in d["constants"]}
        return cls(params, entries)


def closed_form_constants(Z: float, N: int, M: int) -> dict:
    """Fields that need no quadrature: ``B_14, c0, C_15, C_constW, C_estWC, C_refPf1, nu_delta``."""
    s = M + N + 2
    b14 = 16.0 * Z * Z * N * s
    c0 = math.sqrt((32.0 * Z * Z * N + 8.0 * N * (N - 1) ** 2) * s)
    out = {
        "B_14": b14,
        "c0": c0,
        "C_15": c0 + c0 * c0 / math.sqrt(b14) if b14 > 0 else None,
        "C_constW": 2.0 * math.pi ** 1.5 * N ** 1.5 * (Z * Z + (N - 1) ** 2 / 4.0),
        "C_estWC": math.sqrt(math.pi / 2.0),
        "C_refPf1": _refpf1(),
        "nu_delta": 0.5 + 4.0 * N * Z * Z,
    }
    return out


def build_ledger(params: ProblemParams, nu_C: float | None = None) -> ConstantsLedger:
    """All constants for ``params``.

    ``nu_C`` overrides the default ``1/2 + b`` from
    :func:`coulomb_form_bound`.  At ``Z = 0`` the fields downstream of
    ``eps_eff`` are returned with ``value=None``.
    """
    Z, N, M = params.Z, params.N, params.M
    alpha = alpha_of_B(params.B).value
    cf = closed_form_constants(Z, N, M)
    q = _quadrature_constants(N, M)
    vals: dict[str, float | None] = {}
    logs: dict[str, float] = {}
    prov: dict[str, str] = {}
    notes: dict[str, str] = {}

    def put(name, value, provenance, log_value=None):
        vals[name] = value
        prov[name] = provenance
        if log_value is not None:
            logs[name] = log_value

    def ok(*names):
        return all(vals.get(n) is not None for n in names)

    for name in ("B_14", "c0", "C_15", "C_constW", "C_estWC", "C_refPf1"):
        put(name, cf[name], CLOSED_FORM)
    for name in ("C_37", "C_V11", "C_63", "C_asympVj"):
        put(name, q[name], QUADRATURE)
    put("C_ConstVeff", q["C_asympVj"] * N ** 0.25 * (Z + 0.5 * (N - 1)), QUADRATURE)

    # first chain: eff
    eps = None
    if Z > 0:
        eps = solve_eps_eff(Z * q["C_37"] * q["C_V11"])
    put("eps_eff", eps, QUADRATURE)
    factor = N / (2.0 * eps * eps) + 1.0 if eps is not None else None
    put("mu_eff", -(alpha * alpha / 2.0) * factor if factor else None, QUADRATURE)
    cw = cf["C_constW"]
    put("c_eff", 2.0 * factor * cw if factor else None, QUADRATURE)
    if cw > 0:
        log_fmtb = math.log(4.0 * cw * cw) - 2.0 * math.log(alpha_of_B(cw).value)
        put("B_FMTB", _exp(log_fmtb), CLOSED_FORM, log_fmtb)
    else:
        put("B_FMTB", None, CLOSED_FORM)
    log_b14 = math.log(cf["B_14"]) if cf["B_14"] > 0 else -math.inf
    logs["B_14"] = log_b14
    log_beff = max(log_b14, logs.get("B_FMTB", -math.inf), 2.0)
    put("B_eff", _exp(log_beff), CLOSED_FORM, log_beff)
    if ok("C_15", "c_eff"):
        put("C_eff", cf["C_15"] + vals["c_eff"] / alpha_from_log(log_beff), QUADRATURE)
    else:
        put("C_eff", None, QUADRATURE)

    # second chain: Coulomb
    if nu_C is None:
        nu, detail = _nu_C_default(Z, N, M)
        notes["nu_C"] = "default 1/2 + b; " + detail
    else:
        nu = float(nu_C)
        if not nu >= 0.5:
            raise ValidationError(f"nu_C must be at least 1/2, got {nu_C!r}")
        notes["nu_C"] = "user supplied"
    put("nu_C", nu, CONFIGURED)
    cv = vals["C_ConstVeff"]
    put("C_C_prime", 4.0 * cv * nu, CONFIGURED)
    put("C_C_doubleprime",
        max(vals["C_C_prime"], 4.0 * cv * factor) if factor else None, CONFIGURED)
    # printed formula; the stated condition alpha^2 B >= 256 C^4 is reported alongside
    if cv > 0:
        log_lit = math.log(4.0 ** 3 / 4.0) + 4.0 * math.log(cv) - 2.0 * math.log(alpha_of_B(cv * cv).value)
        a_star = _solve_alpha(2.0, 0.5 * math.log(256.0 * cv ** 4))
        log_exact = 2.0 * (a_star + math.log(a_star))
        notes["B_C_prime"] = (f"printed formula; root of alpha(B)^2 B = 256 C^4 is "
                              f"log B = {log_exact:.10g}")
        log_bcp = max(log_lit, 1.0)
        put("B_C_prime", _exp(log_bcp), QUADRATURE, log_bcp)
    else:
        put("B_C_prime", math.e, QUADRATURE, 1.0)
    log_bc = max(log_beff, logs["B_C_prime"])
    put("B_C", _exp(log_bc), QUADRATURE, log_bc)
    a_bc = alpha_from_log(log_bc)
    if ok("C_C_doubleprime", "c_eff", "C_eff"):
        put("c_C", max(vals["C_C_doubleprime"],
                       2.0 * vals["c_eff"] * math.exp(-0.5 * math.log(a_bc) - 0.25 * log_bc)),
            CONFIGURED)
        put("C_C", 4.0 * vals["C_eff"] * math.exp(0.5 * math.log(a_bc) - 0.25 * log_bc)
            + vals["C_C_prime"], CONFIGURED)
    else:
        put("c_C", None, CONFIGURED)
        put("C_C", None, CONFIGURED)

    # third chain: delta
    put("nu_delta", cf["nu_delta"], CLOSED_FORM)
    cvv = (N * Z + N * (N - 1) / 2.0) * q["C_63"]
    put("C_ConstVeffVdelta", cvv, QUADRATURE)
    put("C_delta_prime", 4.0 * cvv * cf["nu_delta"], QUADRATURE)
    put("C_delta_doubleprime",
        max(vals["C_delta_prime"], 4.0 * cvv * factor) if factor else None, QUADRATURE)
    if cvv > 0:
        log_bdp = math.log(16.0 * cvv * cvv) + 8.0 * cvv
        put("B_delta_prime", _exp(log_bdp), QUADRATURE, log_bdp)
    else:
        put("B_delta_prime", None, QUADRATURE)
    log_bd = max(log_beff, logs.get("B_delta_prime", -math.inf))
    put("B_delta", _exp(log_bd), QUADRATURE, log_bd)
    if ok("C_delta_doubleprime", "c_eff", "C_eff"):
        put("c_delta", max(vals["C_delta_doubleprime"],
                           2.0 * vals["c_eff"] * math.exp(-0.5 * log_bd)), QUADRATURE)
        put("C_delta", 4.0 * vals["C_eff"] * math.exp(math.log(alpha_from_log(log_bd)) - 0.5 * log_bd)
            + vals["C_delta_prime"], QUADRATURE)
    else:
        put("c_delta", None, QUADRATURE)
        put("C_delta", None, QUADRATURE)

    entries = {}
    for name in FIELDS:
        v = vals.get(name)
        lg = logs.get(name) if name in THRESHOLDS and v is not None else None
        if lg is not None and not math.isfinite(lg):
            lg = None
        entries[name] = LedgerEntry(name, v, prov[name], ANCHORS[name], lg, notes.get(name, ""))
    return ConstantsLedger(params, entries)


# ------------------------------------------------------------------ windows

_WINDOW_SPEC = {
    # theorem: (threshold field, lower-constant field, upper fraction of alpha^2)
    "T1_eff": ("B_eff", "c_eff", 0.5, "C_eff"),
    "T2_coulomb": ("B_C", "c_C", 0.25, "C_C"),
    "T3_delta": ("B_delta", "c_delta", 0.25, "C_delta"),
}


def _check_theorem(theorem: str) -> None:
    if theorem not in _WINDOW_SPEC:
        raise ValidationError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")


@dataclass(frozen=True)
class AdmissibleWindow:
    """``lower <= d(xi) <= upper`` together with the resolvent-difference coefficient."""

    theorem: str
    B: float
    alpha: float
    lower: float
    upper: float
    coefficient: float
    threshold_B: float
    log_threshold_B: float
    log_minimal_B: float

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    @property
    def minimal_B(self) -> float:
        """Smallest field for which ``lower < upper`` (threshold not included)."""
        return _exp(self.log_minimal_B)

    def error_coefficient(self) -> Callable[[float], float]:
        """``d -> coefficient / d^2``, the bound on the resolvent difference."""
        c = self.coefficient
        return lambda d: c / (d * d)

    def bound(self, d: float) -> float:
        return self.coefficient / (d * d)

    def to_json(self) -> dict:
        def fin(x):
            return x if math.isfinite(x) else None
        return {"theorem": self.theorem, "B": self.B, "alpha": self.alpha,
                "lower": self.lower, "upper": self.upper, "nonempty": self.nonempty,
                "coefficient": self.coefficient,
                "threshold_B": fin(self.threshold_B), "log_threshold_B": self.log_threshold_B,
                "minimal_B": fin(self.minimal_B), "log_minimal_B": self.log_minimal_B}


def _window(ledger: ConstantsLedger, theorem: str) -> AdmissibleWindow:
    _check_theorem(theorem)
    thr, low_name, frac, big_name = _WINDOW_SPEC[theorem]
    B = ledger.params.B
    a = alpha_of_B(B).value
    low_c = getattr(ledger, low_name)
    big_c = getattr(ledger, big_name)
    if theorem == "T1_eff":
        lower = low_c * a / math.sqrt(B)
        coef = big_c * a * a / math.sqrt(B)
        # alpha sqrt(B) = alpha^2 e^alpha > 2 c
        a_min = _solve_alpha(2.0, math.log(2.0 * low_c))
    elif theorem == "T2_coulomb":
        lower = low_c * a ** 1.5 / B ** 0.25
        coef = big_c * a ** 1.5 / B ** 0.25
        # alpha^{1/2} B^{1/4} = alpha e^{alpha/2} > 4 c
        a_min = _solve_alpha(2.0, 2.0 * math.log(4.0 * low_c))
    else:
        lower = low_c * a
        coef = big_c * a
        a_min = 4.0 * low_c
    return AdmissibleWindow(theorem, B, a, lower, frac * a * a, coef,
                            _exp(ledger.log_of(thr)), ledger.log_of(thr),
                            2.0 * (a_min + math.log(a_min)))


def admissible_window(params: ProblemParams, theorem: str,
                      ledger: ConstantsLedger | None = None,
                      enforce_threshold: bool = True) -> AdmissibleWindow:
    """Window of admissible ``d(xi)`` for ``theorem`` at ``params.B``.

    Raises :class:`BelowThresholdError` when ``B`` is below the theorem's
    field threshold unless ``enforce_threshold`` is false.
    """
    _check_theorem(theorem)
    ledger = ledger if ledger is not None else build_ledger(params)
    win = _window(ledger, theorem)
    if enforce_threshold and math.log(params.B) < win.log_threshold_B:
        raise BelowThresholdError(
            f"{theorem} needs B >= {win.threshold_B:.6g} (log B >= {win.log_threshold_B:.6g}),"
            f" got B = {params.B:.6g}", win.threshold_B)
    return win


def xi_admissible(params: ProblemParams, theorem: str, d_xi: float,
                  ledger: ConstantsLedger | None = None) -> tuple[bool, str]:
    """Whether a spectral parameter at distance ``d_xi`` meets the theorem's hypotheses."""
    if not (isinstance(d_xi, (int, float)) and d_xi > 0):
        return False, "distance must be positive"
    try:
        _check_theorem(theorem)
        ledger = ledger if ledger is not None else build_ledger(params)
        win = _window(ledger, theorem)
    except (ValidationError, AccuracyError) as exc:
        return False, str(exc)
    failures = []
    if math.log(params.B) < win.log_threshold_B:
        failures.append(f"B = {params.B:.6g} is below the threshold {win.threshold_B:.6g}")
    if d_xi < win.lower:
        failures.append(f"d_xi = {d_xi:.6g} violates lower <= d_xi with lower = {win.lower:.6g}")
    if d_xi > win.upper:
        failures.append(f"d_xi = {d_xi:.6g} violates d_xi <= upper with upper = {win.upper:.6g}")
    if failures:
        return False, "; ".join(failures)
    return True, f"{win.lower:.6g} <= d_xi <= {win.upper:.6g} and B >= {win.threshold_B:.6g}"
