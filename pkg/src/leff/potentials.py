"""Operator-valued potentials on the lowest-Landau space ``F_M``.

Matrices are indexed by the lexicographic enumeration of the partition
set.  One-body operators depending only on ``rho_j`` are diagonal; two-body
operators depending on ``rho_jk`` are evaluated after rotating the pair to
center and relative coordinates, where they act radially on the relative
mode only (see :func:`quadrature.talmi_coefficients`).

All transverse integrals are done at field strength one; a field ``B``
enters through ``V^B(z) = sqrt(B) V^1(sqrt(B) z)`` and
``F V^B(zeta) = F V^1(zeta / sqrt(B))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AccuracyError, SingularityError, ValidationError
from .landau import ProblemParams, enumerate_sigma
from .quadrature import (cached_scalar, get_cache, radial_expectation, radial_range,
                         talmi_coefficients)
from .specialfn import EULER_GAMMA, alpha_of_B, bessel_k0_array

SUP_GRID = np.logspace(-6.0, 2.0, 2000)
FOURIER_TAIL_START = 50.0


def basis(params: ProblemParams) -> list[tuple[int, ...]]:
    return enumerate_sigma(params.N, params.M)


def check_hermitian(mat: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= tol * max(1.0, np.max(np.abs(mat), initial=0.0)))


# ---------------------------------------------------------------- kernels

def _v_single_mode(m: int, z: np.ndarray) -> np.ndarray:
    """``E_m[(2 s + z^2)^{-1/2}]``: transverse average of the Coulomb kernel."""
    z2 = np.atleast_1d(np.asarray(z, dtype=float)) ** 2
    val, _ = radial_expectation(m, lambda s: 1.0 / np.sqrt(2.0 * s[:, None] + z2[None, :]))
    return val


def _v_relative_mode(q: int, z: np.ndarray) -> np.ndarray:
    """``E_q[(4 s + z^2)^{-1/2}]`` for the relative mode of a pair."""
    z2 = np.atleast_1d(np.asarray(z, dtype=float)) ** 2
    val, _ = radial_expectation(q, lambda s: 1.0 / np.sqrt(4.0 * s[:, None] + z2[None, :]))
    return val


def _fourier_range(m: int, zmax: float) -> tuple[float, float]:
    lo, hi = radial_range(m)
    return min(lo, -2.0 * math.log(zmax) - 40.0 / (m + 1.0)), hi


def _fourier_tail(m: int, zeta: np.ndarray) -> np.ndarray:
    """Large-``zeta`` form ``2^{m+1} m! zeta^{-2m-2}`` (an upper bound)."""
    return 2.0 ** (m + 1) * math.factorial(m) * zeta ** (-2.0 * m - 2.0)


def _fourier_single_mode(m: int, zeta: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``2 E_m[K0(scale |zeta| sqrt(2 s))]``; tail formula beyond the cutoff."""
    az = np.abs(np.atleast_1d(np.asarray(zeta, dtype=float))) * scale
    if np.any(az == 0):
        raise SingularityError("Fourier transform diverges logarithmically at zeta = 0")
    out = np.empty_like(az)
    tail = az > FOURIER_TAIL_START * scale
    if np.any(tail):
        out[tail] = _fourier_tail(m, az[tail] / scale) * scale ** (-2.0 * m - 2.0)
    core = ~tail
    if np.any(core):
        zc = az[core]
        rng = _fourier_range(m, float(zc.max()))
        val, _ = radial_expectation(
            m, lambda s: 2.0 * bessel_k0_array(np.sqrt(2.0 * s)[:, None] * zc[None, :]), rng)
        out[core] = val
    return out


def _log_mode(m: int) -> float:
    """``-E_m[log(rho^2/4)] = -E_m[log(s/2)]``."""
    def compute():
        v, e = radial_expectation(m, lambda s: -np.log(0.5 * s))
        return float(v), e
    return cached_scalar("Cn", (m,), (m,), None, compute)


def _log_relative_mode(q: int) -> float:
    """``-E_q[log(rho_12^2/4)]`` with ``rho_12 = 2 sqrt(s)``: ``-E_q[log s]``."""
    def compute():
        v, e = radial_expectation(q, lambda s: -np.log(s))
        return float(v), e
    return cached_scalar("Ce_rel", (q,), (q,), None, compute)


def _abslog_lower(m: int, n: int) -> float:
    # int_0^{1/2} s^m e^{-s} log(2 s)/2 ds / m!, with s = e^{-u}/2 and w = (m+1) u
    x, wts = np.polynomial.laguerre.laggauss(n)
    u = x / (m + 1.0)
    g = np.exp(-0.5 * np.exp(-u)) * (-0.5 * u)
    return float(np.dot(wts, g)) * math.exp(-(m + 1) * math.log(2.0) - math.lgamma(m + 2.0))


def _abslog_mode(m: int) -> float:
    """``E_m[|log rho|]`` with ``rho = sqrt(2 s)``.

    The kink at ``rho = 1`` is removed by ``E|X| = E[X] - 2 E[X; X < 0]``.
    """
    def compute():
        full, e = radial_expectation(m, lambda s: 0.5 * np.log(2.0 * s))
        lower = _abslog_lower(m, 64)
        e = max(e, abs(lower - _abslog_lower(m, 128)))
        if e > 1e-8:
            raise AccuracyError(f"|log rho| average for m={m} not converged", 1e-8)
        return float(full) - 2.0 * lower, e
    return cached_scalar("abslog", (m,), (m,), None, compute)


# ---------------------------------------------------------------- assembly

def _single_matrix(bas, j: int, diag: Callable[[int], np.ndarray | float]) -> np.ndarray:
    vals = {mj: diag(mj) for mj in sorted({m[j] for m in bas})}
    first = next(iter(vals.values()))
    shape = np.shape(first)
    out = np.zeros(shape + (len(bas), len(bas)))
    for i, m in enumerate(bas):
        out[..., i, i] = vals[m[j]]
    return out


def _pair_matrix(bas, j: int, k: int, lam: Callable[[int], np.ndarray | float]) -> np.ndarray:
    nmax = max((m[j] + m[k] for m in bas), default=0)
    lams = {q: lam(q) for q in range(nmax + 1)}
    shape = np.shape(lams[0])
    d = len(bas)
    out = np.zeros(shape + (d, d))
    for a, m in enumerate(bas):
        rest_m = tuple(v for i, v in enumerate(m) if i not in (j, k))
        tm = talmi_coefficients(m[j], m[k])
        for b in range(a, d):
            mp = bas[b]
            if m[j] + m[k] != mp[j] + mp[k]:
                continue
            if tuple(v for i, v in enumerate(mp) if i not in (j, k)) != rest_m:
                continue
            tp = talmi_coefficients(mp[j], mp[k])
            val = sum(tm[q] * tp[q] * lams[q] for q in range(len(tm)) if tm[q] and tp[q])
            out[..., a, b] = val
            out[..., b, a] = val
    return out


def _check_index(params: ProblemParams, *idx: int):
    for i in idx:
        if not 0 <= i < params.N:
            raise ValidationError(f"particle index {i} out of range for N={params.N}")


def _check_pair(params: ProblemParams, j: int, k: int):
    if params.N < 2:
        raise ValidationError("pair operators need N >= 2")
    _check_index(params, j, k)
    if not j < k:
        raise ValidationError("pair indices must satisfy j < k")


def position_V_single(params: ProblemParams, z: float, j: int = 0) -> np.ndarray:
    """``sqrt(B) V_j^1(sqrt(B) z)`` as a matrix on ``F_M``."""
    _check_index(params, j)
    sb = math.sqrt(params.B)
    zz = sb * float(z)

    def diag(mj):
        def compute():
            return float(_v_single_mode(mj, np.array([zz]))[0]), 0.0
        return cached_scalar("V_single", (mj,), (mj,), zz, compute)

    out = sb * _single_matrix(basis(params), j, diag)
    get_cache().flush()
    return out


def position_V_pair(params: ProblemParams, j: int, k: int, z: float) -> np.ndarray:
    """``sqrt(B) V_jk^1(sqrt(B) z)`` as a matrix on ``F_M``."""
    _check_pair(params, j, k)
    sb = math.sqrt(params.B)
    zz = sb * float(z)

    def lam(q):
        def compute():
            return float(_v_relative_mode(q, np.array([zz]))[0]), 0.0
        return cached_scalar("V_rel", (q,), (q,), zz, compute)

    out = sb * _pair_matrix(basis(params), j, k, lam)
    get_cache().flush()
    return out


def single_mode_potential(m: int, z: np.ndarray, B: float = 1.0) -> np.ndarray:
    """Vectorized diagonal entry ``sqrt(B) E_m[(2 s + B z^2)^{-1/2}]``."""
    sb = math.sqrt(B)
    return sb * _v_single_mode(m, sb * np.asarray(z, dtype=float))


def fourier_V_single(params: ProblemParams, zeta: float, j: int = 0) -> np.ndarray:
    """``F[sqrt(B) V_j^1(sqrt(B) .)](zeta) = 2 <K0(rho_j |zeta| / sqrt(B))>``."""
    _check_index(params, j)
    zeta = float(zeta)
    if zeta == 0.0:
        raise SingularityError("Fourier transform diverges logarithmically at zeta = 0")
    zz = abs(zeta) / math.sqrt(params.B)

    def diag(mj):
        def compute():
            return float(_fourier_single_mode(mj, np.array([zz]))[0]), 0.0
        return cached_scalar("FV_single", (mj,), (mj,), zz, compute)

    out = _single_matrix(basis(params), j, diag)
    get_cache().flush()
    return out


def fourier_V_single_modes(m_values, zeta: np.ndarray) -> np.ndarray:
    """Diagonal Fourier entries at field one, shape ``(len(m_values), len(zeta))``."""
    return np.array([_fourier_single_mode(m, zeta) for m in m_values])


def constant_Cn(params: ProblemParams, j: int = 0) -> np.ndarray:
    """``-<X_m| log(rho_j^2/4) |X_m'>`` (field one)."""
    _check_index(params, j)
    out = _single_matrix(basis(params), j, _log_mode)
    get_cache().flush()
    return out


def constant_Ce(params: ProblemParams, j: int = 0, k: int = 1) -> np.ndarray:
    """``-<X_m| log(rho_jk^2/4) |X_m'>`` (field one)."""
    _check_pair(params, j, k)
    out = _pair_matrix(basis(params), j, k, _log_relative_mode)
    get_cache().flush()
    return out


# ---------------------------------------------------------------- potentials

@dataclass
class MatrixPotential1D:
    """``z -> V(z)`` with ``V`` Hermitian on ``F_M``."""

    evaluate: Callable[[float], np.ndarray]
    basis: list[tuple[int, ...]]
    kind: tuple


def single_particle_potential(params: ProblemParams, j: int = 0) -> MatrixPotential1D:
    return MatrixPotential1D(lambda z: position_V_single(params, z, j), basis(params),
                             ("SingleParticle", j))


def pair_potential(params: ProblemParams, j: int, k: int) -> MatrixPotential1D:
    return MatrixPotential1D(lambda z: position_V_pair(params, j, k, z), basis(params),
                             ("Pair", j, k))


@dataclass
class DistributionPotential1D:
    """Singular potential ``sum_nu A_nu Pf(1/|L_nu z|) + B_nu delta(L_nu z)``.

    ``hyperplanes`` holds labels ``("Nucleus", j)`` or ``("Pair", j, k)``;
    ``pf_coeff`` and ``delta_coeff`` hold one matrix per hyperplane.
    """

    N: int
    hyperplanes: list[tuple]
    pf_coeff: list[np.ndarray]
    delta_coeff: list[np.ndarray]
    model: str = "Coulomb"
    meta: dict = field(default_factory=dict)

    def normal(self, idx: int) -> np.ndarray:
        lab = self.hyperplanes[idx]
        v = np.zeros(self.N)
        if lab[0] == "Nucleus":
            v[lab[1]] = 1.0
        else:
            v[lab[1]], v[lab[2]] = 1.0, -1.0
        return v

    def scalar_coefficients(self) -> tuple[list[float], list[float]]:
        """Coefficients for one-dimensional fibers (``d = 1``)."""
        if any(np.shape(c) != (1, 1) for c in self.delta_coeff):
            raise ValidationError("scalar coefficients need a one-dimensional F_M")
        return ([float(np.real(c[0, 0])) for c in self.pf_coeff],
                [float(np.real(c[0, 0])) for c in self.delta_coeff])


def _hyperplanes(N: int) -> list[tuple]:
    out: list[tuple] = [("Nucleus", j) for j in range(N)]
    out += [("Pair", j, k) for j in range(N) for k in range(j + 1, N)]
    return out


def assemble_vC(params: ProblemParams) -> DistributionPotential1D:
    """Coulomb-model potential: ``-Z (q^B + C_j^n delta)`` and ``q^B + C_jk^e delta``."""
    d = len(basis(params))
    eye = np.eye(d)
    logB = math.log(params.B)
    planes = _hyperplanes(params.N)
    pf, dl = [], []
    for lab in planes:
        if lab[0] == "Nucleus":
            pf.append(-params.Z * eye)
            dl.append(-params.Z * (logB * eye + constant_Cn(params, lab[1])))
        else:
            pf.append(eye.copy())
            dl.append(logB * eye + constant_Ce(params, lab[1], lab[2]))
    return DistributionPotential1D(params.N, planes, pf, dl, "Coulomb", {"B": params.B})


def assemble_vdelta(params: ProblemParams) -> DistributionPotential1D:
    """Delta-model potential with coupling ``2 alpha(B)``."""
    d = len(basis(params))
    eye = np.eye(d)
    a = alpha_of_B(params.B).value
    planes = _hyperplanes(params.N)
    pf = [np.zeros((d, d)) for _ in planes]
    dl = [(-2.0 * a * params.Z if lab[0] == "Nucleus" else 2.0 * a) * eye for lab in planes]
    return DistributionPotential1D(params.N, planes, pf, dl, "Delta", {"B": params.B, "alpha": a})


# ---------------------------------------------------------------- constants

def _c37_half(g: Callable[[np.ndarray], np.ndarray], n: int) -> float:
    x, w = np.polynomial.laguerre.laggauss(n)
    return float(np.dot(w, g(x)))


def constant_C37(n_nodes: int = 64) -> float:
    """``((1/4 pi) int (|log|eta|| + 2)^2 / (eta^2 + 4) d eta)^{1/2}``.

    Split at ``|eta| = 1`` and substitute ``eta = e^{+-t}``; both halves
    become Gauss-Laguerre integrals with smooth integrands.
    """
    def total(n):
        outer = _c37_half(lambda t: (t + 2.0) ** 2 / (1.0 + 4.0 * np.exp(-2.0 * t)), n)
        inner = _c37_half(lambda t: (t + 2.0) ** 2 / (4.0 + np.exp(-2.0 * t)), n)
        return 2.0 * (outer + inner) / (4.0 * math.pi)

    return math.sqrt(total(n_nodes))


def constant_CV11(params: ProblemParams) -> float:
    """``2 + 2 max_{m <= M} <chi_m| |log rho| |chi_m>``."""
    norm = max(_abslog_mode(m) for m in range(params.M + 1))
    get_cache().flush()
    return 2.0 + 2.0 * norm


def cn_diagonal(m: int) -> float:
    """Diagonal entry of ``C^n`` for a particle in mode ``m``."""
    return _log_mode(m)


def fourier_error(m_values, zeta: np.ndarray) -> np.ndarray:
    """``e_m(zeta) = F V(zeta) + 2 log|zeta| + 2 gamma - C^n_m`` at field one."""
    zeta = np.abs(np.asarray(zeta, dtype=float))
    fv = fourier_V_single_modes(m_values, zeta)
    cn = np.array([cn_diagonal(m) for m in m_values])[:, None]
    return fv + 2.0 * np.log(zeta)[None, :] + 2.0 * EULER_GAMMA - cn


def constant_C63(params: ProblemParams, grid: np.ndarray | None = None) -> float:
    """Radical combining ``pi^2 + 9 log^2 2 + 64 sqrt2/pi`` with two Fourier sups.

    ``sup_{|zeta|<=1} |F V + 2 log|zeta||`` is sampled on the grid together
    with its ``zeta -> 0`` limit ``C^n_m - 2 gamma``; ``F V`` decreases in
    ``|zeta|``, so its sup over ``|zeta| >= 1`` sits at ``zeta = 1``.
    """
    zs = SUP_GRID if grid is None else np.asarray(grid, dtype=float)
    ms = list(range(params.M + 1))
    low = zs[zs <= 1.0]
    fv_low = fourier_V_single_modes(ms, low)
    sup_low = float(np.max(np.abs(fv_low + 2.0 * np.log(low)[None, :])))
    limits = [abs(cn_diagonal(m) - 2.0 * EULER_GAMMA) for m in ms]
    sup_low = max(sup_low, max(limits))
    high = np.concatenate([[1.0], zs[zs >= 1.0]])
    sup_high = float(np.max(fourier_V_single_modes(ms, high)))
    get_cache().flush()
    total = (math.pi ** 2 + 9.0 * math.log(2.0) ** 2 + 64.0 * math.sqrt(2.0) / math.pi
             + sup_low ** 2 + 8.0 * math.sqrt(2.0) / math.pi * sup_high ** 2)
    return math.sqrt(total)


def constant_Cv(params: ProblemParams, n_points: int = 4000) -> float:
    """``(int ||e(zeta)||^2 / zeta^2 d zeta)^{1/2}`` with ``||.||`` the max over ``m <= M``.

    Trapezoid in ``log zeta`` on ``[1e-6, 1e2]``; beyond ``1e2`` the
    logarithmic part is integrated in closed form.
    """
    ms = list(range(params.M + 1))
    t = np.linspace(math.log(1e-6), math.log(1e2), n_points)
    zeta = np.exp(t)
    err = np.max(np.abs(fourier_error(ms, zeta)), axis=0)
    integrand = err ** 2 / zeta
    body = float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t)))
    u0 = t[-1]
    tail = 0.0
    for m in ms:
        a, b = 2.0, 2.0 * EULER_GAMMA - cn_diagonal(m)
        c = a * u0 + b
        tail = max(tail, math.exp(-u0) * (c * c + 2.0 * a * c + 2.0 * a * a))
    # small-zeta piece below 1e-6 is O(zeta^3 log^2 zeta) and negligible
    get_cache().flush()
    return math.sqrt(2.0 * (body + tail))


def constant_C_asympVj(params: ProblemParams) -> float:
    """``2^{1/4} C_v / sqrt(pi)`` with ``C_v`` from :func:`constant_Cv`."""
    return 2.0 ** 0.25 * constant_Cv(params) / math.sqrt(math.pi)
