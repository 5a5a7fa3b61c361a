"""Desk-scale spectral solvers for the one- and two-electron effective models.

Discretization: continuous piecewise-linear elements on a (possibly graded)
grid with lumped mass.  On a uniform grid this is the three-point finite
difference Laplacian with a delta at the center node becoming the on-site
term ``coefficient / h``.  Singular terms are integrated exactly against
the hat functions:

* ``delta`` contributes ``coefficient * u(0)^2``;
* ``Pf(1/|z|)`` is approached through ``T_eps = 1/|z| on {|z| > eps}`` plus
  ``2 log(eps) delta``, whose pairing with products of hats is elementary.
  As ``eps -> 0`` this pairing converges to the exact finite part, so the
  ``eps = 0`` limit is available in closed form as well.

The resulting generalized problem ``(K + P) u = E M u`` with diagonal ``M``
is symmetrized as ``S = M^{-1/2} (K + P) M^{-1/2}``; eigenvectors are
returned as grid functions normalized by ``sum_i m_i u_i^2 = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import __version__
from .atomic import write_bytes, write_json
from .errors import (AccuracyError, ConfigurationError, IllConditionedError,
                     UnsupportedError, ValidationError)
from .landau import ProblemParams
from .potentials import (DistributionPotential1D, MatrixPotential1D, assemble_vC,
                         assemble_vdelta, cn_diagonal, single_mode_potential)
from .quadrature import radial_expectation
from .specialfn import alpha_of_B

VECTOR_MAGIC = "LEFF-VEC v1"
PF_CUTOFF_CELLS = 32.0


# ------------------------------------------------------------------ grids

@dataclass(frozen=True)
class GridSpec:
    """Grid on ``[-L, L]`` with an odd number of points (so ``z = 0`` is a node).

    With ``core_spacing`` set the nodes are ``c sinh(k t)`` for uniform
    ``t``, giving spacing ``core_spacing`` at the center and geometric
    growth outwards; otherwise the grid is uniform.
    """

    half_width: float
    points: int
    pf_cutoff: float | None = None
    core_spacing: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValidationError(f"half_width must be positive, got {self.half_width!r}")
        if int(self.points) != self.points or self.points < 5 or self.points % 2 == 0:
            raise ValidationError(f"points must be an odd integer >= 5, got {self.points!r}")
        object.__setattr__(self, "points", int(self.points))
        if self.core_spacing is not None:
            uniform = 2.0 * self.half_width / (self.points - 1)
            if not (0 < self.core_spacing < uniform):
                raise ValidationError(
                    f"core_spacing must lie in (0, {uniform:.3g}) for this grid")
        if self.pf_cutoff is not None:
            if not (self.pf_cutoff > 0 and math.isfinite(self.pf_cutoff)):
                raise ValidationError("pf_cutoff must be positive")
            if self.pf_cutoff < 2.0 * self.spacing * (1.0 - 1e-12):
                raise ConfigurationError(
                    f"pf_cutoff {self.pf_cutoff:.3g} is below twice the central spacing "
                    f"{self.spacing:.3g}")

    @property
    def spacing(self) -> float:
        """Width of the cells touching ``z = 0``."""
        if self.core_spacing is None:
            return 2.0 * self.half_width / (self.points - 1)
        z = self.nodes()
        return float(z[self.points // 2 + 1])

    def nodes(self) -> np.ndarray:
        n, L = self.points, self.half_width
        t = np.linspace(-1.0, 1.0, n)
        if self.core_spacing is None:
            z = L * t
        else:
            dt = 2.0 / (n - 1)
            ratio = L * dt / self.core_spacing
            k = brentq(lambda x: math.sinh(x) / x - ratio, 1e-12, 700.0, xtol=1e-15)
            z = (L / math.sinh(k)) * np.sinh(k * t)
            z[-1], z[0] = L, -L
        z[n // 2] = 0.0
        return z

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "points": self.points,
                "pf_cutoff": self.pf_cutoff, "core_spacing": self.core_spacing}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(d["half_width"], d["points"], d.get("pf_cutoff"), d.get("core_spacing"))


@dataclass(frozen=True)
class _Fem1D:
    z: np.ndarray        # interior nodes
    mass: np.ndarray     # lumped mass
    k_diag: np.ndarray   # stiffness of (1/2) int u' v'
    k_off: np.ndarray

    @property
    def center(self) -> int:
        return len(self.z) // 2


def _fem(grid: GridSpec) -> _Fem1D:
    nodes = grid.nodes()
    h = np.diff(nodes)
    return _Fem1D(nodes[1:-1], 0.5 * (h[:-1] + h[1:]),
                  0.5 * (1.0 / h[:-1] + 1.0 / h[1:]), -0.5 / h[1:-1])


# ------------------------------------------------------------------ results

@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray      # shape (grid values, count)
    residual_norms: np.ndarray
    model: str
    params: ProblemParams | None
    grid: GridSpec | None
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    operator: object = None       # symmetrized sparse matrix, when meaningful

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "params": self.params.to_dict() if self.params is not None else None,
            "grid": self.grid.to_dict() if self.grid is not None else None,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in self.residual_norms],
            "meta": _jsonable(self.meta),
            "version": __version__,
        }

    def write_json(self, path: str) -> None:
        write_json(path, self.to_json())

    def write_vectors(self, path: str) -> None:
        """Flat little-endian float64 array, row-major ``(points, count)``."""
        vec = np.ascontiguousarray(np.asarray(self.eigenvectors, dtype="<f8"))
        if vec.ndim == 1:
            vec = vec[:, None]
        header = f"{VECTOR_MAGIC} {vec.shape[0]} {vec.shape[1]}\n".encode("ascii")
        write_bytes(path, header + vec.tobytes(order="C"))


def read_vectors(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if " ".join(header[:2]) != VECTOR_MAGIC:
            raise ValidationError(f"{path} is not a {VECTOR_MAGIC} file")
        rows, cols = int(header[2]), int(header[3])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValidationError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise AccuracyError(f"non-finite value {v} in result metadata")
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ------------------------------------------------------------------ delta model, N = 1

def default_grid_n1(params: ProblemParams, model: str = "Delta", points: int = 4001) -> GridSpec:
    """``L = 30 / (2 alpha Z)``.

    Delta-model grids are uniform.  Coulomb and projected models get a
    graded core of spacing ``1e-5 L`` where their eigenfunctions have a
    logarithmic derivative singularity.
    """
    a = alpha_of_B(params.B).value
    L = 30.0 / (2.0 * a * params.Z) if params.Z > 0 else 30.0
    if model == "Delta":
        return GridSpec(L, points)
    h0 = 1e-5 * L
    grid = GridSpec(L, points, core_spacing=h0)
    if model == "Coulomb":
        grid = GridSpec(L, points, pf_cutoff=PF_CUTOFF_CELLS * grid.spacing, core_spacing=h0)
    return grid


def delta_exact_n1(params: ProblemParams, grid: GridSpec | None = None) -> SpectrumResult:
    """Closed-form bound state ``sqrt(2 a Z) exp(-2 a Z |z|)`` at ``-2 a^2 Z^2``."""
    if params.N != 1:
        raise UnsupportedError("the closed form covers one electron only")
    a = alpha_of_B(params.B).value
    grid = grid or default_grid_n1(params)
    z = grid.nodes()[1:-1]
    meta = {"threshold": 0.0, "alpha": a, "exact": True}
    if params.Z == 0:
        return SpectrumResult(np.zeros(0), np.zeros((len(z), 0)), np.zeros(0), "Delta",
                              params, grid, z, meta=meta)
    kappa = 2.0 * a * params.Z
    phi = math.sqrt(kappa) * np.exp(-kappa * np.abs(z))
    return SpectrumResult(np.array([-0.5 * kappa * kappa]), phi[:, None], np.zeros(1),
                          "Delta", params, grid, z, meta=meta)


def scaling_equivalent_form(params: ProblemParams) -> tuple[float, DistributionPotential1D]:
    """``h_delta^B`` is unitarily ``alpha^2 (-(1/2) Laplacian + 2 v_delta)``.

    Returns ``alpha^2`` and the field-free potential with couplings ``-2Z``
    per nucleus plane and ``+2`` per pair plane.
    """
    a = alpha_of_B(params.B).value
    reduced = assemble_vdelta(ProblemParams(math.e ** 2, params.Z, params.N, params.M))
    reduced.meta = {"scale": a * a, "reduced": True}
    return a * a, reduced


# ------------------------------------------------------------------ finite-part pairing

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _inv_abs_cell(lo: np.ndarray, hi: np.ndarray, a: np.ndarray, b: np.ndarray):
    """``int_lo^hi phi phi' / y dy`` for the hats of the cell ``[a, b]``, ``0 <= a``.

    Returns the three products (left-left, left-right, right-right).  Where
    ``lo == 0`` the logarithm is renormalized (``log lo`` dropped), which is
    what the finite part requires at the center node.
    """
    w = b - a
    coeffs = (
        (b * b, -2.0 * b, np.ones_like(b)),
        (-a * b, a + b, -np.ones_like(b)),
        (a * a, -2.0 * a, np.ones_like(b)),
    )
    far = lo > 4.0 * (hi - lo)
    out = []
    safe_lo = np.where(lo > 0, lo, 1.0)
    log_ratio = np.where(lo > 0, np.log(hi / safe_lo), np.log(hi))
    for c0, c1, c2 in coeffs:
        closed = (c0 * log_ratio + c1 * (hi - lo) + 0.5 * c2 * (hi * hi - lo * lo)) / (w * w)
        out.append(closed)
    if np.any(far):
        lf, hf, af, bf = lo[far], hi[far], a[far], b[far]
        wf = bf - af
        y = 0.5 * (hf - lf)[:, None] * _GL_X[None, :] + 0.5 * (hf + lf)[:, None]
        wt = 0.5 * (hf - lf)[:, None] * _GL_W[None, :] / y
        pl = (bf[:, None] - y) / wf[:, None]
        pr = (y - af[:, None]) / wf[:, None]
        out[0][far] = np.sum(wt * pl * pl, axis=1)
        out[1][far] = np.sum(wt * pl * pr, axis=1)
        out[2][far] = np.sum(wt * pr * pr, axis=1)
    return out


def finite_part_matrix(nodes: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal pairing ``<T_eps, phi_i phi_j>`` on interior nodes.

    ``eps = 0`` gives the exact ``<Pf(1/|z|), phi_i phi_j>``.
    """
    n = len(nodes)
    c = n // 2
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    a, b = nodes[:-1], nodes[1:]
    pos = a >= 0
    # reflect negative cells to the positive half-line
    ra = np.where(pos, a, -b)
    rb = np.where(pos, b, -a)
    lo = np.maximum(ra, eps)
    active = lo < rb
    lo = np.where(active, lo, rb)
    ll, lr, rr = _inv_abs_cell(lo, rb, ra, rb)
    ll, lr, rr = (np.where(active, v, 0.0) for v in (ll, lr, rr))
    # on reflected cells the left hat in y is the right hat in z
    left = np.where(pos, ll, rr)
    right = np.where(pos, rr, ll)
    diag[:-1] += left
    diag[1:] += right
    off += lr
    if eps > 0:
        diag[c] += 2.0 * math.log(eps)
    # drop the Dirichlet wall nodes
    return diag[1:-1], off[1:-1]


def _coulomb_cell(lo: np.ndarray, hi: np.ndarray, r: np.ndarray):
    """``int_lo^hi z^k (r^2 + z^2)^{-1/2} dz`` for ``k = 0, 1, 2``; broadcasting."""
    sl = np.sqrt(r * r + lo * lo)
    sh = np.sqrt(r * r + hi * hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        # asinh difference written to stay accurate when r << lo
        j0 = np.where(lo > 0, np.log((hi + sh) / (lo + sl)), np.arcsinh(hi / r))
    j1 = (hi * hi - lo * lo) / (sh + sl)
    j2 = 0.5 * (hi * sh - lo * sl - r * r * j0)
    return j0, j1, j2


def transverse_coulomb_matrix(nodes: np.ndarray, m: int, B: float,
                              chunk: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal pairing ``<sqrt(B) V_m(sqrt(B) z), phi_i phi_j>`` on interior nodes.

    ``sqrt(B) V_m(sqrt(B) z) = E_m[(r^2 + z^2)^{-1/2}]`` with ``r^2 = 2 s / B``;
    the hat-function integrals are elementary for fixed ``r`` and the
    average over ``s`` uses the radial quadrature.  Cells far from the
    origin compared with their width use Gauss-Legendre on nodal values of
    the already averaged potential.
    """
    n = len(nodes)
    a, b = nodes[:-1], nodes[1:]
    pos = a >= 0
    ra = np.where(pos, a, -b)
    rb = np.where(pos, b, -a)
    w = rb - ra
    ll = np.zeros(n - 1)
    lr = np.zeros(n - 1)
    rr = np.zeros(n - 1)
    far = ra > 4.0 * w
    near_idx = np.flatnonzero(~far)
    for start in range(0, len(near_idx), chunk):
        idx = near_idx[start:start + chunk]
        A_, B_, W_ = ra[idx], rb[idx], w[idx]

        def f(s, A_=A_, B_=B_, W_=W_):
            r = np.sqrt(2.0 * s / B)[:, None]
            j0, j1, j2 = _coulomb_cell(A_[None, :], B_[None, :], r)
            w2 = (W_ * W_)[None, :]
            v_ll = (B_ * B_ * j0 - 2.0 * B_ * j1 + j2) / w2
            v_lr = (-A_ * B_ * j0 + (A_ + B_) * j1 - j2) / w2
            v_rr = (A_ * A_ * j0 - 2.0 * A_ * j1 + j2) / w2
            return np.concatenate([v_ll, v_lr, v_rr], axis=1)

        val, _ = radial_expectation(m, f)
        k = len(idx)
        ll[idx], lr[idx], rr[idx] = val[:k], val[k:2 * k], val[2 * k:]
    if np.any(far):
        fi = np.flatnonzero(far)
        y = 0.5 * w[fi, None] * _GL_X[None, :] + 0.5 * (ra[fi] + rb[fi])[:, None]
        wt = 0.5 * w[fi, None] * _GL_W[None, :]
        vy = single_mode_potential(m, y.ravel(), B).reshape(y.shape)
        pl = (rb[fi, None] - y) / w[fi, None]
        pr = (y - ra[fi, None]) / w[fi, None]
        ll[fi] = np.sum(wt * vy * pl * pl, axis=1)
        lr[fi] = np.sum(wt * vy * pl * pr, axis=1)
        rr[fi] = np.sum(wt * vy * pr * pr, axis=1)
    left = np.where(pos, ll, rr)
    right = np.where(pos, rr, ll)
    diag = np.zeros(n)
    diag[:-1] += left
    diag[1:] += right
    return diag[1:-1], lr[1:-1]


# ------------------------------------------------------------------ 1D grid solver

def _smooth_values(smooth, z: np.ndarray) -> np.ndarray:
    if smooth is None:
        return np.zeros_like(z)
    if isinstance(smooth, MatrixPotential1D):
        if len(smooth.basis) != 1:
            raise UnsupportedError("matrix-valued smooth parts need a one-dimensional F_M")
        return np.array([float(np.real(smooth.evaluate(float(t))[0, 0])) for t in z])
    return np.asarray(smooth(z), dtype=float)


def _tridiagonal(fem: _Fem1D, pf: float, delta: float, vals: np.ndarray,
                 pf_pair: tuple[np.ndarray, np.ndarray] | None, extra=None):
    m = fem.mass
    d = fem.k_diag + m * vals
    e = fem.k_off.copy()
    if extra is not None:
        d = d + extra[0]
        e = e + extra[1]
    d[fem.center] += delta
    if pf != 0.0 and pf_pair is not None:
        d = d + pf * pf_pair[0]
        e = e + pf * pf_pair[1]
    s = 1.0 / np.sqrt(m)
    return d * s * s, e * s[:-1] * s[1:]


def _reduce_parity(d: np.ndarray, e: np.ndarray, c: int, parity: str | None):
    if parity is None:
        return d, e
    if not (np.allclose(d[:c][::-1], d[c + 1:], rtol=1e-10, atol=1e-12)
            and np.allclose(e[:c][::-1], e[c:], rtol=1e-10, atol=1e-12)):
        raise ValidationError("parity reduction needs a mirror-symmetric operator")
    if parity == "odd":
        return d[c + 1:].copy(), e[c + 1:].copy()
    if parity == "even":
        er = e[c:].copy()
        er[0] *= math.sqrt(2.0)
        return d[c:].copy(), er
    raise ValidationError(f"parity must be 'even', 'odd' or None, got {parity!r}")


def _expand_parity(y: np.ndarray, n: int, c: int, parity: str | None) -> np.ndarray:
    if parity is None:
        return y
    out = np.zeros((n, y.shape[1]))
    if parity == "odd":
        out[c + 1:] = y
        out[:c] = -y[::-1]
        return out / math.sqrt(2.0)
    out[c] = y[0]
    out[c + 1:] = y[1:] / math.sqrt(2.0)
    out[:c] = y[1:][::-1] / math.sqrt(2.0)
    return out


def _tri_eigs(d: np.ndarray, e: np.ndarray, k: int):
    k = min(k, len(d))
    w, v = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    res = np.array([np.linalg.norm(d * v[:, i] + np.r_[e * v[1:, i], 0.0]
                                   + np.r_[0.0, e * v[:-1, i]] - w[i] * v[:, i])
                    for i in range(k)])
    return w, v, res


def _sparse_tri(d: np.ndarray, e: np.ndarray):
    return sps.diags([e, d, e], [-1, 0, 1], format="csc")


def _richardson(seq: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Two-level Richardson for step ratio 2 and leading order one; observed orders."""
    v1, v2, v3 = seq
    r1 = 2.0 * v2 - v1
    r2 = 2.0 * v3 - v2
    extrap = (4.0 * r2 - r1) / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        order = np.log2(np.abs(v1 - v2) / np.abs(v2 - v3))
    return extrap, order


def grid_solve_1d(potential: DistributionPotential1D, grid: GridSpec, n_eigs: int = 4,
                  smooth=None, params: ProblemParams | None = None,
                  parity: str | None = None, model: str | None = None,
                  smooth_pairing: tuple[np.ndarray, np.ndarray] | None = None) -> SpectrumResult:
    """Lowest eigenpairs of ``-(1/2) d^2/dz^2 + A Pf(1/|z|) + B delta + smooth``.

    ``smooth`` is sampled at the nodes (lumped); ``smooth_pairing`` instead
    supplies the exact tridiagonal pairing of a potential with hat products.

    The returned eigenpairs use the exact finite-part pairing (the
    ``eps -> 0`` limit on the grid).  When ``A != 0`` the cutoff sequence
    ``eps0, eps0/2, eps0/4`` (those not below ``2h``) is solved as well and
    its Richardson extrapolation, observed order in ``eps`` and the
    derivative-jump residual are stored in ``meta``.
    """
    if potential.N != 1:
        raise UnsupportedError("grid_solve_1d handles a single coordinate")
    pfs, dls = potential.scalar_coefficients()
    A, Bc = pfs[0], dls[0]
    fem = _fem(grid)
    n, c = len(fem.z), fem.center
    nodes = grid.nodes()
    vals = _smooth_values(smooth, fem.z)
    meta: dict = {"pf_coeff": A, "delta_coeff": Bc, "parity": parity}

    pair0 = finite_part_matrix(nodes, 0.0) if A != 0.0 else None
    d, e = _tridiagonal(fem, A, Bc, vals, pair0, smooth_pairing)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
        raise AccuracyError("non-finite entries in the assembled operator")
    op = _sparse_tri(d, e)
    dr, er = _reduce_parity(d, e, c, parity)
    w, v, res = _tri_eigs(dr, er, n_eigs)
    vec = _expand_parity(v, n, c, parity) / np.sqrt(fem.mass)[:, None]

    if A != 0.0:
        eps0 = grid.pf_cutoff if grid.pf_cutoff is not None else PF_CUTOFF_CELLS * grid.spacing
        if eps0 < 2.0 * grid.spacing * (1 - 1e-12):
            raise ConfigurationError("pf_cutoff must be at least twice the central spacing")
        eps_seq = [eps0 / 2 ** i for i in range(3)
                   if eps0 / 2 ** i >= 2.0 * grid.spacing * (1 - 1e-9)]
        seq = []
        for eps in eps_seq:
            de, ee = _tridiagonal(fem, A, Bc, vals, finite_part_matrix(nodes, eps),
                                  smooth_pairing)
            der, eer = _reduce_parity(de, ee, c, parity)
            seq.append(_tri_eigs(der, eer, n_eigs)[0])
        jumps = [_jump_residual(fem, vec[:, 0], eps, A, Bc, vals, w[0]) for eps in eps_seq]
        meta["extrapolation"] = {"eps": eps_seq, "eigenvalues": [s.tolist() for s in seq],
                                 "jump_residual": jumps}
        if len(seq) == 3:
            ext, order = _richardson(seq)
            meta["extrapolation"]["richardson"] = ext.tolist()
            meta["extrapolation"]["observed_order"] = [float(o) if np.isfinite(o) else None
                                                       for o in order]
    return SpectrumResult(w, vec, res, model or potential.model, params, grid, fem.z,
                          fem.mass, meta, op)


def _jump_residual(fem: _Fem1D, u: np.ndarray, eps: float, A: float, Bc: float,
                   vals: np.ndarray, energy: float) -> float:
    """``|u'(eps) - u'(-eps) - (4 A log eps + 2 B) u(0)| / |u(0)|`` for a grid eigenfunction.

    The piecewise-linear slope of the cell holding ``+-eps`` is moved from the
    cell midpoint to ``+-eps`` with ``u'' = 2 (A/|z| + V - E) u``.  In the
    continuum the residual is ``O(eps log eps)``.
    """
    z = fem.z
    c = fem.center
    u0 = u[c]
    if abs(u0) < 1e-12 * np.max(np.abs(u)):
        return 0.0

    def slope_at(x):
        k = int(np.clip(np.searchsorted(z, x) - 1, 0, len(z) - 2))
        s = (u[k + 1] - u[k]) / (z[k + 1] - z[k])
        mid = 0.5 * (z[k] + z[k + 1])
        um = 0.5 * (u[k] + u[k + 1])
        vm = 0.5 * (vals[k] + vals[k + 1])
        return s + (x - mid) * 2.0 * (A / abs(mid) + vm - energy) * um

    predicted = (4.0 * A * math.log(eps) + 2.0 * Bc) * u0
    return float(abs(slope_at(eps) - slope_at(-eps) - predicted) / abs(u0))


# ------------------------------------------------------------------ model wrappers, N = 1

def delta_grid_n1(params: ProblemParams, grid: GridSpec | None = None, n_eigs: int = 4,
                  parity: str | None = None) -> SpectrumResult:
    """Grid solution of the one-electron delta model ``-(1/2) d^2 - 2 alpha Z delta``."""
    if params.N != 1:
        raise UnsupportedError("one electron only")
    grid = grid or default_grid_n1(params)
    res = grid_solve_1d(assemble_vdelta(params), grid, n_eigs, params=params, parity=parity,
                        model="Delta")
    res.meta["alpha"] = alpha_of_B(params.B).value
    return res


def coulomb_solve_n1(params: ProblemParams, grid: GridSpec | None = None, n_eigs: int = 4,
                     parity: str | None = None) -> SpectrumResult:
    """``h_C = -(1/2) d^2 - Z (Pf(1/|z|) + (log B + C^n) delta)`` for one electron."""
    if params.N != 1:
        raise UnsupportedError("one electron only")
    grid = grid or default_grid_n1(params, "Coulomb")
    res = grid_solve_1d(assemble_vC(params), grid, n_eigs, params=params, parity=parity,
                        model="Coulomb")
    res.meta["Cn"] = cn_diagonal(params.M)
    return res


def eff_potential_values(params: ProblemParams, z: np.ndarray, chunk: int = 512) -> np.ndarray:
    # nodal values, for inspection and for lumped comparisons
    """``-Z sqrt(B) V^1(sqrt(B) z)`` for the single channel of ``N = 1``."""
    out = np.empty(len(z))
    for start in range(0, len(z), chunk):
        sl = slice(start, start + chunk)
        out[sl] = single_mode_potential(params.M, z[sl], params.B)
    return -params.Z * out


def eff_solve_n1(params: ProblemParams, grid: GridSpec | None = None, n_eigs: int = 4,
                 parity: str | None = None) -> SpectrumResult:
    """Projected one-electron model ``-(1/2) d^2 - Z sqrt(B) V(sqrt(B) z)``.

    The potential is paired exactly with the hat functions, so the grid
    only has to resolve the eigenfunctions, not the transverse length
    ``1/sqrt(B)``.  Also stores ``<h_eff phi_delta, phi_delta>`` for the
    delta-model ground state and the delta-model energy itself.
    """
    if params.N != 1:
        raise UnsupportedError("one electron only")
    grid = grid or default_grid_n1(params, "Eff")
    fem = _fem(grid)
    gd, ge = transverse_coulomb_matrix(grid.nodes(), params.M, params.B)
    pairing = (-params.Z * gd, -params.Z * ge)
    empty = DistributionPotential1D(1, [("Nucleus", 0)], [np.zeros((1, 1))],
                                    [np.zeros((1, 1))], "Eff")
    res = grid_solve_1d(empty, grid, n_eigs, params=params, parity=parity, model="Eff",
                        smooth_pairing=pairing)
    a = alpha_of_B(params.B).value
    if params.Z > 0:
        kappa = 2.0 * a * params.Z
        phi = np.exp(-kappa * np.abs(fem.z))
        # phi_delta is not a grid function; its piecewise-linear interpolant
        # is used, normalized in the lumped inner product
        phi /= math.sqrt(float(np.sum(fem.mass * phi * phi)))
        h_phi = (fem.k_diag + pairing[0]) * phi
        h_phi[:-1] += (fem.k_off + pairing[1]) * phi[1:]
        h_phi[1:] += (fem.k_off + pairing[1]) * phi[:-1]
        res.meta["delta_trial_energy"] = float(np.dot(phi, h_phi))
        res.meta["delta_energy"] = -0.5 * kappa * kappa
    res.meta["alpha"] = a
    return res


# ------------------------------------------------------------------ resolvents

def _nearest_eigenvalue(op, xi: float) -> float:
    lu = spla.splu(sps.csc_matrix(op - xi * sps.identity(op.shape[0], format="csc")))
    inv = spla.LinearOperator(op.shape, matvec=lu.solve, dtype=float)
    mu = spla.eigsh(inv, k=1, which="LM", return_eigenvectors=False, tol=1e-12)[0]
    return float(xi + 1.0 / mu)


def spectral_distance(res: SpectrumResult, xi: float) -> float:
    """Distance from ``xi`` to the discrete spectrum of ``res.operator``."""
    if res.operator is None:
        raise ValidationError("spectrum carries no operator")
    return float(abs(_nearest_eigenvalue(res.operator, xi) - xi))


def resolvent_distance(spec_a: SpectrumResult, spec_b: SpectrumResult, xi: float,
                       guard: float = 1e-8) -> float:
    """``||(S_a - xi)^{-1} - (S_b - xi)^{-1}||`` in the grid inner product.

    Both resolvents are applied through sparse LU factors and the norm is the
    largest-magnitude eigenvalue of their (symmetric) difference, so no
    spectral truncation is involved.
    """
    for s in (spec_a, spec_b):
        if s.operator is None:
            raise ValidationError("both spectra must carry their discrete operator")
    if spec_a.operator.shape != spec_b.operator.shape or (
            spec_a.nodes is not None and spec_b.nodes is not None
            and not np.allclose(spec_a.nodes, spec_b.nodes, rtol=0, atol=1e-14)):
        raise ValidationError("resolvent comparison needs both results on the same grid")
    n = spec_a.operator.shape[0]
    eye = sps.identity(n, format="csc")
    lus = []
    for s in (spec_a, spec_b):
        dist = spectral_distance(s, xi)
        if dist < guard * (1.0 + abs(xi)):
            raise IllConditionedError(
                f"xi = {xi!r} lies within {dist:.2e} of the {s.model} spectrum")
        lus.append(spla.splu(sps.csc_matrix(s.operator - xi * eye)))
    if spec_a.operator is spec_b.operator or (spec_a.operator != spec_b.operator).nnz == 0:
        return 0.0

    def matvec(x):
        x = np.asarray(x).ravel()
        return lus[0].solve(x) - lus[1].solve(x)

    diff = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    val = spla.eigsh(diff, k=1, which="LM", return_eigenvectors=False, tol=1e-10)[0]
    return float(abs(val))


_ONE_ELECTRON = {"eff": "Eff", "delta": "Delta", "coulomb": "Coulomb"}


def solve_n1(model: str, params: ProblemParams, grid: GridSpec | None = None,
             n_eigs: int = 4, parity: str | None = None) -> SpectrumResult:
    """Dispatch on ``model`` in ``{"eff", "delta", "coulomb"}``."""
    key = model.lower()
    if key not in _ONE_ELECTRON:
        raise ValidationError(f"unknown model {model!r}; expected eff, delta or coulomb")
    solver = {"eff": eff_solve_n1, "delta": delta_grid_n1, "coulomb": coulomb_solve_n1}[key]
    return solver(params, grid, n_eigs=n_eigs, parity=parity)


def compare_resolvents(params: ProblemParams, model_a: str = "eff", model_b: str = "delta",
                       points: int = 4001, fraction: float = 0.125) -> dict:
    """Resolvent distance at ``xi = E0_b - fraction * alpha^2``.

    Both models share the graded Coulomb grid, so ``d_b(xi) = fraction alpha^2``
    up to the spectral gap above ``E0_b``.
    """
    a = alpha_of_B(params.B).value
    grid = default_grid_n1(params, "Coulomb", points=points)
    spec_a = solve_n1(model_a, params, grid)
    spec_b = solve_n1(model_b, params, grid)
    d = fraction * a * a
    xi = float(spec_b.eigenvalues[0]) - d
    return {"B": params.B, "alpha": a, "xi": xi, "d_xi": spectral_distance(spec_b, xi),
            "resolvent_distance": resolvent_distance(spec_a, spec_b, xi),
            "E0_a": float(spec_a.eigenvalues[0]), "E0_b": float(spec_b.eigenvalues[0]),
            "model_a": model_a.lower(), "model_b": model_b.lower(), "points": points}


# ------------------------------------------------------------------ N = 2 delta model

def default_grid_n2(Z: float, points: int = 401) -> GridSpec:
    """Graded grid reaching far enough that the box energy is below ``1e-4``."""
    if not Z > 0:
        raise ValidationError("Z must be positive")
    return GridSpec(150.0 / Z, points, core_spacing=min(0.02 / Z, 0.5 * 300.0 / Z / (points - 1)))


def _one_electron_threshold(fem: _Fem1D, Z: float) -> float:
    d, e = _tridiagonal(fem, 0.0, -2.0 * Z, np.zeros_like(fem.z), None)
    return float(sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0),
                                      eigvals_only=True)[0])


def _sector_basis(n: int, swap: int | None, inversion: int | None):
    """Orthonormal symmetry-adapted basis of ``R^{n x n}`` (sparse, columns).

    ``swap`` and ``inversion`` are characters ``+1``/``-1`` of
    ``(z1, z2) -> (z2, z1)`` and ``(z1, z2) -> (-z1, -z2)``, or ``None`` to
    leave that symmetry unreduced.
    """
    i, j = np.divmod(np.arange(n * n), n)
    ib, jb = n - 1 - i, n - 1 - j
    group = [(i, j, 1)]
    if swap is not None:
        group.append((j, i, swap))
    if inversion is not None:
        group.append((ib, jb, inversion))
        if swap is not None:
            group.append((jb, ib, swap * inversion))
    images = np.array([a * n + b for a, b, _ in group])
    chars = np.array([ch for _, _, ch in group], dtype=float)
    rep = images.min(axis=0)
    reps = np.flatnonzero(rep == np.arange(n * n))
    col = np.full(n * n, -1)
    col[reps] = np.arange(len(reps))
    rows = images[:, reps].ravel()
    cols = np.tile(np.arange(len(reps)), len(group))
    data = np.repeat(chars, len(reps))
    P = sps.csc_matrix((data, (rows, cols)), shape=(n * n, len(reps)))
    P.sum_duplicates()
    P.eliminate_zeros()
    norms = np.sqrt(np.asarray(P.multiply(P).sum(axis=0)).ravel())
    keep = np.flatnonzero(norms > 0.5)
    P = P[:, keep] @ sps.diags(1.0 / norms[keep])
    return P.tocsc()


def _n2_operator(fem: _Fem1D, Z: float, repulsion: float):
    n = len(fem.z)
    m = fem.mass
    K = sps.diags([fem.k_off, fem.k_diag, fem.k_off], [-1, 0, 1], format="csr")
    Mm = sps.diags(m)
    A = sps.kron(K, Mm) + sps.kron(Mm, K)
    c = fem.center
    pot = np.zeros((n, n))
    pot[c, :] += -2.0 * Z * m          # line z1 = 0, weight = length element along z2
    pot[:, c] += -2.0 * Z * m
    pot[np.arange(n), np.arange(n)] += repulsion * m
    s = 1.0 / np.sqrt(np.outer(m, m).ravel())
    H = A + sps.diags(pot.ravel())
    return (sps.diags(s) @ H @ sps.diags(s)).tocsr()


def _antisymmetric_levels(fem: _Fem1D, Z: float, n_eigs: int):
    # the pair term sits on diagonal nodes, where swap-odd grid functions
    # vanish, so this sector is exactly spanned by 1D Slater products
    d, e = _tridiagonal(fem, 0.0, -2.0 * Z, np.zeros_like(fem.z), None)
    k = min(len(d), n_eigs + 1)
    w1, v1 = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    pairs = sorted(((w1[i] + w1[j], i, j) for i in range(k) for j in range(i + 1, k)))[:n_eigs]
    w = np.array([p[0] for p in pairs])
    v = np.column_stack([(np.kron(v1[:, i], v1[:, j]) - np.kron(v1[:, j], v1[:, i])) / math.sqrt(2.0)
                         for _, i, j in pairs])
    return w, v


def delta_solve_n2(Z: float, grid: GridSpec | None = None, n_eigs: int = 1,
                   repulsion: float = 2.0, sector: str = "symmetric",
                   resolution: float = 1e-4) -> SpectrumResult:
    """Field-free two-electron delta model on a square grid.

    ``-(1/2) Laplacian - 2Z (delta(z1) + delta(z2)) + repulsion * delta(z1 - z2)``.
    ``sector`` selects grid functions symmetric (``"symmetric"``, which holds
    the ground state) or antisymmetric (``"antisymmetric"``) under the swap
    of electrons, or no reduction (``"full"``).  Binding is judged against
    the one-electron threshold computed on the same grid.
    """
    if not (math.isfinite(Z) and Z > 0):
        raise ValidationError("Z must be positive")
    if repulsion < 0:
        raise ValidationError("the pair coupling must be nonnegative")
    grid = grid or default_grid_n2(Z)
    fem = _fem(grid)
    n = len(fem.z)
    box = math.pi ** 2 / (8.0 * grid.half_width ** 2)
    e1 = _one_electron_threshold(fem, Z)
    if box > resolution:
        need = math.pi / math.sqrt(8.0 * resolution)
        raise AccuracyError(
            f"box energy {box:.2e} exceeds the threshold resolution; use half_width >= {need:.4g}",
            resolution)
    if abs(e1 / (-2.0 * Z * Z) - 1.0) > 1e-2:
        raise AccuracyError(
            f"one-electron threshold off by {abs(e1 / (-2 * Z * Z) - 1):.1e}; "
            f"reduce core_spacing below {0.2 * grid.spacing:.3g}", 1e-2)
    S = _n2_operator(fem, Z, repulsion)
    if sector == "antisymmetric":
        w, v = _antisymmetric_levels(fem, Z, n_eigs)
        bases = []
    elif sector == "symmetric":
        bases = [_sector_basis(n, 1, 1)] if n_eigs == 1 else [_sector_basis(n, 1, 1),
                                                              _sector_basis(n, 1, -1)]
    elif sector == "full":
        bases = [None]
    else:
        raise ValidationError(f"unknown sector {sector!r}")
    # S >= S1 x 1 + 1 x S1 since the pair term is nonnegative, so this shift
    # lies below the whole spectrum and shift-invert returns the lowest levels
    sigma = 2.0 * e1 - 1e-3 * abs(e1) - 1e-9
    vals, vecs = ([w], [v]) if sector == "antisymmetric" else ([], [])
    for P in bases:
        Hr = S if P is None else (P.T @ S @ P)
        k = min(n_eigs, Hr.shape[0] - 2)
        w, v = spla.eigsh(Hr.tocsc(), k=k, sigma=sigma, which="LM", tol=1e-12)
        full = v if P is None else P @ v
        vals.append(w)
        vecs.append(full)
    w = np.concatenate(vals)
    v = np.concatenate(vecs, axis=1)
    order = np.argsort(w)[:n_eigs]
    w, v = w[order], v[:, order]
    res = np.array([np.linalg.norm(S @ v[:, i] - w[i] * v[:, i]) for i in range(len(w))])
    weights = np.outer(fem.mass, fem.mass).ravel()
    vec = v / np.sqrt(weights)[:, None]
    meta = {"threshold": e1, "exact_threshold": -2.0 * Z * Z, "box_energy": box,
            "binding_gap": float(w[0] - e1), "binds": bool(w[0] < e1 - 1e-9),
            "sector": sector, "repulsion": repulsion, "Z": Z, "shape": [n, n]}
    return SpectrumResult(w, vec, res, "Delta", ProblemParams(math.e ** 2, Z, 2, 0), grid,
                          fem.z, weights, meta, None)


def critical_charge_n2(half_widths=(200.0, 400.0), points: int = 401,
                       core_spacing: float = 0.05, bracket=(0.30, 0.45),
                       tol: float = 1e-3) -> dict:
    """Bisection for the smallest binding charge, then extrapolation in ``1/L``.

    For each half width the binding indicator ``E0(N=2) < E0(N=1)`` is
    bisected on ``bracket`` to ``tol``.  A finite box biases the estimate
    upwards by ``O(1/L)``; the two largest boxes are combined linearly in
    ``1/L``.
    """
    per_grid = []
    for L in half_widths:
        grid = GridSpec(L, points, core_spacing=core_spacing)
        lo, hi = bracket

        def binds(Z):
            return delta_solve_n2(Z, grid).meta["binds"]

        if binds(lo) or not binds(hi):
            raise AccuracyError(f"bracket {bracket} does not straddle the critical charge at L={L}")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if binds(mid):
                hi = mid
            else:
                lo = mid
        per_grid.append({"half_width": L, "critical_Z": 0.5 * (lo + hi)})
    if len(per_grid) >= 2:
        (L1, z1), (L2, z2) = [(g["half_width"], g["critical_Z"]) for g in per_grid[-2:]]
        extrap = (L2 * z2 - L1 * z1) / (L2 - L1)
    else:
        extrap = per_grid[0]["critical_Z"]
    return {"per_grid": per_grid, "extrapolated": extrap, "tol": tol,
            "points": points, "core_spacing": core_spacing}
