import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from leff.errors import (
    AccuracyError,
    ConfigurationError,
    IllConditionedError,
    UnsupportedError,
    ValidationError,
)
from leff.landau import ProblemParams
from leff.potentials import DistributionPotential1D
from leff.solvers import (
    GridSpec,
    _fem,
    _n2_operator,
    _sector_basis,
    compare_resolvents,
    coulomb_solve_n1,
    default_grid_n1,
    delta_exact_n1,
    delta_grid_n1,
    delta_solve_n2,
    eff_solve_n1,
    grid_solve_1d,
    read_vectors,
    resolvent_distance,
    scaling_equivalent_form,
    solve_n1,
    spectral_distance,
)
from leff.specialfn import alpha_of_B

E2 = math.e ** 2


def free_potential():
    return DistributionPotential1D(1, [("Nucleus", 0)], [np.zeros((1, 1))], [np.zeros((1, 1))],
                                   "Delta")


def dense(op):
    return op.toarray() if hasattr(op, "toarray") else np.asarray(op)


# ------------------------------------------------------------------ grids

@pytest.mark.parametrize("kw", [dict(half_width=1.0, points=10), dict(half_width=-1.0, points=11),
                                dict(half_width=1.0, points=3),
                                dict(half_width=1.0, points=11, core_spacing=0.5)])
def test_grid_validation(kw):
    with pytest.raises(ValidationError):
        GridSpec(**kw)


@given(st.floats(0.5, 100.0), st.integers(3, 400).map(lambda k: 2 * k + 1),
       st.floats(0.01, 0.9))
def test_graded_grid_properties(L, n, frac):
    uniform = 2 * L / (n - 1)
    g = GridSpec(L, n, core_spacing=frac * uniform)
    z = g.nodes()
    assert z[0] == -L and z[-1] == L and z[n // 2] == 0.0
    assert np.all(np.diff(z) > 0)
    assert np.allclose(z, -z[::-1], rtol=0, atol=1e-12 * L)
    # core_spacing is the node map's slope at the center, so the central
    # cell is the narrowest one and at least that wide
    assert g.spacing == pytest.approx(np.min(np.diff(z)), rel=1e-12)
    assert g.spacing >= frac * uniform * (1 - 1e-12)


def test_grid_dict_roundtrip():
    g = GridSpec(12.0, 101, pf_cutoff=0.5, core_spacing=0.01)
    assert GridSpec.from_dict(json.loads(json.dumps(g.to_dict()))) == g


# ------------------------------------------------------------------ delta model, one electron

def test_delta_exact_ground_state():
    res = delta_exact_n1(ProblemParams(E2, 1.0, 1, 0))
    assert res.eigenvalues[0] == pytest.approx(-2.0, rel=1e-15)
    norm, _ = integrate.quad(lambda z: 2.0 * math.exp(-4.0 * abs(z)), -40.0, 40.0, points=[0.0])
    assert norm == pytest.approx(1.0, rel=1e-12)
    z = res.nodes
    assert np.allclose(res.eigenvectors[:, 0], math.sqrt(2.0) * np.exp(-2.0 * np.abs(z)))
    p = ProblemParams(1e6, 0.7, 1, 0)
    a = alpha_of_B(1e6).value
    assert delta_exact_n1(p).eigenvalues[0] == pytest.approx(-2 * a * a * 0.49, rel=1e-14)


def test_delta_exact_no_bound_state_without_charge():
    res = delta_exact_n1(ProblemParams(E2, 0.0, 1, 0))
    assert len(res.eigenvalues) == 0
    with pytest.raises(UnsupportedError):
        delta_exact_n1(ProblemParams(E2, 1.0, 2, 0))


def test_delta_grid_converges_with_order_at_least_one():
    p = ProblemParams(E2, 1.0, 1, 0)
    errs = []
    for n in (401, 801, 1601, 3201):
        res = delta_grid_n1(p, GridSpec(15.0, n), n_eigs=1)
        errs.append(abs(res.eigenvalues[0] + 2.0))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(orders) >= 1.0
    assert errs[-1] < 1e-3


def test_free_operator_box_modes():
    L = 1.0
    res = grid_solve_1d(free_potential(), GridSpec(L, 16001), n_eigs=3)
    exact = [(k * math.pi) ** 2 / (8 * L * L) for k in (1, 2, 3)]
    assert np.allclose(res.eigenvalues, exact, rtol=0, atol=1e-6)


def test_scaling_equivalent_form():
    p = ProblemParams(1e8, 1.3, 1, 0)
    scale, reduced = scaling_equivalent_form(p)
    a = alpha_of_B(1e8).value
    assert scale == pytest.approx(a * a)
    assert reduced.delta_coeff[0][0, 0] == pytest.approx(-2.0 * 1.3)
    grid = GridSpec(20.0, 2001)
    red = grid_solve_1d(reduced, grid, n_eigs=1).eigenvalues[0]
    assert red * scale == pytest.approx(-2.0 * a * a * 1.69, rel=2e-3)
    p2 = ProblemParams(1e4, 1.0, 2, 1)
    _, red2 = scaling_equivalent_form(p2)
    assert [c[0, 0] for c in red2.delta_coeff] == [-2.0, -2.0, 2.0]


# ------------------------------------------------------------------ invariants of 1D solves

@pytest.mark.parametrize("model", ["delta", "coulomb", "eff"])
def test_spectrum_invariants(model):
    p = ProblemParams(1e4, 1.0, 1, 0)
    res = solve_n1(model, p, default_grid_n1(p, "Coulomb", points=1001), n_eigs=4)
    S = dense(res.operator)
    assert np.array_equal(S, S.T)
    assert np.all(np.diff(res.eigenvalues) > 0)
    assert np.all(res.residual_norms < 1e-6 * (1 + np.abs(res.eigenvalues)))
    gram = res.eigenvectors.T @ (res.weights[:, None] * res.eigenvectors)
    assert np.allclose(gram, np.eye(4), atol=1e-8)
    # even potentials: eigenfunctions alternate between even and odd
    for i in range(4):
        v = res.eigenvectors[:, i]
        sym = 1 if i % 2 == 0 else -1
        assert np.allclose(v[::-1], sym * v, atol=1e-8 * np.max(np.abs(v)))


def test_unknown_model_and_electron_count():
    p = ProblemParams(1e4, 1.0, 1, 0)
    with pytest.raises(ValidationError):
        solve_n1("hydrogen", p)
    with pytest.raises(UnsupportedError):
        coulomb_solve_n1(ProblemParams(1e4, 1.0, 2, 0))


def test_pf_cutoff_must_cover_two_cells():
    p = ProblemParams(1e4, 1.0, 1, 0)
    g = default_grid_n1(p, "Coulomb", points=1001)
    with pytest.raises(ConfigurationError):
        GridSpec(g.half_width, g.points, pf_cutoff=g.spacing, core_spacing=g.core_spacing)


def test_coulomb_odd_sector_is_field_independent():
    grid = GridSpec(40.0, 2001)
    ref = coulomb_solve_n1(ProblemParams(1e4, 1.0, 1, 0), grid, n_eigs=2, parity="odd")
    for logB in (math.log(1e4) - 5, math.log(1e4) + 5):
        other = coulomb_solve_n1(ProblemParams(math.exp(logB), 1.0, 1, 0), grid, n_eigs=2,
                                 parity="odd")
        assert np.allclose(other.eigenvalues, ref.eigenvalues, rtol=0, atol=1e-10)
    assert ref.eigenvalues[0] == pytest.approx(-0.5, rel=0.02)
    assert ref.eigenvalues[1] == pytest.approx(-0.125, rel=0.02)


def test_coulomb_jump_residual_shrinks_with_cutoff():
    p = ProblemParams(1e4, 1.0, 1, 0)
    res = coulomb_solve_n1(p, default_grid_n1(p, "Coulomb", points=4001), n_eigs=1)
    ext = res.meta["extrapolation"]
    jumps = ext["jump_residual"]
    assert len(jumps) == 3 and jumps[0] > jumps[1] > jumps[2]
    assert ext["eps"] == sorted(ext["eps"], reverse=True)
    # the eps sequence approaches the exact-pairing eigenvalue
    seq = [e[0] for e in ext["eigenvalues"]]
    gaps = [abs(s - res.eigenvalues[0]) for s in seq]
    assert gaps[0] > gaps[1] > gaps[2]


def test_eff_close_to_delta_on_scale_alpha():
    ratios = []
    for B in (1e4, 1e6, 1e8, 1e10):
        p = ProblemParams(B, 1.0, 1, 0)
        a = alpha_of_B(B).value
        res = eff_solve_n1(p, default_grid_n1(p, "Eff", points=2001), n_eigs=1)
        ratios.append(abs(res.eigenvalues[0] - res.meta["delta_energy"]) / a)
        assert res.meta["delta_trial_energy"] >= res.eigenvalues[0] - 1e-9
    assert max(ratios) / min(ratios) < 3.0



def test_ground_projectors_approach_at_rate_one_over_alpha():
    scaled = []
    for B in (1e4, 1e6, 1e8, 1e10):
        p = ProblemParams(B, 1.0, 1, 0)
        g = default_grid_n1(p, "Coulomb")
        u = eff_solve_n1(p, g, n_eigs=1).eigenvectors[:, 0]
        res = delta_grid_n1(p, g, n_eigs=1)
        v, w = res.eigenvectors[:, 0], res.weights
        overlap = abs(np.sum(w * u * v)) / math.sqrt(np.sum(w * u * u) * np.sum(w * v * v))
        # rank-one projectors: the norm of the difference is the sine of the angle
        scaled.append(alpha_of_B(B).value * math.sqrt(max(0.0, 1.0 - overlap ** 2)))
    assert max(scaled) / min(scaled) < 1.5
    assert all(0.5 < x < 1.0 for x in scaled)


# ------------------------------------------------------------------ resolvents

def small_pair(B=1e4):
    p = ProblemParams(B, 1.0, 1, 0)
    g = default_grid_n1(p, "Coulomb", points=301)
    return p, solve_n1("eff", p, g), solve_n1("delta", p, g)


def test_resolvent_distance_matches_dense_oracle():
    p, eff, de = small_pair()
    a = alpha_of_B(p.B).value
    xi = float(de.eigenvalues[0]) - 0.125 * a * a
    Sa, Sb = dense(eff.operator), dense(de.operator)
    n = Sa.shape[0]
    diff = np.linalg.inv(Sa - xi * np.eye(n)) - np.linalg.inv(Sb - xi * np.eye(n))
    assert resolvent_distance(eff, de, xi) == pytest.approx(np.linalg.norm(diff, 2), rel=1e-8)
    lam = np.linalg.eigvalsh(Sb)
    assert spectral_distance(de, xi) == pytest.approx(np.min(np.abs(lam - xi)), rel=1e-9)


def test_resolvent_distance_trivial_and_guard():
    p, eff, de = small_pair()
    assert resolvent_distance(de, de, -1.0) == 0.0
    with pytest.raises(IllConditionedError):
        resolvent_distance(eff, de, float(de.eigenvalues[0]))


def test_resolvent_distance_needs_same_grid():
    p = ProblemParams(1e4, 1.0, 1, 0)
    a = solve_n1("delta", p, GridSpec(10.0, 301))
    b = solve_n1("delta", p, GridSpec(10.0, 303))
    with pytest.raises(ValidationError):
        resolvent_distance(a, b, -100.0)


def test_compare_resolvents_record():
    r = compare_resolvents(ProblemParams(1e4, 1.0, 1, 0), points=1001)
    a = alpha_of_B(1e4).value
    assert r["alpha"] == pytest.approx(a)
    assert r["d_xi"] == pytest.approx(0.125 * a * a, rel=1e-6)
    assert r["resolvent_distance"] > 0
    assert set(r) >= {"B", "alpha", "xi", "d_xi", "resolvent_distance", "E0_a", "E0_b"}


# ------------------------------------------------------------------ serialization

def test_spectrum_json_and_vectors(tmp_path):
    p = ProblemParams(1e4, 1.0, 1, 0)
    res = solve_n1("coulomb", p, default_grid_n1(p, "Coulomb", points=1001), n_eigs=2)
    path = tmp_path / "levels.json"
    res.write_json(str(path))
    data = json.loads(path.read_text())
    assert data["model"] == "Coulomb"
    assert data["params"] == p.to_dict()
    assert "extrapolation" in data["meta"]
    assert len(data["eigenvalues"]) == len(data["residuals"]) == 2
    vpath = tmp_path / "vec.bin"
    res.write_vectors(str(vpath))
    header = vpath.read_bytes().split(b"\n", 1)[0].decode()
    assert header == f"LEFF-VEC v1 {res.eigenvectors.shape[0]} 2"
    assert np.array_equal(read_vectors(str(vpath)), res.eigenvectors)


# ------------------------------------------------------------------ two electrons

SMALL = GridSpec(15.0, 51, core_spacing=0.02)
COARSE = 1e-2


def test_two_electron_binding_and_threshold():
    res = delta_solve_n2(1.0)
    assert res.eigenvalues[0] < -2.0
    assert res.meta["binds"]
    weak = delta_solve_n2(0.2)
    assert not weak.meta["binds"]
    assert weak.eigenvalues[0] == pytest.approx(-2 * 0.04, rel=2e-2)


def test_repulsion_raises_ground_energy():
    with_rep = delta_solve_n2(1.0, SMALL, repulsion=2.0, resolution=COARSE).eigenvalues[0]
    without = delta_solve_n2(1.0, SMALL, repulsion=0.0, resolution=COARSE).eigenvalues[0]
    assert with_rep > without
    # without repulsion the problem separates: E = 2 E1
    assert without == pytest.approx(2 * delta_solve_n2(1.0, SMALL, resolution=COARSE).meta["threshold"], rel=1e-9)


def test_antisymmetric_levels_match_dense_sector_solve():
    fem = _fem(SMALL)
    n = len(fem.z)
    S = _n2_operator(fem, 1.0, 2.0)
    P = _sector_basis(n, -1, None)
    dense_levels = np.linalg.eigvalsh((P.T @ S @ P).toarray())[:3]
    res = delta_solve_n2(1.0, SMALL, n_eigs=3, sector="antisymmetric", resolution=COARSE)
    assert np.allclose(res.eigenvalues, dense_levels, rtol=1e-10, atol=1e-12)
    full = np.linalg.eigvalsh(S.toarray())
    assert res.eigenvalues[0] > full[0]
    # antisymmetric eigenvectors vanish on the diagonal z1 = z2
    v = res.eigenvectors[:, 0].reshape(n, n)
    assert np.max(np.abs(np.diag(v))) < 1e-12 * np.max(np.abs(v))
    assert np.allclose(v, -v.T, atol=1e-12 * np.max(np.abs(v)))


def test_symmetric_sector_matches_full_ground_state():
    fem = _fem(SMALL)
    full = np.linalg.eigvalsh(_n2_operator(fem, 1.0, 2.0).toarray())[0]
    assert delta_solve_n2(1.0, SMALL, resolution=COARSE).eigenvalues[0] == pytest.approx(full, rel=1e-9)
    assert delta_solve_n2(1.0, SMALL, sector="full", resolution=COARSE).eigenvalues[0] \
        == pytest.approx(full, rel=1e-9)


@settings(max_examples=10)
@given(st.floats(0.5, 2.0))
def test_two_electron_monotone_in_repulsion(Z):
    grid = GridSpec(15.0, 51, core_spacing=0.02 / Z)
    e = [delta_solve_n2(Z, grid, repulsion=r, resolution=COARSE).eigenvalues[0]
         for r in (0.0, 1.0, 2.0)]
    assert e[0] <= e[1] <= e[2]


def test_two_electron_guards():
    with pytest.raises(ValidationError):
        delta_solve_n2(0.0)
    with pytest.raises(ValidationError):
        delta_solve_n2(1.0, SMALL, sector="bosonic", resolution=COARSE)
    with pytest.raises(AccuracyError):
        delta_solve_n2(1.0, SMALL)
    with pytest.raises(AccuracyError):
        delta_solve_n2(1.0, GridSpec(15.0, 51), resolution=COARSE)
