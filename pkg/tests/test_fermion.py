import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma

from leff.errors import UnsupportedError, ValidationError
from leff.fermion import (
    ANTISYMMETRIC,
    UNRESTRICTED,
    FermionDecomposition,
    averaged_Ce,
    averaged_Cn,
    cluster_size,
    decompose_U_M,
    fermionic_delta_spectrum,
    ground_energy,
)
from leff.landau import ProblemParams, enumerate_sigma
from leff.potentials import basis
from leff.solvers import GridSpec, delta_exact_n1
from leff.specialfn import alpha_of_B

SMALL_N2 = GridSpec(120.0, 101, core_spacing=0.02)


@settings(max_examples=20)
@given(st.integers(1, 3), st.integers(0, 4))
def test_averaged_Cn_is_diagonal_digamma_mean(N, M):
    p = ProblemParams(1e4, 1.0, N, M)
    C = averaged_Cn(p)
    labels = basis(p)
    expect = [math.log(2.0) - float(np.mean(digamma(np.array(m) + 1.0))) for m in labels]
    assert np.allclose(np.diag(C), expect, rtol=0, atol=1e-10)
    assert np.allclose(C - np.diag(np.diag(C)), 0.0, atol=1e-10)


@pytest.mark.parametrize("N,M", [(2, 2), (3, 2), (3, 3)])
def test_averaged_constants_commute_with_relabeling(N, M):
    p = ProblemParams(1e4, 1.0, N, M)
    labels = basis(p)
    index = {m: i for i, m in enumerate(labels)}
    for C in (averaged_Cn(p), averaged_Ce(p)):
        assert np.allclose(C, C.T, atol=1e-12)
        for perm in ((1, 0) + tuple(range(2, N)), tuple(range(1, N)) + (0,)):
            P = np.zeros_like(C)
            for i, m in enumerate(labels):
                P[index[tuple(m[k] for k in perm)], i] = 1.0
            assert np.allclose(P @ C @ P.T, C, atol=1e-10)


def test_averaged_Ce_requires_a_pair():
    with pytest.raises(ValidationError):
        averaged_Ce(ProblemParams(1e4, 1.0, 1, 0))


def test_averaged_Ce_equals_single_pair_for_two_electrons():
    from leff.potentials import constant_Ce
    p = ProblemParams(1e4, 1.0, 2, 2)
    assert np.array_equal(averaged_Ce(p), constant_Ce(p, 0, 1))


def test_decomposition_two_electrons_momentum_two():
    dec = decompose_U_M(ProblemParams(1e4, 1.0, 2, 2))
    got = {b.representative: (b.space, set(b.orbit)) for b in dec.blocks}
    assert got == {(2, 0): (UNRESTRICTED, {(0, 2), (2, 0)}),
                   (1, 1): (ANTISYMMETRIC, {(1, 1)})}
    assert np.array_equal(dec.mixing["delta"], np.eye(2, dtype=bool))
    # C^e couples (2,0) and (1,1) through the element 3/(4 sqrt 2)
    assert dec.mixing["coulomb"].all()


def test_decomposition_small_cases():
    one = decompose_U_M(ProblemParams(1e4, 1.0, 1, 3))
    assert [(b.representative, b.space) for b in one.blocks] == [((3,), UNRESTRICTED)]
    pair = decompose_U_M(ProblemParams(1e4, 1.0, 2, 1))
    assert [(b.representative, b.space) for b in pair.blocks] == [((1, 0), UNRESTRICTED)]
    zero = decompose_U_M(ProblemParams(1e4, 1.0, 2, 0))
    assert [(b.representative, b.space) for b in zero.blocks] == [((0, 0), ANTISYMMETRIC)]


@settings(max_examples=20)
@given(st.integers(1, 4), st.integers(0, 5))
def test_blocks_partition_the_label_set(N, M):
    dec = decompose_U_M(ProblemParams(1e4, 1.0, N, M))
    seen = [m for b in dec.blocks for m in b.orbit]
    assert sorted(seen) == sorted(enumerate_sigma(N, M))
    for b in dec.blocks:
        assert (b.space == UNRESTRICTED) == (len(set(b.representative)) == N)
        assert all(sorted(m) == sorted(b.representative) for m in b.orbit)
        assert len(b.orbit) == math.factorial(N) // math.prod(
            math.factorial(b.representative.count(v)) for v in set(b.representative))
    nb = len(dec.blocks)
    assert dec.mixing["delta"].shape == (nb, nb)
    assert np.array_equal(dec.mixing["coulomb"], dec.mixing["coulomb"].T)


def test_decomposition_json_roundtrip():
    dec = decompose_U_M(ProblemParams(1e4, 1.0, 3, 3))
    back = FermionDecomposition.from_json(json.loads(json.dumps(dec.to_json())))
    assert back.params == dec.params and back.blocks == dec.blocks
    for k in dec.mixing:
        assert np.array_equal(back.mixing[k], dec.mixing[k])


def test_cluster_size():
    assert cluster_size(ProblemParams(1e4, 1.0, 1, 0)) == 1
    assert cluster_size(ProblemParams(1e4, 1.0, 2, 0)) == 0
    assert cluster_size(ProblemParams(1e4, 1.0, 2, 2)) == 1
    # momentum 6 over three electrons: distinct triples {0,1,5}, {0,2,4}, {1,2,3}
    assert cluster_size(ProblemParams(1e4, 1.0, 3, 6)) == 3


def test_one_electron_spectrum_is_closed_form():
    p = ProblemParams(1e6, 0.8, 1, 2)
    levels = fermionic_delta_spectrum(p)
    assert list(levels) == [(2,)]
    a = alpha_of_B(1e6).value
    assert levels[(2,)].eigenvalues[0] == pytest.approx(-2 * a * a * 0.64, rel=1e-14)
    assert np.array_equal(levels[(2,)].eigenvalues, delta_exact_n1(p).eigenvalues)


def test_two_electron_blocks():
    p = ProblemParams(1e4, 1.0, 2, 2)
    levels = fermionic_delta_spectrum(p, SMALL_N2, n_eigs=2)
    a2 = alpha_of_B(1e4).value ** 2
    free, anti = levels[(2, 0)], levels[(1, 1)]
    assert free.meta["space"] == UNRESTRICTED and anti.meta["space"] == ANTISYMMETRIC
    # the swap-even ground state binds below the one-electron threshold
    assert free.eigenvalues[0] < free.meta["threshold"] < 0
    # the swap-odd sector does not: its bottom is the threshold itself
    assert anti.eigenvalues[0] >= anti.meta["threshold"] - 1e-6 * a2
    assert ground_energy(levels) == free.eigenvalues[0]
    assert free.meta["threshold"] == pytest.approx(-2 * a2, rel=2e-2)


def test_identical_blocks_share_levels():
    g = SMALL_N2
    s2 = fermionic_delta_spectrum(ProblemParams(1e4, 1.0, 2, 1), g)
    s4 = fermionic_delta_spectrum(ProblemParams(1e4, 1.0, 2, 4), g)
    free = [r for k, r in s4.items() if len(set(k)) == 2]
    assert len(free) == 2
    # one solve per kind of block within a call
    assert np.array_equal(free[0].eigenvalues, free[1].eigenvalues)
    # separate calls agree up to the eigensolver tolerance
    for r in free:
        assert np.allclose(r.eigenvalues, s2[(1, 0)].eigenvalues, rtol=1e-10, atol=0)
    s0 = fermionic_delta_spectrum(ProblemParams(1e4, 1.0, 2, 0), g)
    assert np.allclose(s4[(2, 2)].eigenvalues, s0[(0, 0)].eigenvalues, rtol=1e-10, atol=0)


def test_two_electron_levels_scale_with_alpha_squared():
    lo = fermionic_delta_spectrum(ProblemParams(1e4, 1.0, 2, 1), SMALL_N2)[(1, 0)]
    hi = fermionic_delta_spectrum(ProblemParams(1e8, 1.0, 2, 1), SMALL_N2)[(1, 0)]
    ratio = (alpha_of_B(1e8).value / alpha_of_B(1e4).value) ** 2
    assert hi.eigenvalues[0] == pytest.approx(ratio * lo.eigenvalues[0], rel=1e-12)


def test_more_than_two_electrons_unsupported():
    with pytest.raises(UnsupportedError):
        fermionic_delta_spectrum(ProblemParams(1e4, 1.0, 3, 3))
