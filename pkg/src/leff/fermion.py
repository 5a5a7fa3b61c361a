"""Fermionic effective models: averaged constants, orbit blocks, sector mixing."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import UnsupportedError, ValidationError
from .landau import FREE, ProblemParams, canonical, enumerate_sigma, orbit_decompose
from .potentials import constant_Ce, constant_Cn
from .solvers import GridSpec, SpectrumResult, delta_exact_n1, delta_solve_n2
from .specialfn import alpha_of_B

UNRESTRICTED = "Unrestricted"
ANTISYMMETRIC = "Antisymmetric"
MIXING_THRESHOLD = 1e-10


def averaged_Cn(params: ProblemParams) -> np.ndarray:
    """``(1/N) sum_j C^n_j`` on the momentum-``M`` basis."""
    return sum(constant_Cn(params, j) for j in range(params.N)) / params.N


def averaged_Ce(params: ProblemParams) -> np.ndarray:
    """Mean of ``C^e_jk`` over the ``N(N-1)/2`` pairs."""
    if params.N < 2:
        raise ValidationError("the pair average is an empty sum for N = 1")
    pairs = list(combinations(range(params.N), 2))
    return sum(constant_Ce(params, j, k) for j, k in pairs) / len(pairs)


@dataclass(frozen=True)
class FermionBlock:
    representative: tuple
    space: str
    orbit: tuple

    def to_json(self) -> dict:
        return {"representative": list(self.representative), "space": self.space,
                "orbit": [list(m) for m in self.orbit]}


@dataclass(frozen=True)
class FermionDecomposition:
    """Orbit blocks and, per model, which pairs of blocks an operator couples."""

    params: ProblemParams
    blocks: list
    mixing: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"params": self.params.to_dict(),
                "blocks": [b.to_json() for b in self.blocks],
                "mixing": {k: np.asarray(v).tolist() for k, v in self.mixing.items()}}

    @classmethod
    def from_json(cls, d: dict) -> "FermionDecomposition":
        blocks = [FermionBlock(tuple(b["representative"]), b["space"],
                               tuple(tuple(m) for m in b["orbit"])) for b in d["blocks"]]
        mixing = {k: np.array(v, dtype=bool) for k, v in d["mixing"].items()}
        return cls(ProblemParams(**d["params"]), blocks, mixing)


def decompose_U_M(params: ProblemParams, threshold: float = MIXING_THRESHOLD) -> FermionDecomposition:
    """Blocks of the fermionic effective space, one per permutation orbit.

    Labels with distinct entries give an unrestricted copy of ``L^2(R^N)``;
    repeated entries force antisymmetry in ``z``.  The delta model is
    block diagonal; for the Coulomb model two blocks are coupled when the
    averaged pair constant has an entry above ``threshold`` between them.
    """
    sigma = enumerate_sigma(params.N, params.M)
    orbits = orbit_decompose(sigma)
    members: dict[tuple, list] = {r: [] for r in orbits.representatives}
    for m in sigma:
        members[canonical(m)].append(m)
    blocks = [FermionBlock(r, UNRESTRICTED if f == FREE else ANTISYMMETRIC, tuple(members[r]))
              for r, f in zip(orbits.representatives, orbits.class_flags)]
    nb = len(blocks)
    delta = np.eye(nb, dtype=bool)
    coulomb = np.eye(nb, dtype=bool)
    if params.N >= 2 and nb > 1:
        ce = averaged_Ce(params)
        index = {m: i for i, m in enumerate(sigma)}
        for a in range(nb):
            ia = [index[m] for m in blocks[a].orbit]
            for b in range(a + 1, nb):
                ib = [index[m] for m in blocks[b].orbit]
                coupled = bool(np.max(np.abs(ce[np.ix_(ia, ib)])) > threshold)
                coulomb[a, b] = coulomb[b, a] = coupled
    return FermionDecomposition(params, blocks, {"delta": delta, "coulomb": coulomb})


def _scaled(res: SpectrumResult, params: ProblemParams, block: FermionBlock) -> SpectrumResult:
    a2 = alpha_of_B(params.B).value ** 2
    meta = dict(res.meta)
    meta.update({"scale": a2, "block": list(block.representative), "space": block.space})
    for key in ("threshold", "exact_threshold", "binding_gap"):
        if key in meta:
            meta[key] = a2 * meta[key]
    return SpectrumResult(a2 * res.eigenvalues, res.eigenvectors, a2 * res.residual_norms,
                          "Delta", params, res.grid, res.nodes, res.weights, meta)


def fermionic_delta_spectrum(params: ProblemParams, grid: GridSpec | None = None,
                             n_eigs: int = 1) -> dict:
    """Delta-model levels per fermionic block, keyed by orbit representative.

    Unrestricted blocks carry the two-electron spectrum without symmetry
    constraint, whose lowest levels sit in the swap-even sector;
    antisymmetric blocks carry the swap-odd sector.  Every block of one
    kind is the same operator, so it is solved once and shared.
    """
    dec = decompose_U_M(params)
    if params.N == 1:
        block = dec.blocks[0]
        return {block.representative: _scaled_exact(params, grid, block)}
    if params.N > 2:
        raise UnsupportedError("the grid solver handles at most two electrons")
    solved: dict[str, SpectrumResult] = {}
    out = {}
    for block in dec.blocks:
        if block.space not in solved:
            sector = "symmetric" if block.space == UNRESTRICTED else "antisymmetric"
            solved[block.space] = _scaled(
                delta_solve_n2(params.Z, grid=grid, n_eigs=n_eigs, sector=sector),
                params, block)
        res = solved[block.space]
        meta = dict(res.meta, block=list(block.representative))
        out[block.representative] = SpectrumResult(
            res.eigenvalues, res.eigenvectors, res.residual_norms, res.model, res.params,
            res.grid, res.nodes, res.weights, meta)
    return out


def _scaled_exact(params: ProblemParams, grid: GridSpec | None, block: FermionBlock) -> SpectrumResult:
    res = delta_exact_n1(params, grid)
    meta = dict(res.meta, block=list(block.representative), space=block.space)
    return SpectrumResult(res.eigenvalues, res.eigenvectors, res.residual_norms, res.model,
                          res.params, res.grid, res.nodes, res.weights, meta)


def ground_energy(spectra: dict) -> float:
    """Lowest level over all blocks."""
    return min(float(r.eigenvalues[0]) for r in spectra.values() if len(r.eigenvalues))


def cluster_size(params: ProblemParams) -> int:
    """Number of unrestricted blocks, i.e. copies of the lowest delta-model level."""
    return sum(b.space == UNRESTRICTED for b in decompose_U_M(params).blocks)


__all__ = ["averaged_Cn", "averaged_Ce", "FermionBlock", "FermionDecomposition",
           "decompose_U_M", "fermionic_delta_spectrum", "ground_energy", "cluster_size",
           "UNRESTRICTED", "ANTISYMMETRIC", "MIXING_THRESHOLD"]
