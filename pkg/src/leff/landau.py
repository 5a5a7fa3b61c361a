"""Lowest Landau band: modes, the partition set, orbits and fermionization.

Permutations are tuples ``p`` of 0-based images, ``p[i] = p(i)``, composed
as ``(p q)(i) = p(q(i))``.  Two actions of a permutation ``s`` on
``N``-tuples are used:

* on coordinates, ``(s . z)_i = z_{s(i)}``;
* on mode labels, ``(s * m)_i = m_{s^{-1}(i)}``, which is a left action,
  so ``s G`` (``G`` the stabilizer of ``m``) is a left coset that maps to
  a single label.  The two are linked by
  ``X_m(s . x, s . y) = X_{s * m}(x, y)``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import SymmetryError, UnsupportedError, ValidationError

Perm = tuple[int, ...]
PartitionTuple = tuple[int, ...]

MAX_GROUP_N = 8
FREE = "Free"
NONTRIVIAL = "NonTrivial"


@dataclass(frozen=True)
class ProblemParams:
    """Physical configuration: field ``B``, charge ``Z``, electrons ``N``, momentum ``M``."""

    B: float = 1.0
    Z: float = 1.0
    N: int = 1
    M: int = 0

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 0):
            raise ValidationError(f"M must be a nonnegative integer, got {self.M!r}")
        if not (math.isfinite(self.B) and self.B > 0):
            raise ValidationError(f"B must be positive, got {self.B!r}")
        if not (math.isfinite(self.Z) and self.Z >= 0):
            raise ValidationError(f"Z must be nonnegative, got {self.Z!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "Z", float(self.Z))

    def to_dict(self) -> dict:
        return {"B": self.B, "Z": self.Z, "N": self.N, "M": self.M}


# ------------------------------------------------------------ partitions

def enumerate_sigma(N: int, M: int) -> list[PartitionTuple]:
    """All ``N``-tuples of nonnegative integers with sum ``M``, lexicographic."""
    if N < 1 or M < 0:
        raise ValidationError("need N >= 1 and M >= 0")

    def rec(n: int, rest: int):
        if n == 1:
            yield (rest,)
            return
        for first in range(rest + 1):
            for tail in rec(n - 1, rest - first):
                yield (first,) + tail

    return list(rec(N, M))


def sigma_count(N: int, M: int) -> int:
    return math.comb(M + N - 1, N - 1)


def canonical(m: Sequence[int]) -> PartitionTuple:
    """Orbit representative: the descending sort."""
    return tuple(sorted(m, reverse=True))


def stabilizer_order(m: Sequence[int]) -> int:
    return math.prod(math.factorial(k) for k in Counter(m).values())


@dataclass(frozen=True)
class OrbitDecomposition:
    representatives: list[PartitionTuple]
    orbit_sizes: list[int]
    stabilizer_orders: list[int]
    class_flags: list[str]

    def to_json(self) -> dict:
        return {
            "representatives": [list(r) for r in self.representatives],
            "orbit_sizes": list(self.orbit_sizes),
            "stabilizer_orders": list(self.stabilizer_orders),
            "class_flags": list(self.class_flags),
        }

    @classmethod
    def from_json(cls, d: dict) -> "OrbitDecomposition":
        return cls([tuple(r) for r in d["representatives"]], list(d["orbit_sizes"]),
                   list(d["stabilizer_orders"]), list(d["class_flags"]))

    @property
    def free_representatives(self) -> list[PartitionTuple]:
        return [r for r, f in zip(self.representatives, self.class_flags) if f == FREE]


def orbit_decompose(sigma: Sequence[Sequence[int]]) -> OrbitDecomposition:
    """Group tuples into orbits under coordinate permutation.

    Representatives appear in order of first occurrence in ``sigma``.
    """
    counts: dict[PartitionTuple, int] = {}
    for m in sigma:
        rep = canonical(m)
        counts[rep] = counts.get(rep, 0) + 1
    reps = list(counts)
    stabs = [stabilizer_order(r) for r in reps]
    flags = [FREE if s == 1 else NONTRIVIAL for s in stabs]
    return OrbitDecomposition(reps, [counts[r] for r in reps], stabs, flags)


def min_M_with_free_orbit(N: int) -> int:
    """Smallest total momentum admitting a label with distinct entries."""
    if N < 1:
        raise ValidationError("N must be positive")
    return N * (N - 1) // 2


# ------------------------------------------------------------ permutations

def compose(p: Perm, q: Perm) -> Perm:
    return tuple(p[q[i]] for i in range(len(q)))


def inverse(p: Perm) -> Perm:
    inv = [0] * len(p)
    for i, pi in enumerate(p):
        inv[pi] = i
    return tuple(inv)


def sign(p: Perm) -> int:
    seen = [False] * len(p)
    s = 1
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            s = -s
    return s


def act_on_label(s: Perm, m: Sequence[int]) -> PartitionTuple:
    """``(s * m)_i = m_{s^{-1}(i)}``."""
    out = [0] * len(m)
    for i, mi in enumerate(m):
        out[s[i]] = mi
    return tuple(out)


def act_on_coords(s: Perm, z):
    """``(s . z)_i = z_{s(i)}``; works on sequences and on arrays along axis 0."""
    if isinstance(z, np.ndarray):
        return z[list(s)]
    return tuple(z[s[i]] for i in range(len(s)))


@dataclass(frozen=True)
class CosetData:
    rep: PartitionTuple
    sigmas: list[Perm]
    labels: list[PartitionTuple]
    index: dict[PartitionTuple, int] = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.sigmas)


def coset_representatives(rep: Sequence[int]) -> CosetData:
    """Left cosets ``s G`` of the stabilizer of ``rep``.

    Cosets are ordered by their label ``s * rep`` in descending
    lexicographic order, so the first one is ``G`` itself with ``s = e``;
    within a coset the lexicographically smallest permutation is used.
    """
    rep = tuple(int(v) for v in rep)
    if canonical(rep) != rep:
        raise ValidationError(f"representative {rep} is not sorted descending")
    N = len(rep)
    if N > MAX_GROUP_N:
        raise UnsupportedError(f"group operations limited to N <= {MAX_GROUP_N}")
    best: dict[PartitionTuple, Perm] = {}
    for p in itertools.permutations(range(N)):
        lab = act_on_label(p, rep)
        if lab not in best:
            best[lab] = p  # permutations() yields in lexicographic order
    labels = sorted(best, reverse=True)
    sigmas = [best[lab] for lab in labels]
    return CosetData(rep, sigmas, labels, {lab: j for j, lab in enumerate(labels)})


def rho_homomorphism(rep: Sequence[int], tau: Perm) -> Perm:
    """Permutation of cosets induced by left multiplication with ``tau``.

    ``rho(tau)(i) = j`` iff ``tau s_i`` lies in ``s_j G``.
    """
    data = coset_representatives(rep)
    tau = tuple(int(t) for t in tau)
    if sorted(tau) != list(range(len(data.rep))):
        raise ValidationError(f"{tau} is not a permutation of {len(data.rep)} symbols")
    return tuple(data.index[act_on_label(tau, lab)] for lab in data.labels)


# ------------------------------------------------------------ Landau modes

@dataclass(frozen=True)
class LandauMode:
    m: int
    B: float = 1.0

    def __post_init__(self):
        if self.m < 0 or not self.B > 0:
            raise ValidationError("LandauMode needs m >= 0 and B > 0")


def chi_norm(m: int, B: float) -> float:
    return math.sqrt(B ** (m + 1) / (2 * math.pi * 2.0 ** m * math.factorial(m)))


def chi_value(mode: LandauMode, x, y):
    """Lowest-Landau mode ``chi_m^B`` at ``(x, y)`` (scalars or arrays)."""
    zeta = np.asarray(x) + 1j * np.asarray(y)
    r2 = np.abs(zeta) ** 2
    val = chi_norm(mode.m, mode.B) * zeta ** mode.m * np.exp(-mode.B * r2 / 4.0)
    return complex(val) if np.ndim(val) == 0 else val


def product_mode(m: Sequence[int], B: float, x: Sequence, y: Sequence):
    """``X_m(x, y) = prod_j chi_{m_j}(x_j, y_j)``."""
    out = 1.0
    for mj, xj, yj in zip(m, x, y):
        out = out * chi_value(LandauMode(int(mj), B), xj, yj)
    return out


# ------------------------------------------------------------ fermionization

def _is_stabilizer_antisymmetric(a1: Callable, data: CosetData, samples) -> bool:
    N = len(data.rep)
    gens = [p for p in itertools.permutations(range(N))
            if act_on_label(p, data.rep) == data.rep and p != tuple(range(N))]
    for z in samples:
        v = a1(np.asarray(z, dtype=float))
        scale = max(abs(v), 1.0)
        for g in gens:
            w = a1(act_on_coords(g, np.asarray(z, dtype=float)))
            if abs(w - sign(g) * v) > 1e-9 * scale:
                return False
    return True


def antisymmetric_reconstruct(rep: Sequence[int], a1: Callable,
                              samples: int = 16, seed: int = 0) -> list[Callable]:
    """Coefficient functions ``a_1..a_K`` of an antisymmetric state.

    The state is ``psi = sum_j a_j(z) X_{s_j * rep}(x, y)`` with
    ``a_j(z) = sign(s_j) a_1(s_j . z)``.  ``a_1`` must be odd under the
    stabilizer of ``rep`` (checked on random sample points); for two
    electrons with equal labels this is full antisymmetry.
    """
    data = coset_representatives(rep)
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(samples, len(data.rep)))
    if not _is_stabilizer_antisymmetric(a1, data, pts):
        raise SymmetryError(
            f"a1 must be antisymmetric under the stabilizer of {tuple(rep)}")

    def make(s: Perm):
        sg = sign(s)
        return lambda z: sg * a1(act_on_coords(s, np.asarray(z, dtype=float)))

    return [make(s) for s in data.sigmas]


def u_map_scale(rep: Sequence[int]) -> float:
    """Factor ``sqrt(K)`` of the isometry ``psi -> sqrt(K) a_1``."""
    return math.sqrt(coset_representatives(rep).K)


def assemble_state(rep: Sequence[int], coeffs: Sequence[Callable], B: float = 1.0):
    """Return ``psi(x, y, z)`` from coefficient functions on the orbit of ``rep``."""
    data = coset_representatives(rep)

    def psi(x, y, z):
        return sum(a(z) * product_mode(lab, B, x, y) for a, lab in zip(coeffs, data.labels))

    return psi
