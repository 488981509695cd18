"""k-unary reaction network specifications.

A network on species S_1..S_n has exactly one complex k_i S_i per species
plus the source/sink complex, which always carries index 0.  Reaction rates
are stored as a dense ``(n+1, n+1)`` matrix ``kappa`` with zero diagonal;
``kappa[i, j] > 0`` means the reaction ``k_i S_i -> k_j S_j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadArity, FactorialOverflow, GuardExceeded, InvalidSpec, NegativeRate, NonIrreducible

__all__ = [
    "CrnSpec",
    "MAX_SPECIES",
    "MAX_ARITY",
    "validate_spec",
    "falling_factorial",
    "kappa_plus",
    "distance_from_source",
    "lattice_class",
    "is_irreducible",
    "figure1_spec",
]

MAX_SPECIES = 64
MAX_ARITY = 12
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class CrnSpec:
    """A validated k-unary network.  Immutable; arrays are read-only."""

    n: int
    k: np.ndarray
    kappa: np.ndarray
    species: tuple[str, ...] = field(default=())

    @property
    def slow(self) -> np.ndarray:
        """Species indices (1-based) with arity one."""
        return np.flatnonzero(self.k == 1) + 1

    @property
    def fast(self) -> np.ndarray:
        """Species indices (1-based) with arity at least two."""
        return np.flatnonzero(self.k >= 2) + 1

    @property
    def reactions(self) -> list[tuple[int, int]]:
        """All (i, j) pairs with a positive rate, in row-major order."""
        ii, jj = np.nonzero(self.kappa > 0)
        return [(int(i), int(j)) for i, j in zip(ii, jj)]

    def out_rates(self) -> np.ndarray:
        """Vector of kappa_i^+ for i = 1..n."""
        return self.kappa[1:].sum(axis=1)

    def with_rates(self, kappa: np.ndarray) -> "CrnSpec":
        return validate_spec(kappa, self.k, species=self.species)


def _strongly_connected_from_zero(adj: np.ndarray) -> bool:
    m = adj.shape[0]
    for a in (adj, adj.T):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(a[u]):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        if not seen.all():
            return False
    return True


def is_irreducible(kappa: np.ndarray) -> bool:
    """True if the graph {(i, j): kappa_ij > 0} is strongly connected."""
    kappa = np.asarray(kappa, dtype=float)
    return _strongly_connected_from_zero(kappa > 0)


def validate_spec(
    kappa,
    k: Sequence[int],
    species: Sequence[str] | None = None,
    *,
    max_species: int = MAX_SPECIES,
    max_arity: int = MAX_ARITY,
) -> CrnSpec:
    """Check a raw rate matrix and arity vector and return a :class:`CrnSpec`.

    Raises
    ------
    NegativeRate, BadArity, NonIrreducible, GuardExceeded, InvalidSpec
    """
    kappa = np.array(kappa, dtype=np.float64)
    k_arr = np.asarray(k)
    if kappa.ndim != 2 or kappa.shape[0] != kappa.shape[1]:
        raise InvalidSpec(f"rate matrix must be square, got shape {kappa.shape}")
    n = kappa.shape[0] - 1
    if n < 1:
        raise InvalidSpec("network needs at least one species")
    if k_arr.shape != (n,):
        raise InvalidSpec(f"arity vector has length {k_arr.size}, expected {n}")
    if not np.all(np.isfinite(kappa)):
        raise InvalidSpec("rates must be finite")
    if np.any(kappa < 0):
        i, j = np.argwhere(kappa < 0)[0]
        raise NegativeRate(f"kappa[{i}][{j}] = {kappa[i, j]!r} is negative")
    if np.any(np.diag(kappa) != 0):
        raise InvalidSpec("rate matrix must have a zero diagonal")
    if not np.all(np.equal(np.mod(k_arr, 1), 0)):
        raise BadArity("arities must be integers")
    k_arr = k_arr.astype(np.int64)
    if np.any(k_arr < 1):
        raise BadArity(f"arities must be >= 1, got {k_arr.tolist()}")
    if n > max_species:
        raise GuardExceeded(f"{n} species exceeds the guard of {max_species}")
    if np.any(k_arr > max_arity):
        raise GuardExceeded(f"arity {int(k_arr.max())} exceeds the guard of {max_arity}")
    if not _strongly_connected_from_zero(kappa > 0):
        raise NonIrreducible("reaction graph on {0..n} is not strongly connected")

    if species is None:
        species = tuple(f"S{i}" for i in range(1, n + 1))
    elif len(species) != n:
        raise InvalidSpec(f"{len(species)} species names for {n} species")
    kappa.setflags(write=False)
    k_arr.setflags(write=False)
    return CrnSpec(n=n, k=k_arr, kappa=kappa, species=tuple(species))


def falling_factorial(y: int, k: int) -> int:
    """y (y-1) ... (y-k+1), or 0 when y < k.

    Raises :class:`FactorialOverflow` instead of returning a value above the
    signed 64-bit range.
    """
    y, k = int(y), int(k)
    if y < 0 or k < 1:
        raise ValueError(f"need y >= 0 and k >= 1, got y={y}, k={k}")
    if y < k:
        return 0
    out = 1
    for m in range(y - k + 1, y + 1):
        out *= m
        if out > _INT64_MAX:
            raise FactorialOverflow(f"falling factorial ({y})_{k} exceeds int64")
    return out


def kappa_plus(spec: CrnSpec, i: int) -> float:
    """Total outflow rate kappa_i0 + sum_j kappa_ij of species i (1-based)."""
    if not 1 <= i <= spec.n:
        raise IndexError(f"species index {i} outside 1..{spec.n}")
    return float(spec.kappa[i].sum())


def distance_from_source(spec: CrnSpec) -> np.ndarray:
    """Shortest directed path length from 0 to each species, as a length-n array."""
    adj = spec.kappa > 0
    dist = np.full(spec.n + 1, -1, dtype=np.int64)
    dist[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist[1:]


def lattice_class(x0: Sequence[int], spec: CrnSpec) -> np.ndarray:
    """Residues a_i = x0_i mod k_i identifying the lattice the process lives on."""
    x0 = np.asarray(x0, dtype=np.int64)
    if np.any(x0 < 0):
        raise ValueError("molecule counts must be non-negative")
    return np.mod(x0, spec.k)


def figure1_spec(rates: dict[tuple[int, int], float] | None = None) -> CrnSpec:
    """The four-species example network with arities (3, 3, 2, 1).

    Edges: 0->1, 1->2, 1->3, 2->3, 2->4, 3->0, 3->4, 4->3.  All rates default to 1.
    """
    edges = [(0, 1), (1, 2), (1, 3), (2, 3), (3, 0), (2, 4), (3, 4), (4, 3)]
    kappa = np.zeros((5, 5))
    for e in edges:
        kappa[e] = 1.0
    for e, r in (rates or {}).items():
        if e not in edges:
            raise InvalidSpec(f"{e} is not an edge of the example network")
        kappa[e] = r
    return validate_spec(kappa, [3, 3, 2, 1])
