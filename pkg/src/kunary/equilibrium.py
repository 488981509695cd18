"""Linear-algebraic limit objects of a k-unary network.

Everything here works on rate matrices with index 0 as the source/sink.
The balance system  z_i kappa_i^+ = kappa_0i + sum_j z_j kappa_ji  is the
invariant-measure equation z . R = 0 (z_0 = 1) of the jump chain on
{0..n} whose generator R has ``kappa`` off the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from collections import deque

import numpy as np
import scipy.linalg

from .crn_model import CrnSpec, distance_from_source, is_irreducible
from .errors import (
    CannotEliminateSource,
    EmptyFastSet,
    NoConvergence,
    NonIrreducible,
    NoSlowSpecies,
    SingularSystem,
    VerificationFailed,
)

__all__ = [
    "EquilibriumSolution",
    "BoundVectors",
    "ReducedKappa",
    "generator",
    "solve_invariant",
    "neumann_series",
    "fast_equilibrium_map",
    "fast_block_kappa",
    "bounds_mM",
    "eliminate_species",
    "reduce_to_slow",
]


@dataclass(frozen=True)
class EquilibriumSolution:
    z: np.ndarray
    ell: np.ndarray
    residual: float


@dataclass(frozen=True)
class BoundVectors:
    m: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class ReducedKappa:
    """Rate matrix on a subset ``kept`` of the original index set (0 first)."""

    kept: tuple[int, ...]
    kappa_bar: np.ndarray

    def rate(self, i: int, j: int) -> float:
        """Rate between original indices i and j."""
        return float(self.kappa_bar[self.kept.index(i), self.kept.index(j)])


def _matrix(q) -> np.ndarray:
    if isinstance(q, CrnSpec):
        return np.asarray(q.kappa)
    if isinstance(q, ReducedKappa):
        return np.asarray(q.kappa_bar)
    return np.asarray(q, dtype=np.float64)


def generator(q) -> np.ndarray:
    """Q-matrix R with the rates off the diagonal and minus row sums on it."""
    kappa = _matrix(q).copy()
    np.fill_diagonal(kappa, 0.0)
    kappa[np.diag_indices_from(kappa)] = -kappa.sum(axis=1)
    return kappa


def _kth_root(w: np.ndarray, k) -> np.ndarray:
    return np.exp(np.log(w) / np.asarray(k, dtype=np.float64))


def solve_invariant(q, k: Sequence[int] | None = None) -> EquilibriumSolution:
    """Positive solution of z . R = 0 with z_0 = 1, by dense LU.

    ``q`` is a :class:`CrnSpec`, a :class:`ReducedKappa` or a raw square
    rate matrix.  ``ell`` holds the k_i-th roots of ``z``; when no arities
    are known (raw matrix without ``k``) they are taken to be one.
    """
    R = generator(q)
    if k is None:
        k = q.k if isinstance(q, CrnSpec) else np.ones(R.shape[0] - 1, dtype=np.int64)
    # columns 1..n of z.R = 0, unknowns z_1..z_n
    A = R[1:, 1:].T
    b = -R[0, 1:]
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    if np.any(np.abs(np.diag(lu)) <= np.finfo(float).eps * max(1.0, np.abs(A).max())):
        raise SingularSystem("balance system is singular; input is not irreducible")
    z = scipy.linalg.lu_solve((lu, piv), b)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise SingularSystem(f"balance system returned a non-positive solution {z}")
    full = np.concatenate(([1.0], z))
    residual = float(np.abs(full @ R).max())
    return EquilibriumSolution(z=z, ell=_kth_root(z, k), residual=residual)


def neumann_series(q, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Solve the balance system by the fixed-point iteration z <- c + z R*.

    Here c_i = kappa_0i / kappa_i^+ and R*_ji = kappa_ji / kappa_i^+ over
    species indices.  Partial sums of the Neumann series of R*; kept as an
    oracle independent of the LU path.

    Stops once the step is below ``tol`` and so is the geometric tail
    estimate step * r / (1 - r), r being the largest contraction ratio seen
    over the last three blocks; a bare step test under-reports the error
    when r is close to one.  A step at rounding level also ends the loop.
    Convergence is checked every 8 iterations.
    """
    kappa = _matrix(q)
    out = kappa[1:].sum(axis=1)
    c = kappa[0, 1:] / out
    Rstar = kappa[1:, 1:] / out[None, :]
    z = c.copy()
    ratios = deque(maxlen=3)
    block = 8
    done = 0
    prev = np.inf
    while done < max_iter:
        for _ in range(block - 1):
            z = c + z @ Rstar
        z_new = c + z @ Rstar
        done += block
        delta = float(np.abs(z_new - z).max())
        # per-step rate averaged over the block, robust to oscillating steps
        ratios.append((delta / prev) ** (1.0 / block) if np.isfinite(prev) and prev > 0 else 1.0)
        r = max(ratios)
        floor = 8 * np.finfo(float).eps * float(np.abs(z_new).max())
        if delta <= floor or (delta < tol and r < 1 and delta * r / (1 - r) < tol):
            return z_new
        z, prev = z_new, delta
    raise NoConvergence(f"Neumann series did not converge in {max_iter} iterations")


def fast_block_kappa(spec: CrnSpec, y) -> ReducedKappa:
    """Rate matrix on {0} + fast species with slow species folded into 0.

    Slow species act as an exterior input y_j kappa_ji into fast species i
    and as an exit for flows i -> j.
    """
    fast = spec.fast
    if fast.size == 0:
        raise EmptyFastSet("network has no species with arity >= 2")
    slow = spec.slow
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape != slow.shape:
        raise ValueError(f"expected {slow.size} slow coordinates, got {y.size}")
    if np.any(y <= 0):
        raise ValueError("slow coordinates must be positive")
    kappa = spec.kappa
    idx = np.concatenate(([0], fast))
    kb = kappa[np.ix_(idx, idx)].copy()
    kb[0, 1:] = kappa[0, fast] + y @ kappa[np.ix_(slow, fast)]
    kb[1:, 0] = kappa[fast, 0] + kappa[np.ix_(fast, slow)].sum(axis=1)
    return ReducedKappa(kept=tuple(int(i) for i in idx), kappa_bar=kb)


def _fast_powers(spec: CrnSpec, y) -> np.ndarray:
    block = fast_block_kappa(spec, y)
    return solve_invariant(block, spec.k[spec.fast - 1]).z


def fast_equilibrium_map(spec: CrnSpec, y) -> np.ndarray:
    """L(y): equilibrium of the fast species given slow coordinates ``y``.

    Solves the linear system in w_i = L_i^{k_i} and returns the roots, in
    the order of ``spec.fast``.
    """
    w = _fast_powers(spec, y)
    return _kth_root(w, spec.k[spec.fast - 1])


def _unit_inflow_solution(spec: CrnSpec) -> np.ndarray:
    kappa = np.array(spec.kappa)
    kappa[0, 1:] = 1.0
    return solve_invariant(kappa).z


def bounds_mM(spec: CrnSpec, alpha, safety: float = 2.0) -> BoundVectors:
    """Lower/upper vectors m < alpha^k < M satisfying the strict flow inequalities.

    M = rho * z~ where z~ solves the balance system with unit inflow into
    every species and rho = safety * max(alpha_i^k_i / z~_i, kappa_0i).
    m is built in order of distance from the source, each entry divided by
    ``safety``.  All inequalities are re-checked before returning.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (spec.n,) or np.any(alpha <= 0):
        raise ValueError("alpha must be a positive vector over the species")
    if not safety > 1:
        raise ValueError("safety factor must exceed 1")
    kappa = spec.kappa
    out = spec.out_rates()
    ak = alpha ** spec.k
    zt = _unit_inflow_solution(spec)
    rho = safety * max(float((ak / zt).max()), float(kappa[0, 1:].max()))
    M = rho * zt

    d = distance_from_source(spec)
    m = np.zeros(spec.n)
    for i in np.argsort(d, kind="stable"):
        earlier = d < d[i]
        inflow = kappa[0, i + 1] + m[earlier] @ kappa[1:, i + 1][earlier]
        m[i] = min(ak[i], inflow / out[i]) / safety

    lhs_M = M * out
    rhs_M = kappa[0, 1:] + M @ kappa[1:, 1:]
    rhs_m = np.array(
        [kappa[0, i + 1] + m[d < d[i]] @ kappa[1:, i + 1][d < d[i]] for i in range(spec.n)]
    )
    checks = {
        "0 < m": np.all(m > 0),
        "m < alpha^k": np.all(m < ak),
        "alpha^k < M": np.all(ak < M),
        "upper flow": np.all(lhs_M > rhs_M),
        "lower flow": np.all(m * out < rhs_m),
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise VerificationFailed(f"bound vectors fail: {', '.join(failed)}")
    return BoundVectors(m=m, M=M)


def eliminate_species(q, i0: int) -> ReducedKappa:
    """Remove index ``i0`` and reroute its outflow in proportion to its rates.

    kbar_ij = kappa_ij + kappa_{i,i0} kappa_{i0,j} / kappa_{i0}^+ ; loops dropped.
    ``i0`` is an original index when ``q`` is a :class:`ReducedKappa`.
    """
    if isinstance(q, ReducedKappa):
        kept = list(q.kept)
    else:
        kept = list(range(_matrix(q).shape[0]))
    kappa = _matrix(q)
    if i0 == 0:
        raise CannotEliminateSource("the source/sink index 0 cannot be eliminated")
    if i0 not in kept:
        raise IndexError(f"index {i0} is not present in {tuple(kept)}")
    p = kept.index(i0)
    total = kappa[p].sum() - kappa[p, p]
    rest = [r for r in range(len(kept)) if r != p]
    kb = kappa[np.ix_(rest, rest)] + np.outer(kappa[rest, p], kappa[p, rest]) / total
    np.fill_diagonal(kb, 0.0)
    if not is_irreducible(kb):
        raise NonIrreducible("reduced matrix is not irreducible")
    return ReducedKappa(kept=tuple(kept[r] for r in rest), kappa_bar=kb)


def reduce_to_slow(spec: CrnSpec, order: Iterable[int] | None = None) -> ReducedKappa:
    """Eliminate every species of arity >= 2, one at a time.

    The result is the rate matrix of a network on {0} + slow species whose
    linear ODE coincides with the slow limit ODE.
    """
    if spec.slow.size == 0:
        raise NoSlowSpecies("network has no species with arity 1")
    order = list(spec.fast) if order is None else [int(i) for i in order]
    if sorted(order) != sorted(int(i) for i in spec.fast):
        raise ValueError("elimination order must be a permutation of the fast species")
    red = ReducedKappa(kept=tuple(range(spec.n + 1)), kappa_bar=np.array(spec.kappa))
    for i0 in order:
        red = eliminate_species(red, i0)
    return red
