"""Product-form stationary law of the jump process on a lattice class.

On the class {x : x_i = a_i mod k_i} the invariant law is a product of
Poisson(gamma_i) distributions, each restricted to its residue class, with
gamma_i = N^(1/k_i) * ell_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .crn_model import CrnSpec, lattice_class
from .equilibrium import solve_invariant
from .errors import InsufficientData
from .simulator import Trajectory, make_rng

__all__ = [
    "ConditionedPoisson",
    "StationaryComparison",
    "poisson_means",
    "conditioned_poisson",
    "product_form_logweight",
    "sample_stationary",
    "compare_empirical_stationary",
    "total_variation",
]


@dataclass(frozen=True)
class ConditionedPoisson:
    gamma: float
    k: int
    a: int
    support: np.ndarray
    pmf: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.support @ self.pmf)

    @property
    def variance(self) -> float:
        return float(self.support**2 @ self.pmf - self.mean**2)

    def prob(self, x: np.ndarray) -> np.ndarray:
        """pmf at arbitrary integers (zero off the support)."""
        x = np.asarray(x)
        idx = (x - self.a) // self.k
        ok = (x >= self.a) & ((x - self.a) % self.k == 0) & (idx < self.support.size)
        out = np.zeros(x.shape)
        out[ok] = self.pmf[idx[ok]]
        return out


@dataclass(frozen=True)
class StationaryComparison:
    tv: np.ndarray
    empirical_mean: np.ndarray
    empirical_var: np.ndarray
    exact_mean: np.ndarray
    exact_var: np.ndarray
    sample_time: float

    def as_dict(self) -> dict:
        return {
            "tv": self.tv.tolist(),
            "empirical_mean": self.empirical_mean.tolist(),
            "empirical_var": self.empirical_var.tolist(),
            "exact_mean": self.exact_mean.tolist(),
            "exact_var": self.exact_var.tolist(),
            "sample_time": self.sample_time,
        }


def poisson_means(spec: CrnSpec, N: float) -> np.ndarray:
    """gamma_i = N^(1/k_i) ell_i, computed as exp((ln N + ln z_i) / k_i)."""
    z = solve_invariant(spec).z
    return np.exp((math.log(N) + np.log(z)) / spec.k)


def conditioned_poisson(gamma: float, k: int, a: int) -> ConditionedPoisson:
    """Poisson(gamma) restricted to {a, a+k, a+2k, ...}, truncated at gamma + 12 sqrt(gamma) + 12k."""
    if not 0 <= a < k:
        raise ValueError(f"residue {a} not in [0, {k})")
    top = gamma + 12.0 * math.sqrt(gamma) + 12.0 * k
    support = np.arange(a, int(math.ceil(top)) + 1, k, dtype=np.int64)
    logw = support * math.log(gamma) - gammaln(support + 1.0)
    w = np.exp(logw - logw.max())
    return ConditionedPoisson(gamma=float(gamma), k=int(k), a=int(a), support=support, pmf=w / w.sum())


def product_form_logweight(spec: CrnSpec, N: float, x) -> float:
    """Unnormalized log of the product-form weight: sum_i x_i ln gamma_i - ln x_i!."""
    x = np.asarray(x, dtype=np.float64)
    g = poisson_means(spec, N)
    val = np.sum(x * np.log(g) - gammaln(x + 1.0), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def _marginals(spec: CrnSpec, N: float, a) -> list[ConditionedPoisson]:
    g = poisson_means(spec, N)
    a = np.asarray(a, dtype=np.int64)
    return [conditioned_poisson(g[i], int(spec.k[i]), int(a[i])) for i in range(spec.n)]


def sample_stationary(spec: CrnSpec, N: float, a, seed=0, size: int | None = None) -> np.ndarray:
    """Draw from the stationary law on class ``a`` by inverse CDF per coordinate.

    Returns one state, or an array of ``size`` states.
    """
    rng = make_rng(seed)
    margs = _marginals(spec, N, a)
    shape = () if size is None else (size,)
    cols = []
    for cp in margs:
        cdf = np.cumsum(cp.pmf)
        u = rng.random(shape)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), cp.support.size - 1)
        cols.append(cp.support[idx])
    return np.stack(cols, axis=-1)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def compare_empirical_stationary(
    traj: Trajectory, spec: CrnSpec, N: float, a=None, *, min_time: float = 1.0
) -> StationaryComparison:
    """Time-weighted marginals over the second half of ``traj`` against the exact law.

    Each coordinate's empirical distribution is compared to its conditioned
    Poisson marginal in total variation.
    """
    if a is None:
        a = lattice_class(traj.x0, spec)
    t0 = 0.5 * traj.t_end
    if traj.t_end - t0 < min_time:
        raise InsufficientData(f"only {traj.t_end - t0:g} time units after burn-in (need {min_time:g})")
    starts, ends, values = traj.segments()
    w = np.clip(np.minimum(ends, traj.t_end) - np.maximum(starts, t0), 0.0, None)
    span = w.sum()
    margs = _marginals(spec, N, a)
    tv, em, ev = [], [], []
    for i, cp in enumerate(margs):
        col = values[:, i]
        top = max(int(col.max()), int(cp.support[-1])) + 1
        emp = np.bincount(col, weights=w, minlength=top) / span
        exact = np.zeros(top)
        exact[cp.support] = cp.pmf
        tv.append(total_variation(emp, exact))
        mean = float(np.arange(top) @ emp)
        em.append(mean)
        ev.append(float(np.arange(top) ** 2 @ emp - mean**2))
    return StationaryComparison(
        tv=np.array(tv),
        empirical_mean=np.array(em),
        empirical_var=np.array(ev),
        exact_mean=np.array([cp.mean for cp in margs]),
        exact_var=np.array([cp.variance for cp in margs]),
        sample_time=float(span),
    )
