"""Deterministic limit flows, integrated with fixed-step classic RK4."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .crn_model import CrnSpec
from .equilibrium import _fast_powers, ReducedKappa
from .errors import NonPositiveState, NoSlowSpecies

__all__ = [
    "OdePath",
    "ZERO_NUDGE",
    "rk4",
    "slow_rhs",
    "full_rhs",
    "reduced_rhs",
    "integrate_slow_ode",
    "integrate_full_ode",
    "integrate_reduced_ode",
    "single_species_limit",
]

ZERO_NUDGE = 1e-9


@dataclass(frozen=True)
class OdePath:
    grid: np.ndarray
    values: np.ndarray
    step: float

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the path at times ``t`` (rows = times)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return np.column_stack([np.interp(t, self.grid, self.values[:, c]) for c in range(self.values.shape[1])])


def rk4(f: Callable[[np.ndarray], np.ndarray], y0, T: float, h: float, *, positive: bool = True) -> OdePath:
    """Classic fourth-order Runge-Kutta for an autonomous system on [0, T].

    The step is shrunk to T / ceil(T / h) so the grid ends exactly at T.
    """
    if not h > 0 or not T > 0:
        raise ValueError("need T > 0 and h > 0")
    steps = max(1, int(np.ceil(T / h - 1e-9)))
    h = T / steps
    y = np.array(y0, dtype=np.float64)
    values = np.empty((steps + 1, y.size))
    values[0] = y
    for s in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if positive and np.any(y <= 0):
            raise NonPositiveState(f"state {y} left the positive orthant at t={(s + 1) * h:g}; reduce the step")
        values[s + 1] = y
    return OdePath(grid=h * np.arange(steps + 1), values=values, step=h)


def _nudge(v) -> np.ndarray:
    v = np.array(v, dtype=np.float64).reshape(-1)
    if np.any(v < 0):
        raise ValueError("initial data must be non-negative")
    return np.where(v == 0, ZERO_NUDGE, v)


def slow_rhs(spec: CrnSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Right-hand side of the slow limit ODE; the fast map is re-solved per call."""
    slow = spec.slow
    if slow.size == 0:
        raise NoSlowSpecies("network has no species with arity 1")
    fast = spec.fast
    kappa = spec.kappa
    k_in_slow = kappa[np.ix_(slow, slow)]
    k_fast_slow = kappa[np.ix_(fast, slow)]
    inflow = kappa[0, slow]
    out = kappa[slow].sum(axis=1)

    def f(x):
        if np.any(x <= 0):
            raise NonPositiveState(f"slow state {x} is not positive")
        dx = inflow + x @ k_in_slow - x * out
        if fast.size:
            dx = dx + _fast_powers(spec, x) @ k_fast_slow
        return dx

    return f


def integrate_slow_ode(spec: CrnSpec, alpha1, T: float, h: float | None = None) -> OdePath:
    """Slow-species limit path from ``alpha1`` (zeros nudged to 1e-9)."""
    h = 1e-3 * T if h is None else h
    return rk4(slow_rhs(spec), _nudge(alpha1), T, h)


def full_rhs(spec: CrnSpec, N: float) -> Callable[[np.ndarray], np.ndarray]:
    """du_i/dt = k_i (N kappa_0i + sum_j u_j^k_j kappa_ji - u_i^k_i kappa_i^+)."""
    kappa = spec.kappa
    k = spec.k.astype(np.float64)
    inflow = N * kappa[0, 1:]
    kin = kappa[1:, 1:]
    out = spec.out_rates()

    def f(u):
        w = u ** k
        return k * (inflow + w @ kin - w * out)

    return f


def integrate_full_ode(spec: CrnSpec, N: float, u0, T: float, h: float | None = None) -> OdePath:
    h = 1e-3 * T if h is None else h
    return rk4(full_rhs(spec, N), _nudge(u0), T, h)


def reduced_rhs(red: ReducedKappa) -> Callable[[np.ndarray], np.ndarray]:
    """Linear mass-action ODE of a network whose species all have arity one."""
    kb = red.kappa_bar
    inflow = kb[0, 1:]
    kin = kb[1:, 1:]
    out = kb[1:].sum(axis=1)
    return lambda x: inflow + x @ kin - x * out


def integrate_reduced_ode(red: ReducedKappa, alpha1, T: float, h: float | None = None) -> OdePath:
    h = 1e-3 * T if h is None else h
    return rk4(reduced_rhs(red), _nudge(alpha1), T, h)


def single_species_limit(
    lam: float, mu: float, k: int, alpha: float, T: float, h: float | None = None, *, factor_k: bool = True
) -> tuple[OdePath, float]:
    """Limit of the one-species network on its own timescale t / N^(1-1/k).

    Integrates dx/dt = k (lam - mu x^k); ``factor_k=False`` drops the
    leading k.  Returns the path and the fixed point (lam/mu)^(1/k).
    """
    if not (lam > 0 and mu > 0 and k >= 1):
        raise ValueError("need lam > 0, mu > 0 and k >= 1")
    c = float(k) if factor_k else 1.0
    h = 1e-3 * T if h is None else h
    path = rk4(lambda x: c * (lam - mu * x**k), _nudge([alpha]), T, h)
    return path, (lam / mu) ** (1.0 / k)
