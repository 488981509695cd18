"""Relative-entropy functionals of a rate matrix and the limiting-equation residual.

Points ``z`` live in the space of k-th powers (z_i = x_i^{k_i}); the unique
zero of F is the equilibrium vector returned by :func:`solve_invariant`.
All evaluators accept a single point or a stack of points (last axis =
species).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .crn_model import CrnSpec
from .equilibrium import _matrix, solve_invariant
from .errors import NonPositivePoint
from .simulator import ScaledTrajectory

__all__ = [
    "EntropyEvaluation",
    "entropy_F",
    "entropy_gradient",
    "entropy_hessian",
    "hessian_quadratic_form",
    "entropy_H",
    "evaluate",
    "SmoothFunction",
    "ConstantFunction",
    "LinearFunction",
    "BumpFunction",
    "functional_equation_residual",
]


@dataclass(frozen=True)
class EntropyEvaluation:
    value: float
    gradient: np.ndarray
    at: np.ndarray


def _parts(kappa):
    kap = _matrix(kappa)
    zstar = solve_invariant(kap).z
    return kap[0, 1:], kap[1:, 1:], kap[1:].sum(axis=1), kap[1:, 0], zstar


def _check(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise NonPositivePoint("entropy functions need strictly positive points")
    return z


def entropy_F(kappa, z) -> np.ndarray | float:
    """sum_i (kappa_i^+ z_i - kappa_0i - sum_j kappa_ji z_j) ln(z_i / z*_i)."""
    z = _check(z)
    inflow, kin, out, _, zstar = _parts(kappa)
    flux = out * z - inflow - z @ kin
    val = np.sum(flux * np.log(z / zstar), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def entropy_gradient(kappa, z) -> np.ndarray:
    """Closed-form partial derivatives of :func:`entropy_F`."""
    z = _check(z)
    inflow, kin, out, _, zstar = _parts(kappa)
    log_r = np.log(z / zstar)
    flux = out * z - inflow - z @ kin
    # kin[i, m] = kappa_im, so log_r @ kin.T sums kappa_im ln r_m over m
    return out * log_r + flux / z - log_r @ kin.T


def entropy_hessian(kappa, z) -> np.ndarray:
    """Full Hessian matrix at a single point."""
    z = _check(z)
    inflow, kin, out, _, _ = _parts(kappa)
    H = -(kin * z[:, None] + kin.T * z[None, :]) / np.outer(z, z)
    np.fill_diagonal(H, (out * z + inflow + z @ kin) / z**2)
    return H


def hessian_quadratic_form(kappa, z, u) -> np.ndarray | float:
    """u^T H u written as a sum of non-negative terms.

    sum_i (kappa_i0 z_i + kappa_0i) u_i^2 / z_i^2
      + 1/2 sum_{i != j} gamma_ij (u_i/z_i - u_j/z_j)^2,
    gamma_ij = kappa_ij z_i + kappa_ji z_j.
    """
    z = _check(z)
    u = np.asarray(u, dtype=np.float64)
    inflow, kin, _, to_sink, _ = _parts(kappa)
    v = u / z
    gamma = kin * z[..., :, None] + kin.T * z[..., None, :]
    diff = v[..., :, None] - v[..., None, :]
    val = np.sum((to_sink * z + inflow) * v**2, axis=-1) + 0.5 * np.sum(gamma * diff**2, axis=(-2, -1))
    return float(val) if np.ndim(val) == 0 else val


def entropy_H(L_at_y, z, p: int) -> float:
    """sum_i z_i ln(z_i / L_i^p) - z_i over a block of equal arity ``p``."""
    z = _check(z)
    L = _check(L_at_y)
    val = np.sum(z * np.log(z / L**p) - z, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def evaluate(kappa, z) -> EntropyEvaluation:
    z = _check(z)
    return EntropyEvaluation(value=entropy_F(kappa, z), gradient=entropy_gradient(kappa, z), at=z)


class SmoothFunction(Protocol):
    def value(self, x: np.ndarray) -> np.ndarray: ...
    def gradient(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantFunction:
    c: float = 1.0

    def value(self, x):
        return np.full(np.shape(x)[:-1], self.c)

    def gradient(self, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class LinearFunction:
    """f(x) = a . x; gradient is ``a`` everywhere."""

    a: np.ndarray

    def value(self, x):
        return np.asarray(x) @ np.asarray(self.a)

    def gradient(self, x):
        return np.broadcast_to(np.asarray(self.a, dtype=float), np.shape(x)).copy()


@dataclass(frozen=True)
class BumpFunction:
    """Product of C^2 bumps (1 - u^2)^3, u = (x_c - center_c) / radius_c.

    ``coords`` are 1-based species indices; other coordinates are ignored.
    """

    coords: tuple[int, ...]
    center: tuple[float, ...]
    radius: tuple[float, ...]

    def _factors(self, x):
        x = np.asarray(x, dtype=np.float64)
        cols = np.asarray(self.coords) - 1
        u = (x[..., cols] - np.asarray(self.center)) / np.asarray(self.radius)
        inside = np.abs(u) < 1
        one = np.where(inside, 1 - u**2, 0.0)
        phi = one**3
        dphi = np.where(inside, -6 * u * one**2, 0.0) / np.asarray(self.radius)
        return cols, phi, dphi

    def value(self, x):
        _, phi, _ = self._factors(x)
        return np.prod(phi, axis=-1)

    def gradient(self, x):
        cols, phi, dphi = self._factors(x)
        grad = np.zeros(np.shape(x))
        for c in range(len(cols)):
            others = np.prod(np.delete(phi, c, axis=-1), axis=-1)
            grad[..., cols[c]] = dphi[..., c] * others
        return grad


def functional_equation_residual(
    spec: CrnSpec,
    N: float,
    trajectories: Sequence[ScaledTrajectory] | ScaledTrajectory,
    p: int,
    test_function: SmoothFunction,
) -> float:
    """Mean over trajectories of | integral_0^T sum_{k_i = p} drift_i(x) df/dx_i(x) ds |.

    drift_i(x) = kappa_0i + sum_j kappa_ji x_j^{k_j} - kappa_i^+ x_i^p,
    evaluated on the scaled path by exact piecewise-constant quadrature.
    """
    if isinstance(trajectories, ScaledTrajectory):
        trajectories = [trajectories]
    level = np.flatnonzero(spec.k == p)
    if p < 2 or level.size == 0:
        raise ValueError(f"no species with arity {p} >= 2")
    kappa = spec.kappa
    kin = kappa[1:, 1:][:, level]
    inflow = kappa[0, 1:][level]
    out = spec.out_rates()[level]
    k = spec.k.astype(np.float64)
    out_vals = []
    for st in trajectories:
        x = st.values
        drift = inflow + (x**k) @ kin - out * x[:, level] ** p
        grad = test_function.gradient(x)[:, level]
        integrand = np.sum(drift * grad, axis=1)
        w = st.ends - st.starts
        out_vals.append(abs(math.fsum(integrand * w)))
    return float(np.mean(out_vals))
