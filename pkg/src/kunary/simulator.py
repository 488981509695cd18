"""Exact simulation of the k-unary jump process and path functionals.

The jump process is realized with the direct (Gillespie) method: an
exponential sojourn with the total rate, then one uniform draw that picks
the reaction through cumulative rates.  The inner loop is compiled with
numba and takes a numpy ``Generator`` so every replica owns a reproducible
stream derived from a master seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from .crn_model import CrnSpec, falling_factorial
from .errors import EmptyWindow, EventBudgetExceeded

__all__ = [
    "DEFAULT_EVENT_CAP",
    "Trajectory",
    "ScaledTrajectory",
    "GridTrajectory",
    "OccupationMeasure",
    "make_rng",
    "derive_seed",
    "reaction_rate",
    "step",
    "simulate",
    "simulate_grid",
    "scale_trajectory",
    "occupation_measure",
    "time_average",
    "exit_time_diagnostics",
    "falling_factorial_array",
    "alpha_initial_state",
]

DEFAULT_EVENT_CAP = 10**9
REFRESH_EVERY = 1 << 16


def derive_seed(master_seed: int, replica: int) -> np.random.SeedSequence:
    """Independent stream for replica ``replica`` of an experiment."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def falling_factorial_array(x: np.ndarray, k) -> np.ndarray:
    """Elementwise falling factorial as float64; columns of ``x`` use arity ``k``."""
    x = np.asarray(x, dtype=np.float64)
    k = np.broadcast_to(np.asarray(k, dtype=np.int64), x.shape[-1:] if x.ndim else ())
    out = np.ones_like(x)
    for r in range(int(k.max()) if k.size else 0):
        factor = np.where(r < k, x - r, 1.0)
        out *= factor
    return np.where(x >= k, out, 0.0)


def reaction_rate(spec: CrnSpec, N: float, x: Sequence[int], i: int, j: int) -> float:
    """Mass-action rate of reaction i -> j in state ``x``."""
    kij = float(spec.kappa[i, j])
    if i == 0:
        return N * kij
    return kij * falling_factorial(int(x[i - 1]), int(spec.k[i - 1]))


def _reaction_tables(spec: CrnSpec, N: float):
    pairs = spec.reactions
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    base = np.array([spec.kappa[i, j] * (N if i == 0 else 1.0) for i, j in pairs])
    # reactions grouped by source species, CSR layout
    order = np.argsort(src, kind="stable")
    ptr = np.zeros(spec.n + 2, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    ptr = np.cumsum(ptr)
    return src, dst, base, ptr, order


def _total_and_rates(spec, N, x, src, base):
    ff = np.array([1.0] + [float(falling_factorial(int(x[s]), int(spec.k[s]))) for s in range(spec.n)])
    return base * ff[src]


def step(spec: CrnSpec, N: float, x: Sequence[int], rng) -> tuple[float, tuple[int, int], np.ndarray]:
    """One jump from state ``x``: (sojourn, (i, j), next state).

    Draw order (exponential, then uniform) matches the compiled kernel.
    """
    rng = make_rng(rng)
    x = np.asarray(x, dtype=np.int64)
    src, dst, base, _, _ = _reaction_tables(spec, N)
    rates = _total_and_rates(spec, N, x, src, base)
    total = rates.sum()
    sojourn = rng.exponential(1.0 / total)
    u = rng.random() * total
    r = _select(rates, u)
    i, j = int(src[r]), int(dst[r])
    nxt = x.copy()
    if i > 0:
        nxt[i - 1] -= spec.k[i - 1]
    if j > 0:
        nxt[j - 1] += spec.k[j - 1]
    return float(sojourn), (i, j), nxt


def _select(rates: np.ndarray, u: float) -> int:
    acc = 0.0
    last = -1
    for r in range(rates.size):
        if rates[r] > 0.0:
            last = r
            acc += rates[r]
            if u < acc:
                return r
    return last


@numba.njit(cache=True)
def _ff(x, k):
    if x < k:
        return 0.0
    out = 1.0
    for r in range(k):
        out *= x - r
    return out


@numba.njit(cache=True)
def _ssa_kernel(src, dst, base, ptr, order, kvec, outk, x0, T, rng, cap, refresh, grid_dt, n_grid):
    n = x0.size
    R = src.size
    x = x0.copy()
    ff = np.empty(n + 1)
    ff[0] = 1.0
    for s in range(n):
        ff[s + 1] = _ff(x[s], kvec[s])
    rates = np.empty(R)
    total = 0.0
    for r in range(R):
        rates[r] = base[r] * ff[src[r]]
        total += rates[r]

    use_grid = grid_dt > 0.0
    cap_buf = 1024 if use_grid else 4096
    times = np.empty(cap_buf)
    ridx = np.empty(cap_buf, dtype=np.int32)
    grid = np.empty((n_grid if use_grid else 0, n), dtype=np.int64)
    g = 0
    m = 0
    t = 0.0
    since_refresh = 0
    status = 0
    while True:
        dt = rng.exponential(1.0 / total)
        u = rng.random() * total
        t_new = t + dt
        if use_grid:
            while g < n_grid and g * grid_dt <= min(t_new, T) and (g * grid_dt < t_new):
                for s in range(n):
                    grid[g, s] = x[s]
                g += 1
        if t_new > T:
            break
        if m >= cap:
            status = 1
            break
        # select reaction
        acc = 0.0
        r = -1
        for q in range(R):
            if rates[q] > 0.0:
                r = q
                acc += rates[q]
                if u < acc:
                    break
        i = src[r]
        j = dst[r]
        if i > 0:
            x[i - 1] -= kvec[i - 1]
        if j > 0:
            x[j - 1] += kvec[j - 1]
        t = t_new
        if not use_grid:
            if m >= times.size:
                nt = np.empty(times.size * 2)
                nt[: times.size] = times
                times = nt
                nr = np.empty(ridx.size * 2, dtype=np.int32)
                nr[: ridx.size] = ridx
                ridx = nr
            times[m] = t
            ridx[m] = r
        m += 1
        # refresh only the two species touched by the event
        for sp in (i, j):
            if sp > 0:
                new = _ff(x[sp - 1], kvec[sp - 1])
                total += outk[sp - 1] * (new - ff[sp])
                ff[sp] = new
                for q in range(ptr[sp], ptr[sp + 1]):
                    rr = order[q]
                    rates[rr] = base[rr] * new
        since_refresh += 1
        if since_refresh >= refresh:
            total = 0.0
            for q in range(R):
                total += rates[q]
            since_refresh = 0
    if use_grid:
        while g < n_grid:
            for s in range(n):
                grid[g, s] = x[s]
            g += 1
        return times[:0], ridx[:0], grid, m, status
    return times[:m], ridx[:m], grid, m, status


@dataclass(frozen=True)
class Trajectory:
    """Full event log: times, reaction labels and state after each event."""

    times: np.ndarray
    reactions: np.ndarray
    states: np.ndarray
    t_end: float
    N: float
    x0: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(start, end, state) of every constancy interval, including the first."""
        starts = np.concatenate(([0.0], self.times))
        ends = np.concatenate((self.times, [self.t_end]))
        values = np.vstack((self.x0[None, :], self.states))
        return starts, ends, values


@dataclass(frozen=True)
class GridTrajectory:
    """States sampled on the grid t_g = g * dt, g = 0..G."""

    grid: np.ndarray
    states: np.ndarray
    n_events: int
    N: float


@dataclass(frozen=True)
class ScaledTrajectory:
    """Piecewise-constant path with coordinate i divided by N^(1/k_i)."""

    starts: np.ndarray
    ends: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    reactions: np.ndarray
    t_end: float
    N: float
    k: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.starts[1:]


@dataclass(frozen=True)
class OccupationMeasure:
    s: np.ndarray
    x: np.ndarray
    w: np.ndarray

    @property
    def total_mass(self) -> float:
        return math.fsum(self.w)

    def integrate(self, g: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """<Lambda, g> for g(s, x) vectorized over rows of x."""
        vals = np.asarray(g(self.s, self.x), dtype=np.float64)
        return math.fsum(vals * self.w)


def _prepare(spec: CrnSpec, N: float, x0, T: float):
    x0 = np.asarray(x0, dtype=np.int64)
    if x0.shape != (spec.n,) or np.any(x0 < 0):
        raise ValueError(f"initial state must be {spec.n} non-negative integers")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    src, dst, base, ptr, order = _reaction_tables(spec, float(N))
    outk = spec.out_rates().astype(np.float64)
    return x0, src, dst, base, ptr, order, outk


def _jumps(spec: CrnSpec, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    jumps = np.zeros((src.size, spec.n), dtype=np.int64)
    for r, (i, j) in enumerate(zip(src, dst)):
        if i > 0:
            jumps[r, i - 1] -= spec.k[i - 1]
        if j > 0:
            jumps[r, j - 1] += spec.k[j - 1]
    return jumps


def simulate(
    spec: CrnSpec,
    N: float,
    x0: Sequence[int],
    T: float,
    seed=0,
    *,
    max_events: int = DEFAULT_EVENT_CAP,
) -> Trajectory:
    """Simulate on [0, T] and return the full event log.

    Deterministic in (spec, N, x0, T, seed).  ``seed`` may be an int, a
    ``SeedSequence`` or a ``Generator`` (which is advanced in place).
    """
    x0, src, dst, base, ptr, order, outk = _prepare(spec, N, x0, T)
    rng = make_rng(seed)
    times, ridx, _, m, status = _ssa_kernel(
        src, dst, base, ptr, order, np.asarray(spec.k), outk, x0, float(T), rng,
        int(max_events), REFRESH_EVERY, 0.0, 0,
    )
    if status:
        raise EventBudgetExceeded(f"more than {max_events} events before T={T}")
    jumps = _jumps(spec, src, dst)
    states = x0[None, :] + np.cumsum(jumps[ridx], axis=0)
    reactions = np.stack((src[ridx], dst[ridx]), axis=1)
    return Trajectory(times=times.copy(), reactions=reactions, states=states, t_end=float(T), N=float(N), x0=x0)


def simulate_grid(
    spec: CrnSpec,
    N: float,
    x0: Sequence[int],
    T: float,
    seed=0,
    *,
    n_points: int = 1000,
    max_events: int = DEFAULT_EVENT_CAP,
) -> GridTrajectory:
    """Simulate on [0, T] storing only snapshots at ``n_points + 1`` grid times."""
    x0, src, dst, base, ptr, order, outk = _prepare(spec, N, x0, T)
    rng = make_rng(seed)
    dt = float(T) / n_points
    _, _, grid, m, status = _ssa_kernel(
        src, dst, base, ptr, order, np.asarray(spec.k), outk, x0, float(T), rng,
        int(max_events), REFRESH_EVERY, dt, n_points + 1,
    )
    if status:
        raise EventBudgetExceeded(f"more than {max_events} events before T={T}")
    return GridTrajectory(grid=dt * np.arange(n_points + 1), states=grid, n_events=int(m), N=float(N))


def scale_trajectory(traj: Trajectory, spec: CrnSpec) -> ScaledTrajectory:
    scale = np.exp(math.log(traj.N) / spec.k.astype(np.float64))
    starts, ends, counts = traj.segments()
    return ScaledTrajectory(
        starts=starts,
        ends=ends,
        values=counts / scale[None, :],
        counts=counts,
        reactions=traj.reactions,
        t_end=traj.t_end,
        N=traj.N,
        k=np.asarray(spec.k),
    )


def occupation_measure(straj: ScaledTrajectory) -> OccupationMeasure:
    """One atom per constancy interval at its midpoint, weighted by its length."""
    w = straj.ends - straj.starts
    keep = w > 0
    mid = 0.5 * (straj.starts + straj.ends)
    return OccupationMeasure(s=mid[keep], x=straj.values[keep], w=w[keep])


def _window_weights(straj: ScaledTrajectory, eta: float, T: float) -> np.ndarray:
    if not eta < T:
        raise EmptyWindow(f"window [{eta}, {T}] is empty")
    if eta < 0 or T > straj.t_end * (1 + 1e-12):
        raise ValueError(f"window [{eta}, {T}] not inside [0, {straj.t_end}]")
    lo = np.maximum(straj.starts, eta)
    hi = np.minimum(straj.ends, T)
    return np.clip(hi - lo, 0.0, None)


def time_average(straj: ScaledTrajectory, i: int, window: tuple[float, float]) -> float:
    """(1/(T-eta)) * integral over [eta, T] of scaled coordinate i (1-based)."""
    eta, T = window
    w = _window_weights(straj, eta, T)
    return math.fsum(w * straj.values[:, i - 1]) / (T - eta)


def exit_time_diagnostics(straj: ScaledTrajectory, spec: CrnSpec, N: float, m, M):
    """First times the raw counts leave the box m_i N < x_i^(k_i) < M_i N.

    Returns (H, T_exit); each is None if not reached before the end of the
    path.  Equality counts as a hit.
    """
    m = np.asarray(m, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if np.any(m <= 0) or np.any(m >= M):
        raise ValueError("need 0 < m_i < M_i")
    ff = falling_factorial_array(straj.counts, spec.k)
    low = (ff / (m * N)).min(axis=1) <= 1.0
    high = (ff / (M * N)).max(axis=1) >= 1.0

    def first(mask):
        hits = np.flatnonzero(mask)
        return float(straj.starts[hits[0]]) if hits.size else None

    return first(low), first(high)


def alpha_initial_state(spec: CrnSpec, N: float, alpha) -> np.ndarray:
    """Round alpha_i N^(1/k_i) down to the nearest multiple of k_i (residue 0)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    raw = alpha * np.exp(math.log(N) / spec.k.astype(np.float64))
    # guard against 199.99999 style rounding of exact products
    units = np.floor(raw / spec.k + 1e-9)
    return (units * spec.k).astype(np.int64)
