"""Replica batches over an N-ladder, compared against the deterministic limits.

Per N the runner reports, averaged over replicas:

* ``slow_sup``   sup over [0, T] of |Xbar_i - x_i(t)| for slow species, where
                 x solves the slow limit ODE;
* ``fast_dev``   |integral over [eta, T] of (Xbar_i - L_i(x(s))) ds| / (T - eta)
                 for each fast species;
* ``exit``       fraction of replicas leaving the bounds box before T;
* ``residual``   functional-equation residual per fast arity level, with a
                 bump centred at ell restricted to that level.

CSV bodies depend only on the config, so reruns are byte-identical; wall
clock data goes to ``metadata.json``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .crn_model import CrnSpec
from .entropy import BumpFunction, functional_equation_residual
from .equilibrium import bounds_mM, fast_equilibrium_map, solve_invariant
from .errors import ParseError
from .limit_dynamics import integrate_slow_ode, single_species_limit
from .networkfile import load_network, network_to_dict, parse_network
from .simulator import (
    alpha_initial_state,
    derive_seed,
    exit_time_diagnostics,
    scale_trajectory,
    simulate,
    simulate_grid,
    time_average,
)

__all__ = [
    "ExperimentConfig",
    "ReplicaMetrics",
    "load_config",
    "initial_state",
    "limit_path",
    "replica_metrics",
    "run_ladder",
    "run_verification",
    "is_decreasing",
    "relaxation_report",
]


@dataclass(frozen=True)
class ExperimentConfig:
    spec: CrnSpec
    N_ladder: tuple[int, ...]
    T: float = 1.0
    eta: float | None = None
    replicas: int = 20
    seed: int = 0
    alpha: tuple[float, ...] | None = None
    x0: tuple[int, ...] | None = None
    out: str | None = None
    workers: int | None = None
    safety: float = 2.0
    ode_step: float | None = None
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        ladder = tuple(int(v) for v in self.N_ladder)
        if not ladder or any(v <= 0 for v in ladder):
            raise ValueError("N_ladder must hold positive integers")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("N_ladder must be strictly increasing")
        object.__setattr__(self, "N_ladder", ladder)
        if self.eta is None:
            object.__setattr__(self, "eta", 0.1 * self.T)
        if not 0 <= self.eta < self.T:
            raise ValueError(f"need 0 <= eta < T, got eta={self.eta}, T={self.T}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.alpha is not None and self.x0 is not None:
            raise ValueError("give either alpha or x0, not both")
        for name in ("alpha", "x0"):
            v = getattr(self, name)
            if v is not None and len(v) != self.spec.n:
                raise ValueError(f"{name} must have {self.spec.n} entries")

    @property
    def alpha_vector(self) -> np.ndarray:
        """Initial scaled state; defaults to the equilibrium ell."""
        if self.alpha is not None:
            return np.asarray(self.alpha, dtype=np.float64)
        return solve_invariant(self.spec).ell

    def summary_dict(self) -> dict:
        return {
            "network": network_to_dict(self.spec),
            "N_ladder": list(self.N_ladder),
            "T": self.T,
            "eta": self.eta,
            "replicas": self.replicas,
            "seed": self.seed,
            "alpha": None if self.alpha is None else list(self.alpha),
            "x0": None if self.x0 is None else list(self.x0),
            "safety": self.safety,
        }


def load_config(source, base_dir=None, **overrides) -> ExperimentConfig:
    """Build a config from a JSON file path or an already-decoded dict.

    ``network`` may be an inline network document or a path relative to the
    config file.  Keyword ``overrides`` that are not None replace fields.
    """
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        base_dir = path.parent if base_dir is None else base_dir
    else:
        doc = dict(source)
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    net = overrides.pop("spec", None)
    if net is None:
        if "network" not in doc:
            raise ParseError("$: missing field 'network'")
        ref = doc["network"]
        if isinstance(ref, str):
            p = Path(ref)
            if not p.is_absolute() and base_dir is not None:
                p = Path(base_dir) / p
            net = load_network(p)
        else:
            net = parse_network(ref)
    known = {
        "N_ladder", "T", "eta", "replicas", "seed", "alpha", "x0", "out", "workers",
        "safety", "ode_step", "thresholds",
    }
    unknown = set(doc) - known - {"network"}
    if unknown:
        raise ParseError(f"$: unknown config fields {sorted(unknown)}")
    kwargs = {key: doc[key] for key in known if key in doc}
    if "N_ladder" not in kwargs:
        raise ParseError("$: missing field 'N_ladder'")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("alpha", "x0", "N_ladder"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    try:
        return ExperimentConfig(spec=net, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid config: {exc}") from None


def initial_state(cfg: ExperimentConfig, N: int) -> np.ndarray:
    if cfg.x0 is not None:
        return np.asarray(cfg.x0, dtype=np.int64)
    return alpha_initial_state(cfg.spec, N, cfg.alpha_vector)


@dataclass(frozen=True)
class LimitPath:
    """Slow ODE path and the fast map along it, on a common grid."""

    grid: np.ndarray
    slow: np.ndarray
    fast: np.ndarray
    # integral over [eta, T] of L_i(x(s)) for each fast species
    fast_integral: np.ndarray


def limit_path(cfg: ExperimentConfig) -> LimitPath:
    spec = cfg.spec
    slow, fast = spec.slow, spec.fast
    if slow.size:
        alpha = cfg.alpha_vector
        ode = integrate_slow_ode(spec, alpha[slow - 1], cfg.T, cfg.ode_step)
        grid, xs = ode.grid, ode.values
        fs = np.array([fast_equilibrium_map(spec, y) for y in xs]) if fast.size else np.zeros((grid.size, 0))
    else:
        grid = np.linspace(0.0, cfg.T, 1001)
        xs = np.zeros((grid.size, 0))
        ell = solve_invariant(spec).ell
        fs = np.tile(ell, (grid.size, 1))
    # integrate the fast map over [eta, T] on a refined trapezoid grid
    t = np.union1d(grid[(grid > cfg.eta) & (grid < cfg.T)], [cfg.eta, cfg.T])
    fast_int = np.array([np.trapezoid(np.interp(t, grid, fs[:, c]), t) for c in range(fs.shape[1])])
    return LimitPath(grid=grid, slow=xs, fast=fs, fast_integral=fast_int)


@dataclass(frozen=True)
class ReplicaMetrics:
    slow_sup: np.ndarray
    fast_dev: np.ndarray
    exited: bool
    residual: np.ndarray
    n_events: int


def _slow_sup(straj, path: LimitPath, slow_cols) -> np.ndarray:
    """Exact sup of |Xbar - x| up to the ODE's linear interpolation."""
    out = np.zeros(len(slow_cols))
    for c, col in enumerate(slow_cols):
        v = straj.values[:, col]
        a = np.interp(straj.starts, path.grid, path.slow[:, c])
        b = np.interp(straj.ends, path.grid, path.slow[:, c])
        sup = max(np.abs(v - a).max(), np.abs(v - b).max())
        # ODE extrema strictly inside a segment are covered by the grid points
        inner = path.grid
        idx = np.clip(np.searchsorted(straj.starts, inner, side="right") - 1, 0, v.size - 1)
        out[c] = max(sup, np.abs(v[idx] - path.slow[:, c]).max())
    return out


def replica_metrics(
    cfg: ExperimentConfig, N: int, replica: int, path: LimitPath, m, M, levels
) -> ReplicaMetrics:
    spec = cfg.spec
    x0 = initial_state(cfg, N)
    traj = simulate(spec, N, x0, cfg.T, seed=derive_seed(cfg.seed, replica))
    st = scale_trajectory(traj, spec)
    slow_cols, fast_cols = spec.slow - 1, spec.fast - 1
    slow_sup = _slow_sup(st, path, slow_cols) if slow_cols.size else np.zeros(0)
    span = cfg.T - cfg.eta
    fast_dev = np.array(
        [abs(time_average(st, c + 1, (cfg.eta, cfg.T)) * span - path.fast_integral[f]) / span
         for f, c in enumerate(fast_cols)]
    )
    H, Tx = exit_time_diagnostics(st, spec, N, m, M)
    exited = H is not None or Tx is not None
    ell = solve_invariant(spec).ell
    residual = []
    for p in levels:
        coords = tuple(int(i) for i in np.flatnonzero(spec.k == p) + 1)
        bump = BumpFunction(coords, tuple(ell[c - 1] for c in coords), tuple(ell[c - 1] for c in coords))
        residual.append(functional_equation_residual(spec, N, st, int(p), bump))
    return ReplicaMetrics(slow_sup, fast_dev, exited, np.array(residual), traj.n_events)


def _batch(args):
    cfg, N, replicas, path, m, M, levels = args
    return [replica_metrics(cfg, N, r, path, m, M, levels) for r in replicas]


def run_ladder(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Run every N in the ladder; one aggregated row-dict per N, in ladder order."""
    spec = cfg.spec
    path = limit_path(cfg)
    bounds = bounds_mM(spec, cfg.alpha_vector, cfg.safety)
    levels = sorted(int(p) for p in set(spec.k.tolist()) if p >= 2)
    workers = cfg.workers if workers is None else workers
    workers = (os.cpu_count() or 1) if workers is None else max(1, int(workers))
    results = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for N in cfg.N_ladder:
            chunks = [list(range(r, cfg.replicas, workers)) for r in range(min(workers, cfg.replicas))]
            args = [(cfg, N, ch, path, bounds.m, bounds.M, levels) for ch in chunks]
            batches = list(pool.map(_batch, args)) if pool else [_batch(a) for a in args]
            by_replica = {}
            for ch, res in zip(chunks, batches):
                by_replica.update(zip(ch, res))
            reps = [by_replica[r] for r in range(cfg.replicas)]
            results.append(_aggregate(cfg, N, reps, levels))
    finally:
        if pool:
            pool.shutdown()
    return results


def _aggregate(cfg, N, reps: list[ReplicaMetrics], levels) -> dict:
    spec = cfg.spec
    row = {"N": int(N)}
    for c, i in enumerate(spec.slow):
        row[f"slow_sup_{i}"] = float(np.mean([r.slow_sup[c] for r in reps]))
    for c, i in enumerate(spec.fast):
        row[f"fast_dev_{i}"] = float(np.mean([r.fast_dev[c] for r in reps]))
    row["exit_fraction"] = float(np.mean([r.exited for r in reps]))
    for c, p in enumerate(levels):
        row[f"residual_k{p}"] = float(np.mean([r.residual[c] for r in reps]))
    row["mean_events"] = float(np.mean([r.n_events for r in reps]))
    return row


def is_decreasing(values, strict: bool = True) -> bool:
    v = list(values)
    if strict:
        return all(b < a for a, b in zip(v, v[1:]))
    return all(b <= a for a, b in zip(v, v[1:]))


def _trend_checks(rows: list[dict]) -> dict:
    checks = {}
    for key in rows[0]:
        if key in ("N", "mean_events"):
            continue
        vals = [r[key] for r in rows]
        if key == "exit_fraction":
            # a fraction pinned at zero has nowhere left to go
            ok = is_decreasing(vals, strict=False) and (vals[-1] < vals[0] or vals[-1] == 0.0)
        else:
            ok = is_decreasing(vals)
        checks[key] = {"values": vals, "decreasing": bool(ok)}
    return checks


def _threshold_checks(rows: list[dict], thresholds: dict) -> dict:
    """Thresholds apply to the largest N; keys may be a metric name or a prefix."""
    last = rows[-1]
    out = {}
    for name, limit in sorted(thresholds.items()):
        keys = [k for k in last if k == name or k.startswith(name + "_")]
        if not keys:
            raise ValueError(f"threshold '{name}' matches no metric")
        for k in keys:
            out[k] = {"value": last[k], "limit": float(limit), "passed": bool(last[k] < float(limit))}
    return out


def _csv_text(cfg: ExperimentConfig, rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "metric", "value", "replicas", "seed"])
    for r in rows:
        for k, v in r.items():
            if k == "N":
                continue
            w.writerow([r["N"], k, repr(float(v)), cfg.replicas, cfg.seed])
    return buf.getvalue()


def run_verification(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> dict:
    """Run the ladder, write metrics.csv / summary.json / metadata.json, return the summary.

    Rows for each finished N are flushed to ``metrics.csv`` before the next
    N starts, so a failure leaves the partial results on disk.
    """
    out = Path(out_dir or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    try:
        for N in cfg.N_ladder:
            rows.extend(run_ladder(replace(cfg, N_ladder=(N,)), workers))
            (out / "metrics.csv").write_text(_csv_text(cfg, rows))
    finally:
        meta = {
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
            "elapsed_seconds": round(time.time() - started, 3),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "completed_N": [r["N"] for r in rows],
        }
        (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    for r in rows:
        for k, v in r.items():
            if not math.isfinite(v):
                raise FloatingPointError(f"metric {k} at N={r['N']} is not finite")
    trends = _trend_checks(rows) if len(rows) > 1 else {}
    thresholds = _threshold_checks(rows, cfg.thresholds) if cfg.thresholds else {}
    passed = all(c["decreasing"] for c in trends.values()) and all(c["passed"] for c in thresholds.values())
    summary = {
        "config": cfg.summary_dict(),
        "rows": rows,
        "trends": trends,
        "thresholds": thresholds,
        "passed": bool(passed),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def relaxation_report(
    lam: float,
    mu: float,
    k: int,
    N: float,
    x0: int,
    replicas: int = 20,
    seed: int = 0,
    horizon: float = 2.0,
    n_points: int = 400,
) -> dict:
    """Compare the replica-mean relaxation of one species with both candidate ODEs.

    The chain is simulated in real time up to horizon / N^(1-1/k); the mean
    scaled path is put on the limit timescale and compared in sup norm with
    dx/dt = k(lam - mu x^k) and with dx/dt = lam - mu x^k.  Half-way times
    (first crossing of the midpoint between start and ell) are also reported.
    """
    from .crn_model import validate_spec

    kappa = np.array([[0.0, lam], [mu, 0.0]])
    spec = validate_spec(kappa, [k])
    speed = N ** (1.0 - 1.0 / k)
    t_real = horizon / speed
    paths = []
    for r in range(replicas):
        g = simulate_grid(spec, N, [x0], t_real, seed=derive_seed(seed, r), n_points=n_points)
        paths.append(g.states[:, 0] / N ** (1.0 / k))
    mean = np.mean(paths, axis=0)
    tau = np.linspace(0.0, horizon, n_points + 1)
    alpha = x0 / N ** (1.0 / k)
    out = {"N": float(N), "replicas": replicas, "seed": seed, "alpha": alpha}

    def halfway(t, v, ell):
        target = 0.5 * (v[0] + ell)
        sign = np.sign(v[0] - target)
        idx = np.flatnonzero(np.sign(v - target) != sign)
        return float(t[idx[0]]) if idx.size else float("inf")

    ell = None
    for name, flag in (("factor_k", True), ("no_factor", False)):
        ode, ell = single_species_limit(lam, mu, k, alpha, horizon, horizon / 4000, factor_k=flag)
        on_grid = np.interp(tau, ode.grid, ode.values[:, 0])
        out[f"sup_{name}"] = float(np.abs(mean - on_grid).max())
        out[f"halfway_{name}"] = halfway(ode.grid, ode.values[:, 0], ell)
    out["halfway_empirical"] = halfway(tau, mean, ell)
    out["matches"] = "factor_k" if out["sup_factor_k"] <= out["sup_no_factor"] else "no_factor"
    return out
