"""Command-line entry point.

Exit status: 0 when every check passed, 2 when a check failed, 1 on errors
(bad input, solver failures, usage mistakes).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .crn_model import CrnSpec, lattice_class
from .entropy import entropy_F, entropy_gradient, hessian_quadratic_form
from .equilibrium import fast_equilibrium_map, reduce_to_slow, solve_invariant
from .errors import KunaryError, NoSlowSpecies
from .experiments import load_config, run_verification
from .limit_dynamics import full_rhs, integrate_full_ode, integrate_reduced_ode, integrate_slow_ode, slow_rhs
from .networkfile import load_network, parse_network
from .simulator import (
    alpha_initial_state,
    derive_seed,
    occupation_measure,
    scale_trajectory,
    simulate,
    simulate_grid,
)
from .stationary import compare_empirical_stationary

EXIT_CHECK_FAILED = 2


class ChecksFailed(Exception):
    pass


def _floats(text):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None


class Context:
    def __init__(self, config, network, seed, out, replicas, workers):
        self.config_path = config
        self.doc = json.loads(Path(config).read_text()) if config else {}
        self._network = network
        self.seed_opt = seed
        self.out = Path(out) if out else None
        self.replicas_opt = replicas
        self.workers = workers

    @property
    def spec(self) -> CrnSpec:
        if self._network:
            return load_network(self._network)
        ref = self.doc.get("network")
        if ref is None:
            raise click.UsageError("a network is required (--network or a config with 'network')")
        if isinstance(ref, str):
            return load_network(Path(self.config_path).parent / ref)
        return parse_network(ref)

    @property
    def seed(self) -> int:
        return self.seed_opt if self.seed_opt is not None else int(self.doc.get("seed", 0))

    @property
    def replicas(self) -> int:
        return self.replicas_opt if self.replicas_opt is not None else int(self.doc.get("replicas", 1))

    def emit(self, report: dict, name: str):
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / name).write_text(text)
        click.echo(text, nl=False)


def _common(f):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON experiment config."),
        click.option("--network", type=click.Path(exists=True, dir_okay=False), help="JSON network file."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Master seed."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
        click.option("--replicas", type=click.IntRange(1), default=None),
        click.option("--workers", type=click.IntRange(1), default=None, help="Worker processes."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _ctx(config, network, seed, out, replicas, workers) -> Context:
    return Context(config, network, seed, out, replicas, workers)


def _initial(ctx: Context, spec: CrnSpec, N: float, alpha, x0) -> np.ndarray:
    alpha = alpha if alpha is not None else ctx.doc.get("alpha")
    x0 = x0 if x0 is not None else ctx.doc.get("x0")
    if alpha is not None and x0 is not None:
        raise click.UsageError("give either --alpha or --x0")
    if x0 is not None:
        if len(x0) != spec.n:
            raise click.BadParameter(f"--x0 needs {spec.n} entries")
        return np.asarray(x0, dtype=np.int64)
    if alpha is None:
        alpha = solve_invariant(spec).ell
    if len(alpha) != spec.n:
        raise click.BadParameter(f"--alpha needs {spec.n} entries")
    return alpha_initial_state(spec, N, alpha)


def _size(ctx: Context, N):
    if N is not None:
        return N
    ladder = ctx.doc.get("N_ladder")
    if not ladder:
        raise click.UsageError("--N is required")
    return float(ladder[-1])


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Simulate k-unary reaction networks and check them against their limits."""


@cli.command("simulate")
@_common
@click.option("--N", "N", type=float, default=None, help="Scaling parameter.")
@click.option("--T", "T", type=float, default=None, help="Horizon.")
@click.option("--alpha", default=None, help="Scaled initial state, comma separated.")
@click.option("--x0", default=None, help="Initial molecule counts, comma separated.")
@click.option("--points", type=click.IntRange(1), default=1000, help="Grid intervals.")
@click.option("--full-events", is_flag=True, help="Write every event and the occupation measure.")
def simulate_cmd(config, network, seed, out, replicas, workers, N, T, alpha, x0, points, full_events):
    """Simulate replicas; grid CSV by default."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    spec = ctx.spec
    N = _size(ctx, N)
    T = T if T is not None else float(ctx.doc.get("T", 1.0))
    start = _initial(ctx, spec, N, _floats(alpha), _ints(x0))
    cols = [f"x_{i}" for i in range(1, spec.n + 1)]
    for r in range(ctx.replicas):
        rseed = derive_seed(ctx.seed, r)
        if ctx.out:
            ctx.out.mkdir(parents=True, exist_ok=True)
            sink = open(ctx.out / f"trajectory_r{r}.csv", "w", newline="")
        else:
            sink = sys.stdout
        try:
            w = csv.writer(sink, lineterminator="\n")
            if full_events:
                traj = simulate(spec, N, start, T, seed=rseed)
                w.writerow(["t", "i", "j", *cols])
                w.writerow([0.0, "", "", *start.tolist()])
                for t, (i, j), x in zip(traj.times, traj.reactions, traj.states):
                    w.writerow([repr(float(t)), int(i), int(j), *x.tolist()])
                if ctx.out:
                    occ = occupation_measure(scale_trajectory(traj, spec))
                    with open(ctx.out / f"occupation_r{r}.jsonl", "w") as fh:
                        for s, xv, wt in zip(occ.s, occ.x, occ.w):
                            fh.write(json.dumps({"s": float(s), "x": xv.tolist(), "w": float(wt)}) + "\n")
            else:
                g = simulate_grid(spec, N, start, T, seed=rseed, n_points=points)
                w.writerow(["t", *cols])
                for t, x in zip(g.grid, g.states):
                    w.writerow([repr(float(t)), *x.tolist()])
        finally:
            if sink is not sys.stdout:
                sink.close()


@cli.command("equilibrium")
@_common
@click.option("--y", default=None, help="Slow coordinates at which to evaluate the fast map.")
def equilibrium_cmd(config, network, seed, out, replicas, workers, y):
    """Equilibrium vector, roots, reduced slow network and fast map."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    spec = ctx.spec
    sol = solve_invariant(spec)
    report = {"z": sol.z.tolist(), "ell": sol.ell.tolist(), "residual": sol.residual}
    if spec.slow.size:
        red = reduce_to_slow(spec)
        report["reduced"] = {"kept": [int(i) for i in red.kept], "kappa_bar": red.kappa_bar.tolist()}
        if spec.fast.size:
            yv = _floats(y) if y is not None else sol.ell[spec.slow - 1].tolist()
            report["fast_map"] = {"y": yv, "L": fast_equilibrium_map(spec, yv).tolist()}
    ctx.emit(report, "equilibrium.json")


@cli.command("reduce")
@_common
@click.option("--order", default=None, help="Elimination order of the fast species (1-based).")
def reduce_cmd(config, network, seed, out, replicas, workers, order):
    """Eliminate every fast species and print the slow rate matrix."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    red = reduce_to_slow(ctx.spec, _ints(order))
    ctx.emit({"kept": [int(i) for i in red.kept], "kappa_bar": red.kappa_bar.tolist()}, "reduced.json")


@cli.command("ode")
@_common
@click.option("--mode", type=click.Choice(["slow", "full", "reduced"]), default="slow")
@click.option("--N", "N", type=float, default=None, help="Scaling parameter (full mode).")
@click.option("--T", "T", type=float, default=None)
@click.option("--step", type=float, default=None, help="RK4 step; default T/1000.")
@click.option("--alpha", default=None, help="Initial point: slow coordinates (slow/reduced) or all (full).")
def ode_cmd(config, network, seed, out, replicas, workers, mode, N, T, step, alpha):
    """Integrate a limit ODE; CSV path plus JSON summary."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    spec = ctx.spec
    T = T if T is not None else float(ctx.doc.get("T", 1.0))
    start = _floats(alpha)
    sol = solve_invariant(spec)
    if mode == "full":
        N = _size(ctx, N)
        u0 = start if start is not None else (sol.ell * np.exp(np.log(N) / spec.k)).tolist()
        path = integrate_full_ode(spec, N, u0, T, step)
        fixed = sol.ell * np.exp(np.log(N) / spec.k)
        rhs_at_fixed = full_rhs(spec, N)(fixed)
        names = [f"u_{i}" for i in range(1, spec.n + 1)]
    else:
        if not spec.slow.size:
            raise NoSlowSpecies("network has no species with arity 1")
        if start is None:
            a = ctx.doc.get("alpha")
            start = np.asarray(a)[spec.slow - 1].tolist() if a is not None else sol.ell[spec.slow - 1].tolist()
        fixed = sol.ell[spec.slow - 1]
        if mode == "slow":
            path = integrate_slow_ode(spec, start, T, step)
            rhs_at_fixed = slow_rhs(spec)(fixed)
        else:
            red = reduce_to_slow(spec)
            path = integrate_reduced_ode(red, start, T, step)
            kb = red.kappa_bar
            rhs_at_fixed = kb[0, 1:] + fixed @ kb[1:, 1:] - fixed * kb[1:].sum(axis=1)
        names = [f"x_{i}" for i in spec.slow]
    summary = {
        "mode": mode,
        "T": T,
        "step": path.step,
        "start": path.values[0].tolist(),
        "end": path.values[-1].tolist(),
        "fixed_point": np.asarray(fixed).tolist(),
        "rhs_norm_at_fixed_point": float(np.abs(rhs_at_fixed).max()),
    }
    if ctx.out:
        ctx.out.mkdir(parents=True, exist_ok=True)
        with open(ctx.out / f"ode_{mode}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *names])
            for t, v in zip(path.grid, path.values):
                w.writerow([repr(float(t)), *(repr(float(c)) for c in v)])
    ctx.emit(summary, f"ode_{mode}.json")


@cli.command("entropy")
@_common
@click.option("--point", default=None, help="Point z (k-th powers); default twice the equilibrium.")
@click.option("--directions", type=click.IntRange(1), default=1000, help="Random unit directions.")
def entropy_cmd(config, network, seed, out, replicas, workers, point, directions):
    """Entropy value, gradient and the smallest sampled Hessian quadratic form."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    spec = ctx.spec
    z = np.asarray(_floats(point)) if point is not None else 2.0 * solve_invariant(spec).z
    if z.size != spec.n:
        raise click.BadParameter(f"--point needs {spec.n} entries")
    rng = np.random.default_rng(derive_seed(ctx.seed, 0))
    u = rng.normal(size=(directions, spec.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    q = [hessian_quadratic_form(spec, z, d) for d in u]
    g = entropy_gradient(spec, z)
    report = {
        "point": z.tolist(),
        "F": entropy_F(spec, z),
        "gradient": g.tolist(),
        "gradient_norm": float(np.linalg.norm(g)),
        "min_quadratic_form": float(min(q)),
        "directions": directions,
        "seed": ctx.seed,
    }
    ctx.emit(report, "entropy.json")
    if not (report["F"] >= 0 and report["min_quadratic_form"] > 0):
        raise ChecksFailed("entropy is negative or the Hessian is not positive")


@cli.command("stationary")
@_common
@click.option("--N", "N", type=float, default=None)
@click.option("--T", "T", type=float, default=None, help="Horizon; the first half is burn-in.")
@click.option("--alpha", default=None)
@click.option("--x0", default=None)
@click.option("--max-tv", type=float, default=None, help="Fail (exit 2) if any marginal TV reaches this.")
def stationary_cmd(config, network, seed, out, replicas, workers, N, T, alpha, x0, max_tv):
    """Compare long-run occupation with the product-form law."""
    ctx = _ctx(config, network, seed, out, replicas, workers)
    spec = ctx.spec
    N = _size(ctx, N)
    T = T if T is not None else float(ctx.doc.get("T", 500.0))
    start = _initial(ctx, spec, N, _floats(alpha), _ints(x0))
    reports = []
    for r in range(ctx.replicas):
        traj = simulate(spec, N, start, T, seed=derive_seed(ctx.seed, r))
        reports.append(compare_empirical_stationary(traj, spec, N, lattice_class(start, spec)).as_dict())
    report = {"N": N, "T": T, "seed": ctx.seed, "replicas": ctx.replicas, "x0": start.tolist(), "runs": reports}
    if max_tv is not None:
        report["max_tv"] = max_tv
        report["passed"] = all(max(run["tv"]) < max_tv for run in reports)
    ctx.emit(report, "stationary.json")
    if max_tv is not None and not report["passed"]:
        raise ChecksFailed("total variation above the threshold")


@cli.command("verify")
@_common
def verify_cmd(config, network, seed, out, replicas, workers):
    """Run the N-ladder experiment described by --config."""
    if not config:
        raise click.UsageError("verify needs --config")
    spec = load_network(network) if network else None
    cfg = load_config(config, spec=spec, seed=seed, replicas=replicas, workers=workers, out=out)
    summary = run_verification(cfg, out_dir=cfg.out or "verification")
    click.echo(json.dumps({"passed": summary["passed"], "trends": summary["trends"],
                           "thresholds": summary["thresholds"]}, indent=2, sort_keys=True))
    if not summary["passed"]:
        raise ChecksFailed("trend or threshold checks failed")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except ChecksFailed as exc:
        click.echo(f"checks failed: {exc}", err=True)
        return EXIT_CHECK_FAILED
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (KunaryError, ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
