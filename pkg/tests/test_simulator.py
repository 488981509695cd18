import math

import numpy as np
import pytest
from scipy import stats

from kunary import figure1_spec, lattice_class
from kunary.errors import EmptyWindow, EventBudgetExceeded
from kunary.simulator import (
    Trajectory,
    alpha_initial_state,
    derive_seed,
    exit_time_diagnostics,
    make_rng,
    occupation_measure,
    reaction_rate,
    scale_trajectory,
    simulate,
    simulate_grid,
    step,
    time_average,
)

from conftest import chain_spec, random_irreducible, single_species


def hand_path(values, times, t_end, spec, N=1.0):
    values = np.asarray(values, dtype=np.int64).reshape(len(values), -1)
    return Trajectory(
        times=np.asarray(times, dtype=float),
        reactions=np.zeros((len(times), 2), dtype=np.int64),
        states=values[1:],
        t_end=t_end,
        N=N,
        x0=values[0],
    )


# reaction rates and single steps


def test_reaction_rate_examples():
    spec = single_species(2.0, 1.0, 2)
    assert reaction_rate(spec, 100, [0], 0, 1) == 200.0
    assert reaction_rate(spec, 100, [5], 1, 0) == 20.0
    assert reaction_rate(spec, 100, [1], 1, 0) == 0.0


def test_step_from_empty_single_species_must_be_input():
    spec = single_species(k=2)
    rng = make_rng(3)
    for _ in range(20):
        _, reaction, nxt = step(spec, 10, [0], rng)
        assert reaction == (0, 1) and nxt.tolist() == [2]


def test_step_chain_blocked_dimerisation():
    rng = make_rng(5)
    for _ in range(20):
        _, reaction, nxt = step(chain_spec(), 10, [1, 0], rng)
        assert reaction == (0, 1) and nxt.tolist() == [3, 0]


def test_sojourn_mean_and_law():
    spec = single_species(1.0, 1.0, 2)
    N, x = 50, [6]
    total = 1.0 * N + 6 * 5
    rng = make_rng(2024)
    s = np.array([step(spec, N, x, rng)[0] for _ in range(100_000)])
    assert abs(s.mean() * total - 1.0) < 0.01
    assert stats.kstest(s, "expon", args=(0, 1.0 / total)).pvalue > 0.01


def test_reaction_choice_frequencies():
    spec = figure1_spec()
    x = [3, 3, 2, 4]
    N = 2.0
    rates = {(i, j): reaction_rate(spec, N, x, i, j) for i, j in spec.reactions}
    total = sum(rates.values())
    rng = make_rng(8)
    counts = dict.fromkeys(rates, 0)
    draws = 40_000
    for _ in range(draws):
        counts[step(spec, N, x, rng)[1]] += 1
    active = [r for r in rates if rates[r] > 0]
    assert all(counts[r] == 0 for r in rates if rates[r] == 0)
    obs = [counts[r] for r in active]
    exp = [draws * rates[r] / total for r in active]
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_step_agrees_with_compiled_kernel():
    spec = figure1_spec()
    x0 = [3, 3, 2, 4]
    t, reaction, nxt = step(spec, 10, x0, make_rng(77))
    traj = simulate(spec, 10, x0, 10 * t, seed=77)
    assert traj.times[0] == t
    assert tuple(traj.reactions[0]) == reaction
    assert traj.states[0].tolist() == nxt.tolist()


# whole trajectories


def test_identical_seeds_give_identical_paths():
    spec = figure1_spec()
    a = simulate(spec, 100, [3, 3, 4, 100], 1.0, seed=derive_seed(9, 4))
    b = simulate(spec, 100, [3, 3, 4, 100], 1.0, seed=derive_seed(9, 4))
    c = simulate(spec, 100, [3, 3, 4, 100], 1.0, seed=derive_seed(9, 5))
    assert a.times.tobytes() == b.times.tobytes()
    assert a.states.tobytes() == b.states.tobytes()
    assert a.times.size != c.times.size or not np.array_equal(a.times, c.times)


def test_trajectory_invariants_on_random_networks():
    rng = np.random.default_rng(31)
    for trial in range(30):
        spec = random_irreducible(rng, kmax=3, lo=0.1, hi=10.0)
        x0 = rng.integers(0, 10, size=spec.n)
        traj = simulate(spec, 20, x0, 0.5, seed=trial, max_events=2_000_000)
        if traj.n_events == 0:
            continue
        assert np.all(np.diff(traj.times) > 0) and traj.times[-1] <= traj.t_end
        assert traj.states.min() >= 0
        assert np.all(traj.states % spec.k == lattice_class(x0, spec))
        prev = np.vstack((x0[None, :], traj.states[:-1]))
        jump = traj.states - prev
        for (i, j), d in zip(traj.reactions, jump):
            expect = np.zeros(spec.n, dtype=np.int64)
            if i:
                expect[i - 1] -= spec.k[i - 1]
            if j:
                expect[j - 1] += spec.k[j - 1]
            assert np.array_equal(d, expect)


def test_grid_snapshots_match_full_path():
    spec = figure1_spec()
    x0 = [3, 3, 4, 100]
    full = simulate(spec, 100, x0, 1.0, seed=12)
    grid = simulate_grid(spec, 100, x0, 1.0, seed=12, n_points=50)
    assert grid.n_events == full.n_events
    idx = np.searchsorted(full.times, grid.grid, side="right") - 1
    expect = np.vstack((np.asarray(x0)[None, :], full.states))[idx + 1]
    assert np.array_equal(grid.states, expect)


def test_event_budget():
    with pytest.raises(EventBudgetExceeded):
        simulate(single_species(), 1000, [0], 10.0, seed=0, max_events=100)


def test_mm_infinity_mean():
    spec = single_species(1.0, 1.0, 1)
    N = 10_000
    finals = [simulate_grid(spec, N, [0], 10.0, seed=derive_seed(1, r), n_points=1).states[-1, 0] for r in range(20)]
    assert abs(np.mean(finals) / N - (1 - math.exp(-10))) < 0.05


def test_event_count_matches_mean_flow():
    spec = single_species(1.0, 1.0, 1)
    N = 1000
    # rate lam N + mu X(t) with E X(t) = N (1 - e^-t), integrated over [0, 1]
    expected = N * (1 + math.exp(-1))
    counts = [simulate(spec, N, [0], 1.0, seed=derive_seed(2, r)).n_events for r in range(50)]
    assert abs(np.mean(counts) / expected - 1) < 0.10


# scaling, occupation measure and time averages


def test_scaling_examples():
    two = single_species(k=2)
    one = single_species(k=1)
    p = hand_path([[250]], [], 1.0, two, N=10_000)
    assert scale_trajectory(p, two).values[0, 0] == pytest.approx(2.5, rel=1e-15)
    p = hand_path([[250]], [], 1.0, one, N=10_000)
    assert scale_trajectory(p, one).values[0, 0] == pytest.approx(0.025, rel=1e-15)
    mixed = chain_spec()
    p = hand_path([[4, 7], [6, 7]], [0.3], 1.0, mixed, N=1)
    assert np.array_equal(scale_trajectory(p, mixed).values, [[4, 7], [6, 7]])


def test_constant_path_is_one_atom():
    spec = single_species(k=1)
    occ = occupation_measure(scale_trajectory(hand_path([[3]], [], 2.5, spec), spec))
    assert occ.w.tolist() == [2.5] and occ.s.tolist() == [1.25]


def test_occupation_mass_equals_horizon():
    spec = figure1_spec()
    traj = simulate(spec, 1000, [6, 6, 30, 1250], 1.0, seed=4)
    occ = occupation_measure(scale_trajectory(traj, spec))
    assert abs(occ.total_mass - 1.0) <= traj.n_events * np.finfo(float).eps
    assert np.all(occ.w > 0)


def test_occupation_integral_equals_time_average():
    spec = single_species(k=1)
    times = [0.05, 0.1, 0.22, 0.3, 0.41, 0.5, 0.64, 0.7, 0.83, 0.95]
    vals = [[4], [5], [4], [3], [4], [5], [6], [5], [4], [5], [6]]
    st = scale_trajectory(hand_path(vals, times, 1.0, spec), spec)
    occ = occupation_measure(st)
    by_hand = sum(v[0] * (b - a) for v, a, b in zip(vals, [0.0, *times], [*times, 1.0]))
    assert occ.integrate(lambda s, x: x[:, 0]) == pytest.approx(by_hand, abs=1e-14)
    assert time_average(st, 1, (0.0, 1.0)) == pytest.approx(by_hand, abs=1e-14)


def test_time_average_examples():
    spec = single_species(k=1)
    st = scale_trajectory(hand_path([[7]], [], 3.0, spec), spec)
    assert time_average(st, 1, (0.5, 2.0)) == 7.0
    st = scale_trajectory(hand_path([[0], [2]], [0.5], 1.0, spec), spec)
    assert time_average(st, 1, (0.0, 1.0)) == 1.0
    with pytest.raises(EmptyWindow):
        time_average(st, 1, (0.5, 0.5))


def test_time_average_concentrates_at_one():
    spec = single_species(1.0, 1.0, 2)
    avgs = [
        time_average(scale_trajectory(simulate(spec, 10_000, [200], 1.0, seed=derive_seed(3, r)), spec), 1, (0.1, 1.0))
        for r in range(5)
    ]
    assert abs(np.mean(avgs) - 1.0) < 0.05


# exit diagnostics


def test_exit_diagnostics_never_and_immediately():
    spec = single_species(k=2)
    st = scale_trajectory(simulate(spec, 100, [10], 1.0, seed=1), spec)
    assert exit_time_diagnostics(st, spec, 100, [1e-9], [1e9]) == (None, None)
    H, _ = exit_time_diagnostics(st, spec, 100, [0.95], [1e9])
    assert H == 0.0


def test_single_species_containment_fraction():
    spec = single_species(1.0, 1.0, 2)
    N, hits = 10_000, 0
    for r in range(100):
        st = scale_trajectory(simulate(spec, N, [100], 1.0, seed=derive_seed(17, r)), spec)
        H, Tx = exit_time_diagnostics(st, spec, N, [0.5], [2.0])
        hits += H is not None or Tx is not None
    assert hits / 100 <= 0.05


def test_alpha_initial_state_rounds_down_on_residue_zero():
    spec = figure1_spec()
    x = alpha_initial_state(spec, 10_000, [1.0, 1.0, 1.0, 1.25])
    assert x.tolist() == [21, 21, 100, 12500]
    assert np.all(x % spec.k == 0)
