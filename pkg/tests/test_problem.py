import numpy as np
import pytest

from fdsalloc.graph import (
    complete_graph,
    cycle_graph,
    erdos_renyi_graph,
    path_graph,
    star_graph,
)
from fdsalloc.lp_oracle import solve_exact
from fdsalloc.problem import (
    FdsInstance,
    TOL_FEAS,
    feasible,
    min_slack,
    objective,
    optimum_bounds,
    recovery_probability,
    regularized_objective,
)


def _brute_slack(x, g):
    # independent route: explicit per-node neighborhood sums
    return min(sum(x[j] for j in g.omega(i)) for i in range(g.n)) - 1.0


def test_objective_values():
    assert objective(np.ones(5)) == 5.0
    assert objective(np.zeros(4)) == 0.0
    assert objective(np.full(6, 1 / 3)) == pytest.approx(2.0)


def test_objective_length_check():
    with pytest.raises(ValueError):
        objective(np.ones(4), n=5)


def test_regularized_objective_values():
    assert regularized_objective(np.zeros(3), 0.5) == 0.0
    assert regularized_objective(np.ones(4), 1.0) == pytest.approx(6.0)
    assert regularized_objective(np.array([0.0, 1.0, 0.0]), 0.1) == pytest.approx(1.05)


def test_regularized_matches_plain_at_zero_delta():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.random(8)
        assert regularized_objective(x, 0.0) == pytest.approx(objective(x))


def test_min_slack_all_ones_and_zero():
    for g in (cycle_graph(6), star_graph(5), path_graph(4)):
        assert min_slack(np.ones(g.n), g) >= 0.0
        assert min_slack(np.zeros(g.n), g) == pytest.approx(-1.0)


def test_min_slack_p3_center_only():
    g = path_graph(3)
    x = np.array([0.0, 1.0, 0.0])
    # all three neighborhood sums equal 1, so the worst surplus is exactly 0
    assert min_slack(x, g) == pytest.approx(0.0, abs=1e-15)
    assert min_slack(x, g) == pytest.approx(_brute_slack(x, g))


def test_min_slack_matches_brute_force():
    rng = np.random.default_rng(3)
    for seed in range(10):
        g = erdos_renyi_graph(14, 0.3, seed=seed)
        x = rng.random(g.n)
        assert min_slack(x, g) == pytest.approx(_brute_slack(x, g), abs=1e-12)


def test_min_slack_length_mismatch():
    with pytest.raises(ValueError):
        min_slack(np.ones(4), cycle_graph(6))


def test_recovery_probability_cases():
    g = path_graph(3)
    inst = FdsInstance(graph=g, delta=0.1)
    assert recovery_probability(np.ones(3), inst) == pytest.approx(1.0)
    assert recovery_probability(np.zeros(3), inst) == 0.0
    # storage only at the left end: nodes 0 and 1 see it, node 2 does not
    assert recovery_probability(np.array([1.0, 0.0, 0.0]), inst) == pytest.approx(2 / 3)


def test_recovery_one_iff_feasible():
    rng = np.random.default_rng(7)
    for seed in range(25):
        g = erdos_renyi_graph(10, 0.35, seed=seed)
        p = rng.random(g.n) + 0.05
        inst = FdsInstance(graph=g, delta=0.2, access_probs=p / p.sum())
        x = rng.random(g.n) * 1.2
        assert (recovery_probability(x, inst) == pytest.approx(1.0)) == (
            min_slack(x, g) >= -TOL_FEAS
        )


def test_instance_validation():
    g = cycle_graph(6)
    with pytest.raises(ValueError):
        FdsInstance(graph=g, delta=0.0)
    with pytest.raises(ValueError):
        FdsInstance(graph=g, delta=0.1, access_probs=np.full(6, 0.2))  # sums to 1.2
    bad = np.array([0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        FdsInstance(graph=g, delta=0.1, access_probs=bad)  # zero entry
    uniform = FdsInstance(graph=g, delta=0.1)
    assert uniform.access_probs == pytest.approx(np.full(6, 1 / 6))


def test_optimum_bounds_regular_graphs():
    assert optimum_bounds(cycle_graph(6)) == (2.0, 2.0)
    assert optimum_bounds(complete_graph(7)) == (1.0, 1.0)


def test_optimum_bounds_star():
    g = star_graph(5)
    lo, hi = optimum_bounds(g)
    assert (lo, hi) == (1.0, 2.5)
    assert lo <= solve_exact(g).objective <= hi


def test_bounds_bracket_oracle_on_random_graphs():
    for seed in range(20):
        g = erdos_renyi_graph(4 + seed, 0.3, seed=seed)
        lo, hi = optimum_bounds(g)
        obj = solve_exact(g).objective
        assert lo - 1e-8 <= obj <= hi + 1e-8


def test_feasible_helper():
    g = cycle_graph(6)
    assert feasible(np.ones(6), g)
    assert not feasible(np.zeros(6), g)
