import itertools
import math

import numpy as np
import pytest

from fdsalloc.coding import (
    CodedStore,
    disseminate,
    flood_schedule,
    gf_inv,
    gf_mul,
    gf_rank,
    try_recover,
)
from fdsalloc.graph import StorageGraph, cycle_graph, erdos_renyi_graph, star_graph
from fdsalloc.pcm_solver import SolverParams, solve
from fdsalloc.problem import FdsInstance, min_slack


# -- field arithmetic, checked against bit-level multiplication -------------------


def _peasant_mul(a, b):
    # shift-and-add polynomial multiplication mod x^8+x^4+x^3+x+1
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
    return r


def test_mul_matches_bitwise_oracle():
    rng = np.random.default_rng(0)
    pairs = rng.integers(0, 256, size=(500, 2))
    for a, b in pairs:
        assert gf_mul(int(a), int(b)) == _peasant_mul(int(a), int(b))
    assert gf_mul(0x53, 0xCA) == 1  # classic inverse pair in this field


def test_inverses():
    for a in range(1, 256):
        assert gf_mul(a, gf_inv(a)) == 1
    with pytest.raises(ZeroDivisionError):
        gf_inv(0)


# -- rank ---------------------------------------------------------------------------


def _rank_by_row_space(mat):
    # brute force: grow the span row by row; its size is 256^rank
    span = {(0,) * mat.shape[1]}
    for row in mat:
        if tuple(int(v) for v in row) in span:
            continue
        span = {
            tuple(s[i] ^ _peasant_mul(c, int(row[i])) for i in range(len(row)))
            for s in span
            for c in range(256)
        }
    return round(math.log(len(span), 256))


def _det_char2(sub):
    # Leibniz sum; +/- coincide in characteristic 2
    n = sub.shape[0]
    total = 0
    for perm in itertools.permutations(range(n)):
        prod = 1
        for i in range(n):
            prod = _peasant_mul(prod, int(sub[i, perm[i]]))
            if prod == 0:
                break
        total ^= prod
    return total


def _rank_by_minors(mat):
    nrows, ncols = mat.shape
    for r in range(min(nrows, ncols), 0, -1):
        for rows in itertools.combinations(range(nrows), r):
            for cols in itertools.combinations(range(ncols), r):
                if _det_char2(mat[np.ix_(rows, cols)]) != 0:
                    return r
    return 0


def test_rank_small_cases():
    assert gf_rank(np.zeros((3, 4), dtype=np.uint8)) == 0
    assert gf_rank(np.eye(4, dtype=np.uint8)) == 4
    assert gf_rank(np.array([[1, 2], [2, 4]], dtype=np.uint8)) == 1  # second row is 2x the first
    assert gf_rank(np.array([[1, 1], [1, 2]], dtype=np.uint8)) == 2  # det = 2 ^ 1 = 3
    assert gf_rank(np.empty((0, 4), dtype=np.uint8)) == 0


def test_rank_matches_row_space_enumeration():
    # matrices built from <= 2 base rows; enumeration is exact up to rank 2
    rng = np.random.default_rng(5)
    for trial in range(20):
        m = int(rng.integers(2, 5))
        base = rng.integers(0, 256, size=(2, m), dtype=np.uint8)
        rows = []
        for _ in range(int(rng.integers(1, 6))):
            c0, c1 = int(rng.integers(256)), int(rng.integers(256))
            rows.append(
                [_peasant_mul(c0, int(base[0, i])) ^ _peasant_mul(c1, int(base[1, i]))
                 for i in range(m)]
            )
        mat = np.array(rows, dtype=np.uint8)
        assert gf_rank(mat) == _rank_by_row_space(mat)


def test_rank_matches_minor_oracle():
    rng = np.random.default_rng(9)
    for trial in range(30):
        nrows = int(rng.integers(1, 6))
        ncols = int(rng.integers(1, 5))
        mat = rng.integers(0, 256, size=(nrows, ncols), dtype=np.uint8)
        if trial % 3 == 0:
            mat[0] = 0  # force some degeneracy
        if nrows >= 2 and trial % 4 == 0:
            mat[1] = mat[0]
        assert gf_rank(mat) == _rank_by_minors(mat)


def test_rank_bounded_by_shape():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mat = rng.integers(0, 256, size=(int(rng.integers(1, 8)), 5), dtype=np.uint8)
        assert gf_rank(mat) <= min(mat.shape)


# -- dissemination --------------------------------------------------------------------


def test_counts_full_allocation():
    g = cycle_graph(6)
    store = disseminate(g, np.ones(6), 4, seed=0)
    assert all(c.shape == (4, 4) for c in store.per_node_combos)


def test_counts_zero_allocation_node():
    g = star_graph(4)
    x = np.array([1.0, 0.0, 0.5, 1.0])
    store = disseminate(g, x, 4, seed=1)
    assert store.per_node_combos[1].shape[0] == 0
    assert store.per_node_combos[2].shape[0] == 2


def test_counts_cycle_third():
    g = cycle_graph(6)
    store = disseminate(g, np.full(6, 1 / 3), 6, seed=2)
    assert all(c.shape[0] == 2 for c in store.per_node_combos)
    for i in range(6):
        assert sum(store.per_node_combos[j].shape[0] for j in g.omega(i)) == 6


def test_counts_capped_at_m():
    g = StorageGraph(2, [(0, 1)])
    store = disseminate(g, np.array([1.8, 2.0]), 5, seed=0)
    assert store.per_node_combos[0].shape[0] == 5
    assert store.per_node_combos[1].shape[0] == 5


def test_disseminate_validation():
    g = cycle_graph(6)
    with pytest.raises(ValueError):
        disseminate(g, np.ones(6), 0, seed=0)
    with pytest.raises(ValueError):
        disseminate(g, np.full(6, 2.5), 4, seed=0)
    with pytest.raises(ValueError):
        disseminate(g, np.ones(5), 4, seed=0)


def test_disseminate_deterministic():
    g = erdos_renyi_graph(12, 0.3, seed=3)
    x = np.full(12, 0.4)
    a = disseminate(g, x, 8, seed=42)
    b = disseminate(g, x, 8, seed=42)
    assert all(np.array_equal(r, s) for r, s in zip(a.per_node_combos, b.per_node_combos))
    c = disseminate(g, x, 8, seed=43)
    assert any(
        not np.array_equal(r, s) for r, s in zip(a.per_node_combos, c.per_node_combos)
    )


def test_flood_visits_every_node_once_over_graph_edges():
    for seed in range(10):
        g = erdos_renyi_graph(15, 0.2, seed=seed)  # often disconnected
        sched = flood_schedule(g, seed)
        assert sorted(sched.order) == list(range(g.n))
        edge_set = set(g.edges())
        for u, v in sched.tree_edges:
            assert (min(u, v), max(u, v)) in edge_set
        # one source per component, each inside its component
        comps = _components(g)
        assert len(sched.sources) == len(comps)
        for src, comp in zip(sched.sources, comps):
            assert src in comp


def _components(g):
    seen = [False] * g.n
    out = []
    for i in range(g.n):
        if seen[i]:
            continue
        comp, stack = [], [i]
        seen[i] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in g.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        out.append(sorted(comp))
    return out


def test_ceiling_preserves_coverage():
    # exact neighborhood sums >= 1 imply the rounded-up counts cover m parts
    rng = np.random.default_rng(17)
    for seed in range(10):
        g = erdos_renyi_graph(10, 0.4, seed=seed)
        x = rng.random(g.n)
        from fdsalloc.problem import neighborhood_sums

        x = x / neighborhood_sums(x, g).min()  # sums now >= 1 exactly
        m = int(rng.integers(2, 40))
        for i in range(g.n):
            assert sum(math.ceil(x[j] * m - 1e-9) for j in g.omega(i)) >= m


# -- recovery ---------------------------------------------------------------------------


def test_recovery_fails_below_m_rows():
    g = cycle_graph(6)
    x = np.full(6, 0.1)  # 7 combos per node, 21 per neighborhood < 64
    for seed in range(20):
        store = disseminate(g, x, 64, seed=seed)
        for node in range(6):
            res = try_recover(store, g, node)
            assert not res.success
            assert res.rank < 64


def test_recovery_rate_with_exactly_m_rows():
    # each neighborhood holds exactly m = 6 random vectors; full rank is the
    # typical but not certain outcome
    g = cycle_graph(6)
    x = np.full(6, 1 / 3)
    hits = trials = 0
    for seed in range(200):
        store = disseminate(g, x, 6, seed=seed)
        res = try_recover(store, g, seed % 6)
        trials += 1
        hits += int(res.success)
    assert hits / trials >= 0.95


def test_recovery_from_solver_output():
    g = cycle_graph(6)
    x, _ = solve(FdsInstance(graph=g, delta=0.1), SolverParams(epsilon=0.1))
    assert min_slack(x, g) >= -1e-9
    ok = 0
    for seed in range(100):
        store = disseminate(g, x, 64, seed=seed)
        if all(try_recover(store, g, node).success for node in range(6)):
            ok += 1
    assert ok / 100 >= 0.99


def test_star_center_allocation_recovers_everywhere():
    g = star_graph(5)
    x = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    store = disseminate(g, x, 16, seed=7)
    for node in range(5):
        res = try_recover(store, g, node)
        assert res.success and res.rank == 16


def test_recovery_rank_never_exceeds_collected_rows():
    g = star_graph(4)
    x = np.array([0.5, 0.25, 0.0, 0.25])
    store = disseminate(g, x, 8, seed=3)
    for node in range(4):
        collected = sum(store.per_node_combos[j].shape[0] for j in g.omega(node))
        res = try_recover(store, g, node)
        assert res.rank <= min(8, collected)


def test_try_recover_validates_node():
    g = cycle_graph(6)
    store = disseminate(g, np.ones(6), 4, seed=0)
    with pytest.raises(ValueError):
        try_recover(store, g, 6)
