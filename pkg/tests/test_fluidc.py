import itertools

import numpy as np
import pytest

from fluidcom.fluidc import (FluidState, ParameterError, allocate_k, best_k_by_modularity,
                             init_communities, run_fluidc, run_fluidc_disconnected, superstep,
                             update_vertex)
from fluidcom.graph import Graph, connected_components
from fluidcom.metrics import Partition, modularity, nmi_geometric

from conftest import clique, make_graph, random_connected_graph, triangle, two_triangles


def state(assign, k):
    c = np.array(assign, dtype=np.int64)
    return FluidState(c, np.bincount(c[c >= 0], minlength=k).astype(np.int64), k)


def ego_counts(st, g, v):
    """Per-community member count of v's ego network (v only if assigned)."""
    counts = {}
    for w in [v, *g.neighbors(v).tolist()]:
        c = int(st.community_of[w])
        if c >= 0:
            counts[c] = counts.get(c, 0) + 1
    return counts


class TestInit:
    def test_k_equals_n(self, rng):
        g = random_connected_graph(rng, 10)
        st = init_communities(g, 10, rng)
        assert sorted(st.community_of.tolist()) == list(range(10))
        assert all(st.density(c) == 1.0 for c in range(10))

    def test_triangle_k1(self, rng):
        st = init_communities(triangle(), 1, rng)
        assert st.assigned_count == 1
        assert st.density(0) == 1.0
        assert np.count_nonzero(st.community_of == -1) == 2

    @pytest.mark.parametrize("k", [0, 6])
    def test_bad_k(self, rng, k):
        with pytest.raises(ParameterError):
            init_communities(random_connected_graph(rng, 5), k, rng)

    def test_seeds_are_uniform(self):
        hits = np.zeros(6)
        rng = np.random.default_rng(0)
        for _ in range(6000):
            hits += init_communities(clique(6), 2, rng).community_of >= 0
        assert np.allclose(hits / 6000, 1 / 3, atol=0.03)


class TestUpdateVertex:
    def test_tie_keeps_current_community(self, rng):
        # triangle 0-1-2 plus pendant 3 on vertex 2; red = {0,1}, green = {2,3}
        g = make_graph(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
        st = state([0, 0, 1, 1], 2)
        # red: 0.5 + 0.5 = 1.0; green: 0.5 + 0.5 = 1.0
        assert not update_vertex(st, g, 2, rng)
        assert st.community_of.tolist() == [0, 0, 1, 1]

    def test_singleton_community_defends_its_vertex(self, rng):
        # star center 0 is a blue singleton, leaves red: blue 1.0 vs red 3 * 1/3
        g = make_graph(4, [(0, 1), (0, 2), (0, 3)])
        st = state([1, 0, 0, 0], 2)
        assert not update_vertex(st, g, 0, rng)
        assert st.community_size.tolist() == [3, 1]

    def test_isolated_assigned_vertex_unchanged(self, rng):
        st = state([0, 1], 2)
        assert not update_vertex(st, make_graph(2, []), 0, rng)

    def test_unassigned_vertex_without_assigned_neighbors_stays(self, rng):
        g = make_graph(3, [(0, 1), (1, 2)])
        st = state([0, -1, -1], 1)
        assert not update_vertex(st, g, 2, rng)
        assert st.community_of[2] == -1

    def test_unassigned_vertex_joins_neighbor(self, rng):
        g = make_graph(3, [(0, 1), (1, 2)])
        st = state([0, -1, -1], 1)
        assert update_vertex(st, g, 1, rng)
        assert st.community_of.tolist() == [0, 0, -1]
        assert st.community_size.tolist() == [2]
        assert st.density(0) == 0.5

    def test_denser_community_wins_and_sizes_update_immediately(self, rng):
        # vertex 0 (red, red has 3 members elsewhere) sees 1 red neighbor and 1 green singleton
        g = make_graph(6, [(0, 1), (0, 2), (3, 4), (4, 5)])
        st = state([0, 0, 1, 0, 0, 0], 2)
        # red: (1 + 1) / 5 = 0.4, green: 1 / 1 = 1.0
        assert update_vertex(st, g, 0, rng)
        assert st.community_of[0] == 1
        assert st.community_size.tolist() == [4, 2]

    def test_random_choice_among_tied_candidates(self):
        # unassigned center between two singleton communities: both tie at 1.0
        g = make_graph(3, [(0, 1), (1, 2)])
        seen = set()
        for s in range(50):
            st = state([0, -1, 1], 2)
            update_vertex(st, g, 1, np.random.default_rng(s))
            seen.add(int(st.community_of[1]))
        assert seen == {0, 1}

    def test_locality(self, rng):
        """Changing a vertex outside v's ego net only acts on v through the density table."""
        for _ in range(200):
            g = random_connected_graph(rng, 30, 0.08)
            k = int(rng.integers(2, 6))
            st = init_communities(g, k, rng)
            for _ in range(3):
                superstep(st, g, rng)
            v = int(rng.integers(30))
            outside = sorted(set(range(30)) - {v} - set(g.neighbors(v).tolist()))
            movable = [w for w in outside if st.community_of[w] >= 0
                       and st.community_size[st.community_of[w]] > 1]
            if not movable:
                continue
            w = movable[int(rng.integers(len(movable)))]
            before = ego_counts(st, g, v)
            old, new = int(st.community_of[w]), int((st.community_of[w] + 1) % k)
            st.community_of[w] = new
            st.community_size[old] -= 1
            st.community_size[new] += 1
            assert ego_counts(st, g, v) == before
            scores = {c: n / st.community_size[c] for c, n in before.items()}
            if not scores:
                continue
            best = max(scores.values())
            cands = {c for c, s in scores.items() if s >= best * (1 - 1e-12)}
            cur = int(st.community_of[v])
            update_vertex(st, g, v, rng)
            if cur in cands:
                assert st.community_of[v] == cur
            else:
                assert int(st.community_of[v]) in cands


class TestSuperstep:
    def test_fixed_point_gives_zero(self, rng):
        g = two_triangles(bridge=True)
        st = state([0, 0, 0, 1, 1, 1], 2)
        assert superstep(st, g, rng) == 0

    def test_triangle_with_three_fluids_never_moves(self, rng):
        st = init_communities(triangle(), 3, rng)
        start = st.community_of.copy()
        for _ in range(5):
            assert superstep(st, triangle(), rng) == 0
        assert np.array_equal(st.community_of, start)

    def test_single_fluid_absorbs_everything(self, rng):
        g = random_connected_graph(rng, 40, 0.05)
        st = init_communities(g, 1, rng)
        for _ in range(40):
            if superstep(st, g, rng) == 0 and st.fully_assigned:
                break
        assert st.community_of.tolist() == [0] * 40
        assert superstep(st, g, rng) == 0

    def test_state_invariants_hold_throughout(self, rng):
        for _ in range(20):
            g = random_connected_graph(rng, 50, 0.06)
            st = init_communities(g, int(rng.integers(1, 20)), rng)
            for _ in range(10):
                superstep(st, g, rng)
                st.check()


class TestRunFluidc:
    def test_bridged_triangles_split_is_modularity_optimal(self):
        g = two_triangles(bridge=True)
        # brute-force every 2-partition: the triangle split is the unique maximum
        scores = {}
        for bits in itertools.product([0, 1], repeat=6):
            if 0 < sum(bits) < 6:
                scores[Partition(list(bits))] = modularity(g, bits)
        best = max(scores.values())
        winners = [p for p, q in scores.items() if q == pytest.approx(best, abs=1e-12)]
        target = Partition([0, 0, 0, 1, 1, 1])
        assert winners == [target]
        hits = sum(run_fluidc(g, 2, np.random.default_rng(s)).partition == target for s in range(100))
        assert hits >= 95

    def test_k_equals_n_gives_identity(self, rng):
        g = random_connected_graph(rng, 12, 0.2)
        res = run_fluidc(g, 12, rng)
        assert res.converged and res.supersteps <= 2
        assert res.partition.block_count == 12

    def test_clique_keeps_both_fluids(self):
        for s in range(20):
            res = run_fluidc(clique(6), 2, np.random.default_rng(s))
            assert res.converged
            assert res.partition.block_count == 2

    def test_rejects_disconnected(self, rng):
        with pytest.raises(ParameterError):
            run_fluidc(two_triangles(), 2, rng)

    def test_exactly_k_communities_and_converged_is_a_fixed_point(self, rng):
        for _ in range(30):
            g = random_connected_graph(rng, 60, 0.05)
            k = int(rng.integers(1, 15))
            res = run_fluidc(g, k, rng)
            assert res.partition.block_count == k
            if res.converged:
                lab = res.partition.labels
                st = state(lab, k)
                assert superstep(st, g, rng) == 0

    def test_determinism(self):
        g = random_connected_graph(np.random.default_rng(3), 80, 0.05)
        a = run_fluidc(g, 5, np.random.default_rng(9))
        b = run_fluidc(g, 5, np.random.default_rng(9))
        assert a.partition == b.partition
        assert (a.supersteps, a.converged) == (b.supersteps, b.converged)

    def test_max_supersteps_cap_reported(self):
        g = random_connected_graph(np.random.default_rng(1), 300, 0.02)
        full = run_fluidc(g, 30, np.random.default_rng(2))
        assert full.converged and full.supersteps >= 3
        capped = run_fluidc(g, 30, np.random.default_rng(2), max_supersteps=full.supersteps - 1)
        assert not capped.converged
        assert capped.supersteps == full.supersteps - 1

    def test_cap_never_leaves_vertices_unassigned(self):
        path = make_graph(30, [(i, i + 1) for i in range(29)])
        res = run_fluidc(path, 1, np.random.default_rng(0), max_supersteps=1)
        assert res.partition.block_count == 1 and res.partition.n == 30


class TestDisconnected:
    def test_two_triangles(self, rng):
        g = two_triangles()
        res = run_fluidc_disconnected(g, 2, rng)
        comps = connected_components(g).component_of
        assert nmi_geometric(res.partition, comps) == 1.0

    def test_connected_graph_matches_run_fluidc(self):
        g = random_connected_graph(np.random.default_rng(4), 40, 0.1)
        a = run_fluidc(g, 4, np.random.default_rng(5))
        b = run_fluidc_disconnected(g, 4, np.random.default_rng(5))
        assert a.partition == b.partition and a.supersteps == b.supersteps

    @pytest.mark.parametrize("sizes, k, expected", [
        ([90, 10], 10, [9, 1]),
        ([3, 3], 2, [1, 1]),
        ([50, 30, 20], 10, [5, 3, 2]),
        ([98, 1, 1], 5, [3, 1, 1]),
        ([5, 5, 5], 3, [1, 1, 1]),
        ([2, 1], 3, [2, 1]),
    ])
    def test_allocation(self, sizes, k, expected):
        alloc = allocate_k(sizes, k)
        assert alloc == expected
        assert sum(alloc) == k

    def test_allocation_errors(self):
        with pytest.raises(ParameterError):
            allocate_k([3, 3, 3], 2)
        with pytest.raises(ParameterError):
            allocate_k([2, 2], 5)

    def test_labels_disjoint_across_components(self, rng):
        g = make_graph(9, [(0, 1), (1, 2), (3, 4), (4, 5), (5, 3), (6, 7)])
        res = run_fluidc_disconnected(g, 5, rng)
        assert res.partition.block_count == 5
        comps = connected_components(g).component_of
        for c in range(res.partition.block_count):
            assert len(set(comps[res.partition.labels == c].tolist())) == 1

    def test_k_below_component_count(self, rng):
        with pytest.raises(ParameterError):
            run_fluidc_disconnected(two_triangles(), 1, rng)


class TestBestK:
    def test_two_triangles(self, rng):
        res, k = best_k_by_modularity(two_triangles(), 2, 4, 5, rng)
        assert k == 2
        assert modularity(two_triangles(), res.partition) == pytest.approx(0.5, abs=1e-12)

    def test_degenerate_range(self, rng):
        g = make_graph(10, [*itertools.combinations(range(5), 2),
                            *itertools.combinations(range(5, 10), 2), (4, 5)])
        res, k = best_k_by_modularity(g, 2, 2, 3, rng)
        assert k == 2 and res.partition.block_count == 2

    def test_single_k1(self, rng):
        g = random_connected_graph(rng, 20)
        res, k = best_k_by_modularity(g, 1, 1, 3, rng)
        assert k == 1
        assert modularity(g, res.partition) == pytest.approx(0.0, abs=1e-12)

    def test_returns_the_maximum_over_trials(self):
        g = random_connected_graph(np.random.default_rng(8), 60, 0.06)
        res, k = best_k_by_modularity(g, 2, 6, 3, np.random.default_rng(1))
        from fluidcom.fluidc import _trial_rng
        base = int(np.random.default_rng(1).integers(2**63))
        qs = [modularity(g, run_fluidc_disconnected(g, kk, _trial_rng(base, kk, t)).partition)
              for kk in range(2, 7) for t in range(3)]
        assert modularity(g, res.partition) == pytest.approx(max(qs), abs=1e-12)

    def test_bad_range(self, rng):
        with pytest.raises(ParameterError):
            best_k_by_modularity(triangle(), 3, 2, 1, rng)
