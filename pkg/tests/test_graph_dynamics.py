import json

import numpy as np
import pytest

from boxdyn import (
    CubicalGrid,
    NodeNotRecurrent,
    PhaseSpace,
    PiecewiseExample1D,
    build_boxmap,
    condensation,
    downset,
    index_pair,
    morse_graph,
    verify_attracting_block,
)
from boxdyn.graph_dynamics import morse_graph_from_jsonable, tarjan_scc

from conftest import brute_sccs, digraph_boxmap, reachability_closure


class TestCondensation:
    def test_two_cycle_with_sink(self):
        # a=0, b=1, c=2; edges a->b, b->a, b->c, c->c
        bm = digraph_boxmap(3, [(0, 1), (1, 0), (1, 2), (2, 2)])
        cond = condensation(bm)
        assert np.array_equal(cond.members(cond.component_of(0)), [0, 1])
        assert cond.component_of(0) == cond.component_of(1)
        assert cond.is_recurrent(cond.component_of(0))
        assert cond.is_recurrent(cond.component_of(2))
        assert cond.dag_edges() == {(cond.component_of(0), cond.component_of(2))}

    def test_chain_has_no_recurrence(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 2)])
        cond = condensation(bm)
        assert cond.recurrent.size == 0
        assert cond.n_components == 3

    def test_single_self_loop(self):
        bm = digraph_boxmap(2, [(0, 0)])
        cond = condensation(bm)
        assert list(cond.recurrent) == [0]
        assert cond.is_recurrent(0)

    def test_component_ids_are_smallest_members(self):
        bm = digraph_boxmap(4, [(3, 2), (2, 3), (1, 1), (0, 1)])
        cond = condensation(bm)
        assert cond.component_of(3) == 2
        assert cond.component_of(2) == 2
        assert sorted(cond.recurrent) == [1, 2]

    def test_against_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 13))
            m = int(rng.integers(0, n * n))
            edges = {(int(rng.integers(0, n)), int(rng.integers(0, n)))
                     for _ in range(m)}
            cond = condensation(digraph_boxmap(n, edges))
            comps, rec = brute_sccs(n, edges)
            for comp, r in zip(comps, rec):
                cid = cond.component_of(comp[0])
                assert sorted(cond.members(cid).tolist()) == comp
                assert cond.is_recurrent(cid) == r
            assert cond.n_components == len(comps)

    def test_condensation_is_acyclic(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            edges = {(int(rng.integers(0, n)), int(rng.integers(0, n)))
                     for _ in range(int(rng.integers(0, 2 * n)))}
            cond = condensation(digraph_boxmap(n, edges))
            dag = cond.dag_edges()
            ids = sorted({c for e in dag for c in e} | set(cond.component_ids()))
            closure = reachability_closure(
                max(ids, default=0) + 1, list(dag)
            )
            assert not any(closure[c, c] for c in ids)

    def test_tarjan_matches_scipy_on_random_graphs(self, rng):
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components

        for _ in range(50):
            n = int(rng.integers(2, 30))
            dense = rng.random((n, n)) < 0.15
            adj = [np.flatnonzero(dense[v]) for v in range(n)]
            comp_of, comps = tarjan_scc(adj)
            ncomp, labels = connected_components(
                csr_matrix(dense), connection="strong"
            )
            assert len(comps) == ncomp
            # same partition, possibly different numbering
            for v in range(n):
                for w in range(n):
                    assert (comp_of[v] == comp_of[w]) == (labels[v] == labels[w])


class TestDownsetAndIndexPair:
    def bm(self):
        return digraph_boxmap(3, [(0, 1), (1, 0), (1, 2), (2, 2)])

    def test_downset_of_cycle(self):
        bm = self.bm()
        cond = condensation(bm)
        assert downset(bm, cond, cond.component_of(0)).tolist() == [0, 1, 2]

    def test_downset_of_sink(self):
        bm = self.bm()
        cond = condensation(bm)
        assert downset(bm, cond, cond.component_of(2)).tolist() == [2]

    def test_downset_requires_recurrent(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 2), (2, 2)])
        cond = condensation(bm)
        with pytest.raises(NodeNotRecurrent):
            downset(bm, cond, cond.component_of(0))

    def test_index_pair_sink(self):
        bm = self.bm()
        cond = condensation(bm)
        pair = index_pair(bm, cond, cond.component_of(2))
        assert pair.p1.tolist() == [2]
        assert pair.p0.tolist() == []

    def test_index_pair_cycle(self):
        bm = self.bm()
        cond = condensation(bm)
        pair = index_pair(bm, cond, cond.component_of(0))
        assert pair.p1.tolist() == [0, 1, 2]
        assert pair.p0.tolist() == [2]

    def test_index_pair_parts_forward_invariant(self):
        bm = self.bm()
        cond = condensation(bm)
        for cid in cond.recurrent:
            pair = index_pair(bm, cond, int(cid))
            assert verify_attracting_block(bm, pair.p1)
            assert verify_attracting_block(bm, pair.p0)

    def test_piecewise_top_node_p0_is_union_of_attracting_downsets(self):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [10])
        bm = build_boxmap(grid, PiecewiseExample1D(1.5), 1e-3)
        cond = condensation(bm)
        mg = morse_graph(cond)
        top = [q for q in mg.nodes if all(mg.leq(x, q) for x in mg.nodes)]
        assert len(top) == 1
        top = top[0]
        pair = index_pair(bm, cond, mg.component_ids[top])
        below = np.concatenate(
            [mg.downset_of(q) for q in mg.nodes if q != top and mg.leq(q, top)]
        )
        assert set(pair.p0.tolist()) == set(below.tolist())
        assert verify_attracting_block(bm, pair.p0)

    def test_downset_is_minimal_forward_invariant_superset(self):
        bm = self.bm()
        cond = condensation(bm)
        cid = cond.component_of(0)
        ds = downset(bm, cond, cid)
        region = set(cond.members(cid).tolist())
        for b in ds:
            if int(b) in region:
                continue
            smaller = [x for x in ds if x != b]
            assert not verify_attracting_block(bm, smaller)


class TestVerifyAttractingBlock:
    def test_all_boxes_true(self):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [5])
        bm = build_boxmap(grid, PiecewiseExample1D(1.5), 0.0)
        assert verify_attracting_block(bm, range(grid.box_count))

    def test_empty_true(self):
        bm = digraph_boxmap(2, [(0, 1)])
        assert verify_attracting_block(bm, [])

    def test_escaping_single_box_false(self):
        bm = digraph_boxmap(2, [(0, 1)])
        assert not verify_attracting_block(bm, [0])


class TestMorseGraph:
    def test_cycle_and_sink_order(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 0), (1, 2), (2, 2)])
        mg = morse_graph(condensation(bm))
        assert len(mg.nodes) == 2
        # node 0 = component {c}=2? nodes sorted by smallest member: {0,1} then {2}
        assert mg.region_of(0).tolist() == [0, 1]
        assert mg.region_of(1).tolist() == [2]
        assert mg.leq(1, 0) and not mg.leq(0, 1)
        assert mg.minimal_nodes() == [1]

    def test_no_recurrence_empty_graph(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 2)])
        mg = morse_graph(condensation(bm))
        assert mg.nodes == []

    def test_incomparable_self_loops(self):
        bm = digraph_boxmap(2, [(0, 0), (1, 1)])
        mg = morse_graph(condensation(bm))
        assert len(mg.nodes) == 2
        assert not mg.leq(0, 1) and not mg.leq(1, 0)

    def test_order_through_nonrecurrent_components(self):
        # 0<->1 -> 2 -> 3(self loop); 2 is a transient singleton
        bm = digraph_boxmap(4, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 3)])
        mg = morse_graph(condensation(bm))
        assert mg.leq(1, 0)  # node 1 = {3}, reachable from node 0 = {0,1}

    def test_partial_order_axioms(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 10))
            edges = {(int(rng.integers(0, n)), int(rng.integers(0, n)))
                     for _ in range(int(rng.integers(0, 3 * n)))}
            mg = morse_graph(condensation(digraph_boxmap(n, edges)))
            for a, b in mg.order:
                assert a != b  # irreflexive
                assert (b, a) not in mg.order  # antisymmetric
                for c in mg.nodes:
                    if (b, c) in mg.order:
                        assert (a, c) in mg.order  # transitive

    def test_order_soundness_witness_walk(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            edges = {(int(rng.integers(0, n)), int(rng.integers(0, n)))
                     for _ in range(int(rng.integers(0, 3 * n)))}
            mg = morse_graph(condensation(digraph_boxmap(n, edges)))
            closure = reachability_closure(n, edges)
            for a, b in mg.order:
                # some box of region b reaches some box of region a
                assert any(
                    closure[int(s), int(t)]
                    for s in mg.region_of(b)
                    for t in mg.region_of(a)
                )

    def test_hasse_edges_are_transitive_reduction(self):
        bm = digraph_boxmap(
            5, [(0, 0), (0, 1), (1, 2), (2, 2), (2, 3), (3, 4), (4, 4)]
        )
        mg = morse_graph(condensation(bm))
        # three nodes in a chain: node2={4} < node1={2} < node0={0}
        assert len(mg.nodes) == 3
        assert (2, 0) in mg.order  # transitive pair
        assert sorted(mg.hasse_edges()) == [(1, 0), (2, 1)]

    def test_dot_export(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 0), (1, 2), (2, 2)])
        mg = morse_graph(condensation(bm))
        dot = mg.to_dot()
        assert dot.startswith("digraph")
        assert "n0" in dot and "n1" in dot
        assert "n0 -> n1;" in dot  # arrow follows the flow: top -> lower

    def test_json_round_trip(self):
        bm = digraph_boxmap(3, [(0, 1), (1, 0), (1, 2), (2, 2)])
        mg = morse_graph(condensation(bm))
        doc = json.loads(mg.to_json())
        back = morse_graph_from_jsonable(doc)
        assert back.component_ids == mg.component_ids
        assert back.order == mg.order
        assert all(
            np.array_equal(a, b) for a, b in zip(back.regions, mg.regions)
        )


class TestScalableCondensationPath:
    def test_rect_form_matches_explicit_tarjan(self, rng):
        """Force the mask-based splitting path and compare with Tarjan."""
        import boxdyn.graph_dynamics as gd

        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [7])
        bm = build_boxmap(grid, PiecewiseExample1D(1.5), 2e-3)
        base = condensation(bm)
        old = gd._EDGE_LIMIT
        gd._EDGE_LIMIT = 0
        try:
            scalable = condensation(bm)
        finally:
            gd._EDGE_LIMIT = old
        assert np.array_equal(
            np.sort(base.recurrent), np.sort(scalable.recurrent)
        )
        for cid in base.recurrent:
            assert np.array_equal(
                base.members(int(cid)), scalable.members(int(cid))
            )
        assert morse_graph(base).order == morse_graph(scalable).order

    def test_rect_form_random_oracles(self, rng):
        import boxdyn.graph_dynamics as gd
        from boxdyn import CallableOracle

        grid = CubicalGrid(PhaseSpace([0.0, 0.0], [1.0, 1.0]), [3, 3])
        for trial in range(20):
            a = rng.random(4) * 2 - 1
            f = lambda x, a=a: np.array(
                [
                    0.5 + 0.4 * np.sin(a[0] * x[0] + a[1] * x[1]),
                    0.5 + 0.4 * np.cos(a[2] * x[0] + a[3] * x[1]),
                ]
            )
            bm = build_boxmap(grid, CallableOracle(f, 2.0, 2), 0.0)
            base = condensation(bm)
            old = gd._EDGE_LIMIT
            gd._EDGE_LIMIT = 0
            try:
                scalable = condensation(bm)
            finally:
                gd._EDGE_LIMIT = old
            assert np.array_equal(
                np.sort(base.recurrent), np.sort(scalable.recurrent)
            )
            for cid in base.recurrent:
                assert np.array_equal(
                    base.members(int(cid)), scalable.members(int(cid))
                )
