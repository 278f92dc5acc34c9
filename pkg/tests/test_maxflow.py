import numpy as np
import pytest

from spmrf.maxflow import (
    FlowGraph,
    FlowGraphBuilder,
    SubmodularityError,
    build_st_graph,
    max_flow,
    solve,
    to_dimacs,
)
from spmrf.mrf import (
    GridGeometry,
    MrfError,
    NeighborPair,
    PairwiseWeights,
    PixelMrf,
    brute_force_minimize,
    energy,
)
from spmrf.partition import identity_partition
from spmrf.superpixelize import lift, superpixelize
from testutil import (
    cut_value_oracle,
    min_cut_oracle,
    random_partition,
    random_submodular_mrf,
)


def example_1x2_potts():
    return PixelMrf.from_pairs(
        GridGeometry(2, 1), [1.0, -2.0],
        [(NeighborPair(0, 1), PairwiseWeights(0.0, 3.0, 3.0, 0.0))])


class TestMaxFlow:
    def test_path_graph_flow_one(self):
        b = FlowGraphBuilder(2)
        b.add_source(0, 2.0)
        b.add_arc(0, 1, 1.0)
        b.add_sink(1, 2.0)
        graph = b.build()
        flow, side = max_flow(graph)
        assert flow == pytest.approx(min_cut_oracle(graph), abs=1e-12)
        assert flow == pytest.approx(1.0)

    def test_empty_graph(self):
        graph = FlowGraphBuilder(0).build()
        flow, side = max_flow(graph)
        assert flow == 0.0
        assert side.shape == (0,)

    def test_three_independent_paths(self):
        b = FlowGraphBuilder(3)
        for v in range(3):
            b.add_source(v, 1.0)
            b.add_sink(v, 1.0)
        graph = b.build()
        flow, _side = max_flow(graph)
        assert flow == pytest.approx(min_cut_oracle(graph), abs=1e-12)
        assert flow == pytest.approx(3.0)

    def test_flow_equals_cut_capacity_on_random_graphs(self):
        rng = np.random.default_rng(51)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            b = FlowGraphBuilder(n)
            for _ in range(int(rng.integers(0, 2 * n + 1))):
                u, v = rng.integers(0, n, 2)
                if u != v:
                    b.add_arc(int(u), int(v), float(rng.uniform(0, 4)),
                              float(rng.uniform(0, 4)))
            for v in range(n):
                if rng.random() < 0.7:
                    b.add_source(v, float(rng.uniform(0, 4)))
                if rng.random() < 0.7:
                    b.add_sink(v, float(rng.uniform(0, 4)))
            graph = b.build()
            flow, side = max_flow(graph)
            # duality: flow equals both the returned cut's capacity and the
            # exhaustive minimum cut
            assert flow == pytest.approx(cut_value_oracle(graph, side),
                                         rel=1e-9, abs=1e-9)
            assert flow == pytest.approx(min_cut_oracle(graph),
                                         rel=1e-9, abs=1e-9)

    def test_negative_capacity_rejected(self):
        b = FlowGraphBuilder(2)
        b.add_arc(0, 1, -1.0)
        with pytest.raises(MrfError):
            b.build()


class TestBuildStGraph:
    def test_single_negative_unary(self):
        graph, offset = build_st_graph(np.array([-5.0]), [], [],
                                       np.zeros((0, 4)))
        flow, side = max_flow(graph)
        assert side.tolist() == [True]
        assert flow + offset == -5.0

    def test_1x2_potts_matches_enumeration(self):
        mrf = example_1x2_potts()
        expected_labeling, expected_energy = brute_force_minimize(mrf)
        res = solve(mrf)
        assert res.energy == expected_energy == -1.0
        assert res.labeling.tolist() == expected_labeling.tolist() == [1, 1]

    def test_all_zero_instance(self):
        graph, offset = build_st_graph(np.zeros(4), [0, 1], [1, 2],
                                       np.zeros((2, 4)), constant=1.25)
        flow, side = max_flow(graph)
        assert flow == 0.0
        assert offset == 1.25
        assert side.tolist() == [False] * 4  # unreachable nodes default to 0

    def test_non_submodular_edge_reported(self):
        with pytest.raises(SubmodularityError) as info:
            build_st_graph(np.zeros(2), [0], [1],
                           np.array([[1.0, 0.0, 0.0, 1.0]]))
        assert info.value.pair == NeighborPair(0, 1)

    def test_capacities_nonnegative_after_reparameterization(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            mrf = random_submodular_mrf(rng, 4, 4)
            graph, _offset = build_st_graph(mrf.unary, mrf.pair_p, mrf.pair_q,
                                            mrf.pair_w, mrf.constant)
            assert graph.arc_cap.min() >= 0.0
            assert graph.source_cap.min() >= 0.0
            assert graph.sink_cap.min() >= 0.0


class TestSolve:
    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(57)
        for _ in range(60):
            w = int(rng.integers(1, 5))
            h = int(rng.integers(1, 5))
            mrf = random_submodular_mrf(rng, w, h)
            res = solve(mrf)
            _bits, best = brute_force_minimize(mrf)
            assert res.energy == best
            assert res.energy == pytest.approx(res.flow + res.offset,
                                               rel=1e-9, abs=1e-9)

    def test_solve_superpixel_instance(self):
        rng = np.random.default_rng(59)
        mrf = random_submodular_mrf(rng, 4, 4)
        part = random_partition(rng, mrf.geometry, 5)
        sp, _ = superpixelize(mrf, part)
        res = solve(sp)
        # lifted superpixel optimum evaluates to the superpixel optimum energy
        assert energy(mrf, lift(res.labeling, part)) == pytest.approx(
            res.energy, rel=1e-9)

    def test_identity_superpixelization_same_energy(self):
        rng = np.random.default_rng(61)
        mrf = random_submodular_mrf(rng, 4, 3)
        sp, _ = superpixelize(mrf, identity_partition(mrf.geometry))
        assert solve(sp).energy == solve(mrf).energy

    def test_all_positive_unary_all_zero_labels(self):
        geom = GridGeometry(3, 2)
        mrf = PixelMrf.from_pairs(geom, np.full(6, 2.0), [])
        res = solve(mrf)
        assert res.labeling.tolist() == [0] * 6
        assert res.energy == 0.0

    def test_monotonic_scaling(self):
        rng = np.random.default_rng(63)
        mrf = random_submodular_mrf(rng, 4, 3)
        lam = 3.5
        scaled = PixelMrf(mrf.geometry, lam * mrf.unary, mrf.pair_p,
                          mrf.pair_q, lam * mrf.pair_w, lam * mrf.constant)
        base = solve(mrf)
        res = solve(scaled)
        assert res.energy == pytest.approx(lam * base.energy, rel=1e-9)
        assert res.labeling.tolist() == base.labeling.tolist()

    def test_non_submodular_solve_rejected(self):
        mrf = PixelMrf.from_pairs(GridGeometry(2, 1), [0.0, 0.0],
                                  [(NeighborPair(0, 1),
                                    PairwiseWeights(1.0, 0.0, 0.0, 1.0))])
        with pytest.raises(SubmodularityError):
            solve(mrf)

    def test_stats_populated(self):
        res = solve(example_1x2_potts())
        assert res.stats.node_count == 2
        assert res.stats.solve_seconds >= 0.0
        assert res.stats.augmentations >= 1


class TestDimacs:
    def test_export_shape(self):
        b = FlowGraphBuilder(2)
        b.add_source(0, 2.0)
        b.add_arc(0, 1, 1.0)
        b.add_sink(1, 2.0)
        text = to_dimacs(b.build())
        lines = text.splitlines()
        assert lines[0] == "p max 4 3"
        assert lines[1] == "n 3 s"
        assert lines[2] == "n 4 t"
        assert len([ln for ln in lines if ln.startswith("a ")]) == 3

    def test_cross_validation_against_third_party_solver(self):
        # round-trip the DIMACS export into scipy's max-flow; capacities are
        # multiples of 1/64 so the integer scaling is exact
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import maximum_flow

        rng = np.random.default_rng(67)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            b = FlowGraphBuilder(n)
            for _ in range(int(rng.integers(1, 3 * n))):
                u, v = rng.integers(0, n, 2)
                if u != v:
                    b.add_arc(int(u), int(v),
                              int(rng.integers(0, 256)) / 64.0,
                              int(rng.integers(0, 256)) / 64.0)
            for v in range(n):
                if rng.random() < 0.8:
                    b.add_source(v, int(rng.integers(0, 256)) / 64.0)
                if rng.random() < 0.8:
                    b.add_sink(v, int(rng.integers(0, 256)) / 64.0)
            graph = b.build()
            flow, _side = max_flow(graph)

            rows, cols, caps = [], [], []
            source = sink = None
            for line in to_dimacs(graph).splitlines():
                parts = line.split()
                if parts[0] == "n":
                    if parts[2] == "s":
                        source = int(parts[1]) - 1
                    else:
                        sink = int(parts[1]) - 1
                elif parts[0] == "a":
                    rows.append(int(parts[1]) - 1)
                    cols.append(int(parts[2]) - 1)
                    caps.append(int(round(float(parts[3]) * 64)))
            matrix = csr_matrix((caps, (rows, cols)),
                                shape=(n + 2, n + 2), dtype=np.int64)
            expected = maximum_flow(matrix, source, sink).flow_value / 64.0
            assert abs(flow - expected) <= 1e-12


class TestScale:
    def test_handles_hundred_thousand_nodes(self):
        # sparse grid-like chain at the lower end of the target scale
        n = 100_000
        rng = np.random.default_rng(71)
        unary = rng.uniform(-1, 1, n)
        edge_i = np.arange(n - 1, dtype=np.int64)
        edge_j = edge_i + 1
        edge_w = np.zeros((n - 1, 4))
        edge_w[:, 1] = 0.5
        edge_w[:, 2] = 0.5
        graph, offset = build_st_graph(unary, edge_i, edge_j, edge_w)
        flow, side = max_flow(graph)
        assert side.shape == (n,)
        assert np.isfinite(flow)
