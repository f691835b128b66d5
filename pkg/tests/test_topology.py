import json

import networkx as nx
import numpy as np
import pytest

from multiscale_bft.topology import (
    SizingError,
    build_expander_stack,
    build_hypercube,
    default_degrees,
    dimension_neighbors,
    expansion_check,
    layer_sizes,
    random_regular_edges,
    topology_from_json,
    topology_to_json,
)


class TestHypercube:
    def test_sizes(self):
        topo = build_hypercube(7, 2)
        assert topo.n == 49
        assert topo.degree == 12
        assert topo.num_cliques == 7
        assert len(topo.neighbor_set(0)) == 12

    def test_labels_round_trip(self, cube73):
        for v in (0, 1, 48, 100, 342):
            assert cube73.parse(cube73.label(v)) == v
        assert cube73.label(7 * 7 * 2 + 7 * 3 + 4) == "234"

    def test_site_and_clique(self, cube72):
        assert cube72.site(23) == 2
        assert cube72.clique_of(23) == 3
        assert cube72.clique_members(3) == list(range(21, 28))

    def test_adjacency_means_one_digit(self, cube73):
        rng = np.random.default_rng(0)
        for u, v in rng.integers(0, cube73.n, size=(300, 2)):
            u, v = int(u), int(v)
            differing = sum(cube73.digit(u, k) != cube73.digit(v, k) for k in (1, 2, 3))
            assert cube73.adjacent(u, v) == (differing == 1)
            assert (v in cube73.neighbor_set(u)) == (differing == 1)

    def test_dimension_neighbors(self, cube72):
        assert dimension_neighbors(cube72, 8, 1) == [7, 9, 10, 11, 12, 13]
        assert dimension_neighbors(cube72, 8, 2) == [1, 15, 22, 29, 36, 43]
        assert 8 in dimension_neighbors(cube72, 8, 2, closed=True)

    def test_matches_networkx_hamming_graph(self):
        topo = build_hypercube(4, 3)
        # the s-base hypercube is the Cartesian product of L complete graphs
        g = nx.cartesian_product(nx.complete_graph(4), nx.cartesian_product(nx.complete_graph(4), nx.complete_graph(4)))
        assert g.number_of_edges() == topo.n * topo.degree // 2
        degs = {d for _, d in g.degree()}
        assert degs == {topo.degree}

    @pytest.mark.parametrize("s,L", [(3, 2), (7, 0), (16, 6)])
    def test_sizing_errors(self, s, L):
        with pytest.raises(SizingError):
            build_hypercube(s, L)

    def test_json_round_trip(self, cube72):
        doc = json.loads(topology_to_json(cube72))
        assert doc == {"kind": "hypercube", "s": 7, "L": 2, "n": 49}
        assert topology_from_json(topology_to_json(cube72)) == cube72


class TestExpanderStack:
    def test_layer_sizes(self):
        assert layer_sizes(1024, 16, [0.5] * 6) == [16, 32, 64, 128, 256, 512, 1024]
        with pytest.raises(SizingError):
            layer_sizes(1000, 16, [0.5])
        with pytest.raises(SizingError):
            layer_sizes(64, 16, [0.5])  # top layer must cover all nodes

    def test_default_degrees(self):
        sizes = [16, 32, 64, 128, 256, 512, 1024]
        assert default_degrees(1024, sizes) == [15, 30, 30, 30, 30, 30, 30]
        assert default_degrees(64, [16, 32, 64]) == [15, 18, 18]

    def test_regular_simple_connected(self, small_stack):
        for layer in small_stack.layers:
            for block in layer.adjacency:
                g = nx.Graph()
                g.add_nodes_from(range(layer.size))
                g.add_edges_from((u, v) for u, nb in enumerate(block) for v in nb)
                assert nx.is_connected(g)
                assert {d for _, d in g.degree()} == {layer.degree}
                assert nx.number_of_selfloops(g) == 0

    def test_nested_blocks(self, small_stack):
        for l in range(1, small_stack.L):
            for v in range(small_stack.n):
                assert set(small_stack.block(l - 1, v)) <= set(small_stack.block(l, v))

    def test_layer0_is_clique_with_exact_spectrum(self, small_stack):
        rep = expansion_check(small_stack, 0)
        # K_16: eigenvalues 15 and -1, so lambda_2 / d = -1/15
        assert rep.ratios == pytest.approx([-1 / 15] * 4)
        assert rep.flagged == ()

    def test_upper_layers_expand(self, small_stack):
        for l in (1, 2):
            rep = expansion_check(small_stack, l)
            assert rep.worst < 0.9

    def test_seed_determinism(self):
        a = build_expander_stack(64, 16, [0.5, 0.5], seed=9)
        b = build_expander_stack(64, 16, [0.5, 0.5], seed=9)
        c = build_expander_stack(64, 16, [0.5, 0.5], seed=10)
        assert a.layers == b.layers
        assert a.layers != c.layers

    def test_impossible_degrees_rejected(self):
        with pytest.raises(SizingError):
            random_regular_edges(15, 3, np.random.default_rng(0))
        with pytest.raises(SizingError):
            build_expander_stack(64, 16, [0.5, 0.5], degrees=[15, 40, 18])

    def test_dense_degree_uses_complement(self):
        edges = random_regular_edges(20, 17, np.random.default_rng(3))
        assert len(edges) == 20 * 17 // 2

    def test_json_round_trip(self, small_stack):
        again = topology_from_json(topology_to_json(small_stack))
        assert again.layers == small_stack.layers
