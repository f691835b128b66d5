import itertools
import math

import numpy as np
import pytest

from multiscale_bft.adversary import (
    AdversarySpec,
    enumerate_placements,
    scopes_for_broadcast,
    validate_corruption,
)
from multiscale_bft.campaigns import ConfigError, broadcast_orbits
from multiscale_bft.protocols import (
    DisseminationTree,
    agreement_rounds,
    broadcast_rounds,
    compute_incompleteness,
    lower_median,
    multiscale_agreement,
    multiscale_broadcast,
)
from multiscale_bft.topology import build_hypercube


class TestTree:
    def test_spanning_and_rooted(self, cube73):
        tree = DisseminationTree(cube73, 0)
        assert len(tree.edges()) == 48
        assert tree.depth == 2
        for w in range(49):
            hops, x = 0, w
            while tree.parent[x] is not None:
                x = tree.parent[x]
                hops += 1
            assert x == 0 and hops <= 2

    def test_edges_cross_one_digit(self, cube73):
        tree = DisseminationTree(cube73, 17)
        for child, parent in tree.edges():
            diff = [j for j in (1, 2) if (child // 7 ** (j - 1)) % 7 != (parent // 7 ** (j - 1)) % 7]
            assert len(diff) == 1
            assert tree.crossing_dimension(child) == diff[0] + 1
            a = cube73.clique_members(child)[3]
            b = cube73.clique_members(parent)[3]
            assert cube73.adjacent(a, b)

    def test_explicit_parents(self, cube73):
        tree = DisseminationTree(cube73, 0)
        # clique (a, b) = 7a + b: the high digit is fixed first
        assert tree.parent[7 * 4 + 5] == 5
        assert tree.parent[5] == 0
        assert tree.parent[7 * 4] == 0
        assert tree.at_layer(1) == list(range(1, 7))

    def test_bad_root(self, cube72):
        with pytest.raises(ValueError):
            DisseminationTree(cube72, 7)


def test_round_formulas():
    assert [broadcast_rounds(7, L) for L in (1, 2, 3)] == [10, 20, 30]
    assert agreement_rounds(7, 2) == 19
    assert broadcast_rounds(4, 3) == 1 + 6 + 2 * 7


def test_lower_median():
    assert lower_median([3, 1, 2, 4]) == 2
    assert lower_median([5]) == 5


class TestBroadcast:
    def test_fault_free(self, cube72):
        out = multiscale_broadcast(cube72, 10, 1)
        assert out.validity and out.agreement and not out.given_up
        assert out.rounds == 20
        assert set(out.decisions.values()) == {1}

    @pytest.mark.parametrize("script", ["silent", "equivocate", "flip", "random", "constant-0"])
    def test_dense_valid_placement(self, cube72, script):
        # two faults in the root clique forbid faults elsewhere, so spread them out
        faults = {8, 9, 15, 16, 22, 23, 29, 30, 36, 37, 43, 44}
        out = multiscale_broadcast(cube72, 0, 1, AdversarySpec.of(faults, strategy=script, seed=3))
        assert out.validity and not out.given_up

    def test_faulty_general_still_agrees(self, cube72):
        out = multiscale_broadcast(cube72, 0, 1, AdversarySpec.of({0, 1}, strategy="equivocate"))
        assert out.validity is None and out.agreement

    def test_L3(self, cube73):
        faults = {49 * 2 + 3, 49 * 2 + 4, 200, 300}
        out = multiscale_broadcast(cube73, 0, 1, AdversarySpec.of(faults, strategy="flip"))
        assert out.rounds == 30 and out.validity

    def test_exhaustive_two_faults(self, cube72):
        scopes = scopes_for_broadcast(cube72)
        count = 0
        for faults in itertools.combinations(range(49), 2):
            out = multiscale_broadcast(cube72, 0, 1, AdversarySpec.of(faults, strategy="equivocate"))
            assert out.agreement and out.validity is not False and not out.given_up, faults
            count += 1
        assert count == math.comb(49, 2)
        assert all(validate_corruption(f, scopes) for f in itertools.combinations(range(7), 2))

    def test_trace_and_json(self, cube72):
        out = multiscale_broadcast(cube72, 0, 1, record=True)
        assert len(out.execution.trace_jsonl().splitlines()) == 21
        assert '"validity": true' in out.to_json()


class TestOrbits:
    def test_weights_match_enumeration(self, cube72):
        scopes = scopes_for_broadcast(cube72)
        total = sum(1 for _ in enumerate_placements(scopes, cube72.nodes, 3))
        reps = list(broadcast_orbits(cube72, 0, 3))
        assert sum(w for _, w in reps) == total == 17641
        assert all(validate_corruption(n, scopes) for n, _ in reps)

    def test_full_family_size(self, cube72):
        assert sum(w for _, w in broadcast_orbits(cube72, 0, 6)) == 5606581

    def test_relabelling_leaves_preserves_outcome(self, cube72):
        faults = {8, 9, 15, 16, 29, 45}
        perm = [0, 3, 6, 1, 2, 5, 4]
        moved = {perm[v // 7] * 7 + v % 7 for v in faults}
        for script in ("equivocate", "random", "flip"):
            a = multiscale_broadcast(cube72, 0, 1, AdversarySpec.of(faults, strategy=script, seed=1))
            b = multiscale_broadcast(cube72, 0, 1, AdversarySpec.of(moved, strategy=script, seed=1))
            assert {perm[v // 7] * 7 + v % 7: d for v, d in a.decisions.items()} == b.decisions
            assert a.max_messages() == b.max_messages()

    def test_only_two_digit_cubes(self, cube73):
        with pytest.raises(ConfigError):
            next(broadcast_orbits(cube73, 0, 2))


class TestAgreement:
    def test_unanimous(self, cube72):
        out = multiscale_agreement(cube72, dict.fromkeys(range(49), 4))
        assert out.validity and out.rounds == 19

    @pytest.mark.parametrize("seed", range(3))
    def test_mixed_inputs_with_faults(self, cube72, seed):
        rng = np.random.default_rng(seed)
        inputs = {v: int(x) for v, x in enumerate(rng.integers(0, 2, 49))}
        faults = {8, 15, 22, 29}
        out = multiscale_agreement(cube72, inputs, AdversarySpec.of(faults, strategy="random", seed=seed))
        assert out.agreement and not out.given_up

    def test_clique_medians(self, cube72):
        # every clique agrees on its own index, so the lower median of 0..6 is 3
        out = multiscale_agreement(cube72, {v: v // 7 for v in range(49)})
        assert set(out.decisions.values()) == {3}

    def test_merged_messages(self, cube72):
        out = multiscale_agreement(cube72, dict.fromkeys(range(49), 0))
        assert out.max_round_messages() <= out.rounds


def test_incompleteness_summary(cube72):
    outs = [multiscale_broadcast(cube72, 0, 1, AdversarySpec.of(f, strategy="silent")) for f in ({1}, {8, 9})]
    est = compute_incompleteness(outs)
    assert est.x_estimate == 0 and est.per_placement == (0, 0)
    assert est.label == "lower bound on the maximum"
    assert compute_incompleteness(outs, exhaustive=True).label == "exact maximum"
