import itertools
from fractions import Fraction

import pytest

from multiscale_bft.adversary import (
    SCRIPT_FAMILY,
    AdversarySpec,
    ForgeContext,
    InfeasiblePlacement,
    enumerate_placements,
    make_strategy,
    relabel,
    sample_corruption,
    scope_bound,
    scopes_for_agreement,
    scopes_for_broadcast,
    scopes_for_stack,
    validate_corruption,
)


def test_scope_bound_is_floor_of_a_third():
    assert [scope_bound(s) for s in (4, 6, 7, 16, 32)] == [1, 2, 2, 5, 10]
    assert scope_bound(10, lambda s: Fraction(1, 4)) == 2
    assert scope_bound(9, lambda s: 1 / 3) == 3


class TestScopes:
    def test_broadcast_scope_counts(self, cube72, cube73):
        # 7 cliques + 6 tree edges at L=2
        assert len(scopes_for_broadcast(cube72)) == 13
        # 49 cliques + 48 tree edges at L=3
        assert len(scopes_for_broadcast(cube73)) == 97

    def test_agreement_scopes_cover_all_pairs_at_L2(self, cube72):
        scopes = scopes_for_agreement(cube72)
        pairs = [sc for sc in scopes if sc.name.startswith("pair:")]
        assert len(pairs) == 21  # every clique pair is some root's tree edge
        assert all(sc.bound == 2 and sc.size == 14 for sc in pairs)

    def test_stack_scopes(self, small_stack):
        scopes = scopes_for_stack(small_stack)
        assert [sc.name for sc in scopes][:5] == ["layer0:0", "layer0:1", "layer0:2", "layer0:3", "layer1:0"]
        assert {sc.name: sc.bound for sc in scopes}["layer2:0"] == 21

    def test_validate_reports_violations(self, cube72):
        scopes = scopes_for_broadcast(cube72)
        assert validate_corruption({8, 9}, scopes)
        bad = validate_corruption({8, 9, 10}, scopes)
        assert not bad
        assert "clique:1" in bad.violated
        assert validate_corruption({8, 9, 10}, scopes, sacrificed=["clique:1", "pair:0|1"])


class TestPlacements:
    def test_enumeration_matches_brute_force(self):
        from multiscale_bft.topology import build_hypercube

        topo = build_hypercube(4, 2)  # bounds of 1 everywhere
        scopes = scopes_for_broadcast(topo)
        fast = set(enumerate_placements(scopes, topo.nodes, 3))
        slow = {
            frozenset(c)
            for k in range(4)
            for c in itertools.combinations(topo.nodes, k)
            if validate_corruption(c, scopes)
        }
        assert fast == slow

    @pytest.mark.parametrize("target", [0, 5, 12])
    def test_sampling_is_valid_and_deterministic(self, cube72, target):
        scopes = scopes_for_broadcast(cube72)
        a = sample_corruption(scopes, target, seed=7)
        b = sample_corruption(scopes, target, seed=7)
        assert a.nodes == b.nodes
        assert len(a.nodes) == target
        assert validate_corruption(a.nodes, scopes)

    def test_tight_target_uses_sequential_fill(self, small_stack):
        scopes = scopes_for_stack(small_stack)
        pl = sample_corruption(scopes, 20, seed=1)
        assert len(pl.nodes) == 20 and validate_corruption(pl.nodes, scopes)

    def test_impossible_target(self, cube72):
        scopes = scopes_for_broadcast(cube72)
        with pytest.raises(InfeasiblePlacement):
            sample_corruption(scopes, 15, seed=0)

    def test_forced_and_sacrificed(self, cube72):
        scopes = scopes_for_broadcast(cube72)
        drop = ["clique:3", "pair:0|3"]
        pl = sample_corruption(scopes, 6, seed=2, sacrificed=drop, forced=[21, 22, 23, 24])
        assert {21, 22, 23, 24} <= pl.nodes
        assert validate_corruption(pl.nodes, scopes, drop)


class TestStrategies:
    def ctx(self, rnd=1, receiver_site=0):
        return ForgeContext(rnd, 10, 3, 5, 3, receiver_site, 99, frozenset({3}))

    def test_family(self):
        assert [make_strategy(n).name for n in SCRIPT_FAMILY] == list(SCRIPT_FAMILY)
        assert make_strategy("constant-4").forge(self.ctx(), 1) == 4
        with pytest.raises(ValueError):
            make_strategy("sneaky")

    def test_equivocate_splits_by_site(self):
        eq = make_strategy("equivocate")
        assert [eq.forge(self.ctx(receiver_site=k), 1) for k in range(4)] == [0, 1, 0, 1]

    def test_flip_is_honest_then_flips(self):
        fl = make_strategy("flip")
        assert fl.forge(self.ctx(rnd=5), 1) == 1
        assert fl.forge(self.ctx(rnd=6), 1) == 0
        assert fl.forge(self.ctx(rnd=6), None) is None

    def test_random_depends_only_on_seed_round_and_sites(self):
        r = make_strategy("random")
        vals = {r.forge(self.ctx(rnd=k), 0) for k in range(1, 60)}
        assert vals <= {0, 1, None} and len(vals) == 3
        assert r.forge(self.ctx(rnd=4), 0) == r.forge(self.ctx(rnd=4), 1)

    def test_spec_scripts_per_node(self):
        adv = AdversarySpec.of({1, 2}, strategy={1: "flip"})
        scripts = adv.scripts()
        assert scripts[1].name == "flip" and scripts[2].name == "silent"


def test_relabel():
    assert relabel({1, 2}, lambda v: v + 7) == frozenset({8, 9})
