import json

import pytest

from multiscale_bft.adversary import AdversarySpec, scopes_for_broadcast
from multiscale_bft.engine import (
    ContractBreach,
    CorruptionRejected,
    RoundBudgetExceeded,
    SyncProgram,
    run_sync_execution,
)


class Flood(SyncProgram):
    """Every node forwards the largest value it has seen to all neighbors."""

    def __init__(self, topo, rounds):
        self.topo = topo
        self.rounds = rounds
        self.nodes = topo.nodes

    def send(self, rnd, node, state):
        return {v: state for v in self.topo.neighbors(node)}

    def recv(self, rnd, node, state, inbox):
        vals = [v for v in inbox.values() if isinstance(v, int)]
        return max([state, *vals])


class OffLink(SyncProgram):
    rounds = 1

    def __init__(self, topo):
        self.nodes = topo.nodes

    def send(self, rnd, node, state):
        return {(node + 2) % 49: state}  # node+2 is usually not a neighbor across cliques


def flood_inputs(topo):
    return {v: 0 for v in topo.nodes} | {0: 5}


class TestFlood:
    def test_diameter_rounds(self, cube72):
        ex = run_sync_execution(cube72, Flood(cube72, 1), flood_inputs(cube72))
        reached = {v for v, x in ex.outputs.items() if x == 5}
        assert reached == {0} | set(cube72.neighbors(0))
        ex = run_sync_execution(cube72, Flood(cube72, 2), flood_inputs(cube72))
        assert set(ex.outputs.values()) == {5}

    def test_message_counts(self, cube72):
        ex = run_sync_execution(cube72, Flood(cube72, 3), flood_inputs(cube72))
        m = ex.metrics()
        assert m["rounds"] == 3
        assert m["total_messages"] == 3 * 49 * 12
        assert m["max_messages_per_node_round"] == 12
        assert m["max_round_messages_per_node"] == 3

    def test_silent_adversary_blocks_its_own_messages(self, cube72):
        adv = AdversarySpec.of({0}, strategy="silent")
        ex = run_sync_execution(cube72, Flood(cube72, 2), flood_inputs(cube72), adv)
        assert 0 not in ex.outputs
        assert set(ex.outputs.values()) == {0}
        assert ex.messages_sent[0] == 0

    def test_constant_adversary_rewrites_values(self, cube72):
        adv = AdversarySpec.of({3}, strategy="constant-9")
        ex = run_sync_execution(cube72, Flood(cube72, 2), flood_inputs(cube72), adv)
        assert set(ex.outputs.values()) == {9}

    def test_trace_jsonl_and_determinism(self, cube72):
        adv = AdversarySpec.of({3, 17}, strategy="random", seed=4)
        a = run_sync_execution(cube72, Flood(cube72, 2), flood_inputs(cube72), adv, record=True)
        b = run_sync_execution(cube72, Flood(cube72, 2), flood_inputs(cube72), adv, record=True)
        assert a.trace_jsonl() == b.trace_jsonl()
        lines = a.trace_jsonl().splitlines()
        assert len(lines) == 3
        first = json.loads(lines[1])
        assert first["round"] == 1 and len(first["messages"]) == 49 * 12
        assert first["states"]["0"] == 5


class TestContracts:
    def test_round_budget(self, cube72):
        with pytest.raises(RoundBudgetExceeded):
            run_sync_execution(cube72, Flood(cube72, 4), flood_inputs(cube72), round_budget=3)

    def test_correct_node_off_link_is_a_breach(self, cube72):
        with pytest.raises(ContractBreach):
            run_sync_execution(cube72, OffLink(cube72), {})

    def test_faulty_off_link_messages_are_dropped(self, cube72):
        prog = OffLink(cube72)
        prog.nodes = [5]  # 5 -> 7 differs in both digits
        adv = AdversarySpec.of({5}, strategy="constant-1")
        ex = run_sync_execution(cube72, prog, {5: 1}, adv)
        assert ex.messages_sent[5] == 0

    def test_invalid_corruption_rejected(self, cube72):
        adv = AdversarySpec.of({8, 9, 10}, scopes=scopes_for_broadcast(cube72))
        with pytest.raises(CorruptionRejected) as err:
            run_sync_execution(cube72, Flood(cube72, 1), flood_inputs(cube72), adv)
        assert "clique:1" in err.value.violated
