"""Incomplete secure communication on a layered expander stack.

The sender's layer-0 subnetwork runs the phase-king broadcast kernel (seeded
by one round in which the sender hands its value to the subnetwork).  Each
higher layer then costs one round: the nodes of the sender's layer-(l-1)
block forward their layer-(l-1) value to their layer-l neighbors, and every
other node of the sender's layer-l block takes the strict majority of what it
heard.  A node never reads a higher layer's state into a lower layer.

Alongside the simulation, :func:`npc_sets` computes the non-poor correct
nodes from the graph and the corruption set alone, so the two can be
checked against each other.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Sequence

from ..adversary import SILENT, AdversarySpec, scope_bound, scopes_for_stack
from ..engine import Execution, SyncProgram, run_sync_execution
from ..kernels import PhaseKing, clean, majority_relay
from ..topology import ExpanderStack
from .outcome import ProtocolOutcome


class UnsupportedSubnetwork(ValueError):
    """Layer-0 subnetworks must be cliques for the kernel's guarantees to hold."""


class _Node:
    __slots__ = ("x", "taint", "inst")

    def __init__(self, layers: int):
        self.x: list[Any] = [None] * layers
        # taint[l]: layers whose state flowed into x[l]
        self.taint: list[frozenset[int]] = [frozenset()] * layers
        self.inst: list | None = None


class SecureCommProgram(SyncProgram):
    def __init__(self, stack: ExpanderStack, sender: int):
        if stack.degrees[0] != stack.s0 - 1:
            raise UnsupportedSubnetwork(
                f"layer-0 degree {stack.degrees[0]} is not s_0 - 1 = {stack.s0 - 1}; "
                "only clique subnetworks are supported at layer 0"
            )
        self.stack = stack
        self.sender = sender
        self.nodes = stack.nodes
        self.pk = PhaseKing(stack.s0)
        self.blocks = [stack.block(l, sender) for l in range(stack.L)]
        self.schedule: list[tuple[str, int]] = [("seed", 0)]
        self.schedule += [("kernel", j) for j in range(self.pk.rounds)]
        self.schedule += [("layer", l) for l in range(1, stack.L)]
        self.rounds = len(self.schedule)
        self.round_layers = [j if kind == "layer" else 0 for kind, j in self.schedule]
        base = self.blocks[0]
        self._active: list[Sequence[int]] = []
        self._listening: list[Sequence[int]] = []
        for kind, j in self.schedule:
            if kind == "seed":
                self._active.append((sender,))
                self._listening.append(base)
            elif kind == "kernel":
                step = j % 3
                self._active.append(base if step != 2 else (base[0] + j // 3,))
                self._listening.append(base)
            else:
                self._active.append(self.blocks[j - 1])
                self._listening.append(self.blocks[j])

    def senders(self, rnd):
        return self._active[rnd - 1]

    def receivers(self, rnd):
        return self._listening[rnd - 1]

    def init(self, node, value):
        st = _Node(self.stack.L)
        if node == self.sender:
            st.x[0] = value
        return st

    def send(self, rnd, u, st: _Node):
        kind, j = self.schedule[rnd - 1]
        stack = self.stack
        if kind == "seed":
            return dict.fromkeys(stack.layer_neighbor_sets[0][u], (0, st.x[0], frozenset({0})))
        if kind == "kernel":
            if st.inst is None:
                return None
            slot = 0 if j % 3 == 2 else j % 3
            return dict.fromkeys(stack.layer_neighbor_sets[0][u], (0, st.inst[slot], frozenset({0})))
        value = st.x[j - 1]
        if value is None:
            return None
        return dict.fromkeys(stack.layer_neighbor_sets[j][u], (j - 1, value, st.taint[j - 1]))

    def recv(self, rnd, u, st: _Node, inbox):
        kind, j = self.schedule[rnd - 1]
        if kind == "seed":
            val = st.x[0] if u == self.sender else _value(inbox.get(self.sender), 0)
            st.inst = PhaseKing.start(val)
            return st
        if kind == "kernel":
            site = u - self.blocks[0][0]
            pk = self.pk
            if j % 3 != 2:
                pk.update(j, site, st.inst, [_value(p, 0) for p in inbox.values()])
            else:
                king = self.blocks[0][0] + j // 3
                pk.update(j, site, st.inst, (_value(inbox.get(king), 0),))
            if j == pk.rounds - 1:
                st.x[0] = st.inst[0]
                st.taint[0] = frozenset({0})
                st.inst = None
            return st
        informed = self.blocks[j - 1]
        if u in informed:
            # carry the node's own lower-layer value upward
            st.x[j] = st.x[j - 1]
            st.taint[j] = st.taint[j - 1] | {j}
            return st
        nbrs = self.stack.layer_neighbor_sets[j][u]
        values = []
        taint = {j}
        for v, p in inbox.items():
            if v in nbrs and v in informed:
                val = _value(p, j - 1)
                if val is not None:
                    values.append(val)
                    taint |= p[2] if type(p) is tuple and len(p) == 3 else set()
        st.x[j] = majority_relay(values) if values else None
        st.taint[j] = frozenset(taint)
        return st

    def output(self, u, st: _Node):
        return st.x[-1]

    def map_values(self, payload, fn):
        tag, value, taint = payload
        forged = fn(value)
        if forged is SILENT:
            return SILENT
        return (tag, forged, taint)

    def describe(self, st: _Node):
        return {"x": list(st.x), "taint": [sorted(t) for t in st.taint]}


def _value(payload, tag):
    if type(payload) is tuple and len(payload) == 3 and payload[0] == tag:
        return clean(payload[1])
    return None


# ---------------------------------------------------------------------------
# structural npc oracle


@dataclass(frozen=True)
class NpcReport:
    per_layer: tuple[frozenset[int], ...]
    layer0_npc: frozenset[int]

    @property
    def top(self) -> frozenset[int]:
        return self.per_layer[-1]


def layer0_npc(stack: ExpanderStack, corrupt, alpha=None) -> frozenset[int]:
    """Correct nodes whose own layer-0 subnetwork stays within its fault bound."""
    kw = {} if alpha is None else {"alpha": alpha}
    bound = scope_bound(stack.s0, **kw)
    out = set()
    for r in range(stack.n // stack.s0):
        members = stack.layers[0].members(r)
        if sum(v in corrupt for v in members) <= bound:
            out.update(v for v in members if v not in corrupt)
    return frozenset(out)


def npc_sets(stack: ExpanderStack, sender: int, corrupt, alpha=None) -> NpcReport:
    """Per-layer npc sets for messages from ``sender``.

    Layer 0 holds the correct members of the sender's subnetwork when the
    sender is correct and the subnetwork is within bound.  A correct node of
    the sender's layer-l block that is new at layer l joins when more than
    half of its layer-l neighbors inside the layer-(l-1) block are npc.
    """
    corrupt = frozenset(corrupt)
    base = layer0_npc(stack, corrupt, alpha)
    blocks = [stack.block(l, sender) for l in range(stack.L)]
    if sender in base:
        P = {v for v in blocks[0] if v not in corrupt}
    else:
        P = set()
    layers = [frozenset(P)]
    for l in range(1, stack.L):
        informed = blocks[l - 1]
        nbrs = stack.layer_neighbor_sets[l]
        prev = layers[-1]
        nxt = set(prev)
        for w in blocks[l]:
            if w in informed or w in corrupt:
                continue
            around = [v for v in nbrs[w] if v in informed]
            good = sum(v in prev for v in around)
            if 2 * good > len(around):
                nxt.add(w)
        layers.append(frozenset(nxt))
    return NpcReport(tuple(layers), base)


def check_upward_flow(execution: Execution, round_layers: Sequence[int]) -> list[str]:
    """Scan a recorded trace for state that moved from a higher layer to a lower one.

    ``round_layers[k-1]`` is the layer that round ``k`` belongs to.  Every
    layer-l slot may carry taint from layers <= l only, and a round of layer l
    may rewrite the layer-l slot and nothing else.
    """
    if execution.trace is None:
        raise ValueError("the execution was not recorded")
    problems = []
    prev = execution.trace[0].states
    for rec in execution.trace[1:]:
        here = round_layers[rec.round - 1]
        for v, st in rec.states.items():
            for l, taint in enumerate(st["taint"]):
                if taint and max(taint) > l:
                    problems.append(f"round {rec.round}: node {v} layer {l} tainted by {max(taint)}")
            old = prev[v]
            for l, (a, b) in enumerate(zip(old["x"], st["x"])):
                if l != here and (a != b or old["taint"][l] != st["taint"][l]):
                    problems.append(f"round {rec.round}: node {v} rewrote layer {l} in a layer-{here} round")
        prev = rec.states
    return problems


def securecomm_rounds(stack: ExpanderStack) -> int:
    return 1 + PhaseKing(stack.s0).rounds + (stack.L - 1)


def secure_communicate(
    stack: ExpanderStack,
    sender: int,
    receiver: int,
    value: int,
    adversary: AdversarySpec | None = None,
    record: bool = False,
    round_budget: int | None = None,
) -> ProtocolOutcome:
    """Deliver ``value`` from ``sender``; every node ends with a top-layer value.

    The outcome's npc set is the structural top-layer npc set; ``extra``
    carries the per-layer sets and the verdict for ``receiver``.
    """
    prog = SecureCommProgram(stack, sender)
    adversary = adversary or AdversarySpec()
    if not adversary.scopes:
        adversary = dataclasses.replace(adversary, scopes=tuple(_stack_scopes(stack)))
    ex = run_sync_execution(stack, prog, {sender: value}, adversary, round_budget, record)
    report = npc_sets(stack, sender, adversary.corrupt)
    decisions = ex.outputs
    npc = report.top
    delivered = all(decisions[v] == value for v in npc)
    overall = npc & report.layer0_npc if sender in report.layer0_npc else frozenset()
    given_up = frozenset(decisions) - npc
    return ProtocolOutcome(
        decisions=decisions,
        corrupt=adversary.corrupt,
        rounds=ex.rounds,
        messages={v: ex.messages_sent[v] for v in decisions},
        round_messages={v: ex.round_messages[v] for v in decisions},
        npc=npc,
        given_up=given_up,
        agreement=delivered,
        validity=delivered,
        extra={
            "sender": sender,
            "receiver": receiver,
            "value": value,
            "receiver_value": decisions.get(receiver),
            "receiver_npc": receiver in overall,
            "receiver_ok": receiver not in overall or decisions.get(receiver) == value,
            "per_layer_npc": [len(p) for p in report.per_layer],
            "overall_npc": len(overall),
            "round_layers": prog.round_layers,
            "_per_layer_sets": report.per_layer,
            "_overall": overall,
        },
        execution=ex,
    )


_SCOPE_CACHE: dict[int, tuple] = {}


def _stack_scopes(stack: ExpanderStack):
    key = id(stack)
    hit = _SCOPE_CACHE.get(key)
    if hit is None or hit[0] is not stack:
        hit = (stack, tuple(scopes_for_stack(stack)))
        _SCOPE_CACHE.clear()
        _SCOPE_CACHE[key] = hit
    return hit[1]
