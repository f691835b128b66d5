"""Multi-scale broadcast and agreement on the s-base hypercube.

Both protocols share one program.  Every kernel instance is keyed by the
root clique of the broadcast it belongs to, so the agreement protocol's n/s
parallel broadcasts travel in one merged message per edge and round.
"""

from __future__ import annotations

import dataclasses
import functools
from typing import Any, Mapping

from ..adversary import SILENT, AdversarySpec, scopes_for_agreement, scopes_for_broadcast
from ..engine import SyncProgram, run_sync_execution
from ..kernels import DEFAULT_VALUE, PhaseKing, clean
from ..topology import HypercubeTopology, dimension_neighbors
from .outcome import ProtocolOutcome, common_value
from .tree import DisseminationTree


class _Node:
    __slots__ = ("input", "inst", "decided")

    def __init__(self, value):
        self.input = value
        self.inst: dict[int, list] = {}
        self.decided: dict[int, Any] = {}


def lower_median(values) -> Any:
    vals = sorted(values)
    return vals[(len(vals) + 1) // 2 - 1]


class HypercubeProgram(SyncProgram):
    """Schedule for ``mode='broadcast'`` (one General) or ``mode='agreement'``."""

    def __init__(self, topo: HypercubeTopology, mode: str, general: int | None = None):
        if mode not in ("broadcast", "agreement"):
            raise ValueError(f"unknown mode {mode!r}")
        self.topo = topo
        self.mode = mode
        self.general = general
        self.merged = mode == "agreement"
        s, m = topo.s, topo.num_cliques
        self.pk = PhaseKing(s)
        self.nodes = topo.nodes
        roots = [topo.clique_of(general)] if mode == "broadcast" else list(range(m))
        self.roots = roots
        self.trees = {c: DisseminationTree(topo, c) for c in roots}

        # stage 0 instances: the General's clique, or every clique on its own inputs
        self.run_at: list[list[list[int]]] = [[[] for _ in range(m)] for _ in range(topo.L)]
        self.send_at: list[list[list[int]]] = [[[] for _ in range(m)] for _ in range(topo.L)]
        for c, tree in self.trees.items():
            for w in range(m):
                lay = tree.layer[w]
                self.run_at[lay][w].append(c)
                for t in range(lay + 1, topo.L):
                    self.send_at[t][w].append(c)

        sched: list[tuple[str, int, int]] = []
        if mode == "broadcast":
            sched.append(("seed", 0, 0))
        sched += [("A", 0, j) for j in range(self.pk.rounds)]
        for t in range(1, topo.L):
            sched.append(("I", t, 0))
            sched += [("B", t, j) for j in range(self.pk.rounds)]
        self.schedule = sched
        self.rounds = len(sched)

        self.mates = [dimension_neighbors(topo, v, 1) for v in topo.nodes]
        self._active: list[list[int] | None] = []
        self._listening: list[list[int]] = []
        for kind, t, j in sched:
            self._active.append(self._senders(kind, t, j))
            cliques = [w for w in range(m) if self.run_at[t][w]]
            self._listening.append([v for w in cliques for v in topo.clique_members(w)])

    # -- schedule helpers -------------------------------------------------

    def _senders(self, kind, t, j):
        topo, s = self.topo, self.topo.s
        if kind == "seed":
            return [self.general]
        if kind == "I":
            cliques = [w for w in range(topo.num_cliques) if self.send_at[t][w]]
            return [v for w in cliques for v in topo.clique_members(w)]
        cliques = [w for w in range(topo.num_cliques) if self.run_at[t][w]]
        if self.pk.is_broadcast_round(j):
            return [v for w in cliques for v in topo.clique_members(w)]
        king = self.pk.king(j)
        return [w * s + king for w in cliques]

    def senders(self, rnd):
        return self._active[rnd - 1]

    def receivers(self, rnd):
        return self._listening[rnd - 1]

    def stage_rounds(self) -> dict[str, int]:
        return {
            "seed": 1 if self.mode == "broadcast" else 0,
            "A": self.pk.rounds,
            "I": 1,
            "B": self.pk.rounds,
        }

    # -- program callbacks -------------------------------------------------

    def init(self, node, value):
        return _Node(value)

    def send(self, rnd, u, st: _Node):
        kind, t, j = self.schedule[rnd - 1]
        if kind == "seed":
            return dict.fromkeys(self.mates[u], self._pack({self.roots[0]: st.input}))
        if kind == "I":
            w = u // self.topo.s
            payload = {c: st.decided[c] for c in self.send_at[t][w] if c in st.decided}
            if not payload:
                return None
            return dict.fromkeys(dimension_neighbors(self.topo, u, t + 1), self._pack(payload))
        if not st.inst:
            return None
        slot = 0 if j % 3 == 2 else j % 3
        if self.merged:
            payload = {c: inst[slot] for c, inst in st.inst.items()}
        else:
            (inst,) = st.inst.values()
            payload = inst[slot]
        return dict.fromkeys(self.mates[u], payload)

    def _pack(self, payload: dict):
        # a single broadcast instance travels as a bare value
        if self.merged:
            return payload
        (v,) = payload.values()
        return v

    def _unpack(self, payload, c):
        if self.merged:
            return payload.get(c) if type(payload) is dict else None
        return payload

    def recv(self, rnd, u, st: _Node, inbox):
        kind, t, j = self.schedule[rnd - 1]
        s = self.topo.s
        w, site = divmod(u, s)
        unpack = self._unpack
        if kind == "seed":
            root = self.roots[0]
            val = st.input if u == self.general else unpack(inbox.get(self.general), root)
            st.inst[root] = PhaseKing.start(val)
            return st
        if kind == "I":
            for c in self.run_at[t][w]:
                parent = self.trees[c].parent[w]
                st.inst[c] = PhaseKing.start(unpack(inbox.get(parent * s + site), c))
            return st
        pk = self.pk
        if j % 3 != 2:
            payloads = [p for snd, p in inbox.items() if snd // s == w]
            if self.merged:
                for c, inst in st.inst.items():
                    pk.update(j, site, inst, [p.get(c) for p in payloads if type(p) is dict])
            else:
                for inst in st.inst.values():
                    pk.update(j, site, inst, payloads)
        else:
            king = inbox.get(w * s + j // 3)
            for c, inst in st.inst.items():
                pk.update(j, site, inst, (unpack(king, c),))
        if j == pk.rounds - 1:
            for c, inst in st.inst.items():
                st.decided[c] = inst[0]
            st.inst = {}
        return st

    def output(self, u, st: _Node):
        if self.mode == "broadcast":
            return st.decided.get(self.roots[0], DEFAULT_VALUE)
        vals = [st.decided.get(c, DEFAULT_VALUE) for c in self.roots]
        return lower_median(vals)

    def map_values(self, payload, fn):
        if type(payload) is not dict:
            return fn(payload)
        out = {}
        for k, v in payload.items():
            x = fn(v)
            if x is not SILENT:
                out[k] = x
        return out

    def describe(self, st: _Node):
        return {
            "input": st.input,
            "inst": {str(c): list(i) for c, i in st.inst.items()},
            "decided": {str(c): v for c, v in st.decided.items()},
        }


class _AgreementProgram(HypercubeProgram):
    def __init__(self, topo):
        super().__init__(topo, "agreement")

    def init(self, node, value):
        st = _Node(value)
        st.inst[self.topo.clique_of(node)] = PhaseKing.start(value)
        return st


@functools.lru_cache(maxsize=64)
def _broadcast_setup(topo: HypercubeTopology, general: int):
    tree = DisseminationTree(topo, topo.clique_of(general))
    return HypercubeProgram(topo, "broadcast", general), tuple(scopes_for_broadcast(topo, tree))


@functools.lru_cache(maxsize=16)
def _agreement_setup(topo: HypercubeTopology):
    return _AgreementProgram(topo), tuple(scopes_for_agreement(topo))


def broadcast_rounds(s: int, L: int) -> int:
    """1 seeding round, the General's clique BA, then one initiation plus one
    differential BA per tree layer."""
    r = PhaseKing(s).rounds
    return 1 + r + (L - 1) * (1 + r)


def agreement_rounds(s: int, L: int) -> int:
    r = PhaseKing(s).rounds
    return r + (L - 1) * (1 + r)


def _with_scopes(adversary: AdversarySpec | None, scopes) -> AdversarySpec:
    adversary = adversary or AdversarySpec()
    if not adversary.scopes:
        adversary = dataclasses.replace(adversary, scopes=scopes)
    return adversary


def _outcome(ex, corrupt, reference, validity, extra) -> ProtocolOutcome:
    decisions = ex.outputs
    given_up = frozenset(v for v, d in decisions.items() if d != reference)
    npc = frozenset(decisions) - given_up
    return ProtocolOutcome(
        decisions=decisions,
        corrupt=frozenset(corrupt),
        rounds=ex.rounds,
        messages={v: ex.messages_sent[v] for v in decisions},
        round_messages={v: ex.round_messages[v] for v in decisions},
        npc=npc,
        given_up=given_up,
        agreement=len(set(decisions.values())) <= 1,
        validity=validity,
        extra=extra,
        execution=ex,
    )


def multiscale_broadcast(
    topo: HypercubeTopology,
    general: int,
    value: int,
    adversary: AdversarySpec | None = None,
    record: bool = False,
    round_budget: int | None = None,
) -> ProtocolOutcome:
    """Broadcast ``value`` from ``general`` to every correct node."""
    prog, scopes = _broadcast_setup(topo, general)
    adversary = _with_scopes(adversary, scopes)
    ex = run_sync_execution(topo, prog, {general: value}, adversary, round_budget, record)
    general_ok = general not in adversary.corrupt
    decisions = ex.outputs
    reference = value if general_ok else common_value(decisions.values())
    validity = all(d == value for d in decisions.values()) if general_ok else None
    return _outcome(ex, adversary.corrupt, reference, validity, {"general": general, "value": value})


def multiscale_agreement(
    topo: HypercubeTopology,
    inputs: Mapping[int, int],
    adversary: AdversarySpec | None = None,
    record: bool = False,
    round_budget: int | None = None,
) -> ProtocolOutcome:
    """Per-clique BA, n/s parallel super-node broadcasts, then the lower median."""
    prog, scopes = _agreement_setup(topo)
    adversary = _with_scopes(adversary, scopes)
    ex = run_sync_execution(topo, prog, inputs, adversary, round_budget, record)
    correct_inputs = {clean(inputs.get(v)) for v in topo.nodes if v not in adversary.corrupt}
    unanimous = len(correct_inputs) == 1
    decisions = ex.outputs
    if unanimous:
        (v,) = correct_inputs
        v = DEFAULT_VALUE if v is None else v
        validity = all(d == v for d in decisions.values())
        reference = v
    else:
        validity = None
        reference = common_value(decisions.values())
    return _outcome(ex, adversary.corrupt, reference, validity, {"unanimous": unanimous})
