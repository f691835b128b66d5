"""Lock-step synchronous execution engine.

A protocol is a :class:`SyncProgram`: per-node ``init``/``send``/``recv``
callbacks that only ever see the calling node's own state.  Round ``k``
messages are computed from the states after round ``k-1`` and delivered
together, then every node transitions.  Corrupted nodes keep a shadow state
driven by the same program, and their strategy script rewrites each value of
the message the shadow would have sent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from .adversary import SILENT, AdversarySpec, ForgeContext, Silent


class EngineError(RuntimeError):
    pass


class RoundBudgetExceeded(EngineError):
    pass


class ContractBreach(EngineError):
    """A program detected that one of its own preconditions does not hold."""


class CorruptionRejected(EngineError):
    def __init__(self, violated: Sequence[str]):
        super().__init__(f"corruption set violates scopes: {', '.join(violated[:5])}")
        self.violated = tuple(violated)


class SyncProgram:
    """Base class for protocol programs interpreted by :func:`run_sync_execution`."""

    rounds: int = 0
    nodes: Sequence[int] = ()

    def init(self, node: int, value: Any) -> Any:
        return value

    def send(self, rnd: int, node: int, state: Any) -> Mapping[int, Any] | None:
        return None

    def recv(self, rnd: int, node: int, state: Any, inbox: Mapping[int, Any]) -> Any:
        return state

    def output(self, node: int, state: Any) -> Any:
        return state

    def senders(self, rnd: int) -> Iterable[int] | None:
        """Nodes that may send in round ``rnd``; ``None`` means all nodes."""
        return None

    def receivers(self, rnd: int) -> Iterable[int] | None:
        """Nodes whose state may change in round ``rnd``; ``None`` means all.

        Nodes left out keep their state and drop anything addressed to them.
        """
        return None

    def map_values(self, payload: Any, fn: Callable[[Any], Any]) -> Any:
        return fn(payload)

    def describe(self, state: Any) -> Any:
        return state


@dataclass
class RoundTrace:
    round: int
    states: dict[int, Any]
    messages: list[tuple[int, int, Any]]
    sent: dict[int, int]

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "states": {str(k): v for k, v in self.states.items()},
            "messages": [[u, v, p] for u, v, p in self.messages],
            "sent": {str(k): c for k, c in self.sent.items()},
        }


@dataclass
class Execution:
    rounds: int
    corrupt: frozenset[int]
    outputs: dict[int, Any]
    states: dict[int, Any]
    messages_sent: dict[int, int]
    round_messages: dict[int, int]
    max_per_round: dict[int, int]
    trace: list[RoundTrace] | None = field(default=None, repr=False)

    def metrics(self) -> dict:
        correct = [v for v in self.messages_sent if v not in self.corrupt]
        return {
            "rounds": self.rounds,
            "total_messages": sum(self.messages_sent[v] for v in correct),
            "max_messages_per_node": max((self.messages_sent[v] for v in correct), default=0),
            "max_round_messages_per_node": max((self.round_messages[v] for v in correct), default=0),
            "max_messages_per_node_round": max((self.max_per_round[v] for v in correct), default=0),
        }

    def trace_jsonl(self) -> str:
        if self.trace is None:
            raise EngineError("execution was run without trace recording")
        return "".join(json.dumps(r.to_record(), default=_jsonable, sort_keys=True) + "\n" for r in self.trace)


def _jsonable(x):
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    if hasattr(x, "__dict__"):
        return vars(x)
    if hasattr(x, "__slots__"):
        return {k: getattr(x, k) for k in x.__slots__}
    return str(x)


def run_sync_execution(
    topo,
    program: SyncProgram,
    inputs: Mapping[int, Any],
    adversary: AdversarySpec | None = None,
    round_budget: int | None = None,
    record: bool = False,
    check_links: bool = True,
) -> Execution:
    """Run ``program`` for ``program.rounds`` lock-step rounds on ``topo``."""
    adversary = adversary or AdversarySpec()
    if adversary.enforce and adversary.scopes:
        verdict = adversary.verdict()
        if not verdict:
            raise CorruptionRejected(verdict.violated)
    if round_budget is not None and program.rounds > round_budget:
        raise RoundBudgetExceeded(f"program needs {program.rounds} rounds, budget is {round_budget}")

    nodes = list(program.nodes)
    corrupt = adversary.corrupt
    scripts = adversary.scripts()
    site = topo.site
    neighbor_set = topo.neighbor_set
    states = {v: program.init(v, inputs.get(v)) for v in nodes}
    sent = dict.fromkeys(nodes, 0)
    round_msgs = dict.fromkeys(nodes, 0)
    max_round = dict.fromkeys(nodes, 0)
    trace: list[RoundTrace] | None = None
    if record:
        trace = [RoundTrace(0, {v: program.describe(states[v]) for v in nodes}, [], {})]

    send, recv = program.send, program.recv
    seed = adversary.seed
    for rnd in range(1, program.rounds + 1):
        listening = program.receivers(rnd)
        listening = nodes if listening is None else listening
        inboxes: dict[int, dict[int, Any]] = {v: {} for v in listening}
        box_of = inboxes.get
        active = program.senders(rnd)
        active = nodes if active is None else active
        log: list[tuple[int, int, Any]] | None = [] if record else None
        per_node: dict[int, int] = {}
        for u in active:
            out = send(rnd, u, states[u])
            if not out:
                continue
            if u in corrupt:
                out = _forge(program, scripts[u], out, rnd, u, corrupt, seed, site)
                if not out:
                    continue
            if check_links:
                nbrs = neighbor_set(u)
                if not nbrs.issuperset(out):
                    if u not in corrupt:
                        bad = min(v for v in out if v not in nbrs)
                        raise ContractBreach(f"round {rnd}: node {u} sent to non-neighbor {bad}")
                    # a faulty node cannot use links that do not exist
                    out = {v: p for v, p in out.items() if v in nbrs}
                    if not out:
                        continue
            # nodes outside ``listening`` ignore the round, but the message still counts as sent
            for v, payload in out.items():
                box = box_of(v)
                if box is not None:
                    box[u] = payload
            if log is not None:
                log.extend((u, v, p) for v, p in out.items())
            count = len(out)
            sent[u] += count
            round_msgs[u] += 1
            if count > max_round[u]:
                max_round[u] = count
            per_node[u] = count
        for v, box in inboxes.items():
            states[v] = recv(rnd, v, states[v], box)
        if trace is not None:
            trace.append(
                RoundTrace(rnd, {v: program.describe(states[v]) for v in nodes}, log, per_node)
            )

    outputs = {v: program.output(v, states[v]) for v in nodes if v not in corrupt}
    return Execution(program.rounds, corrupt, outputs, states, sent, round_msgs, max_round, trace)


def _forge(program, strategy, out, rnd, u, corrupt, seed, site):
    if isinstance(strategy, Silent):
        return None
    total = program.rounds
    su = site(u)
    forge = strategy.forge
    forged = {}
    if strategy.receiver_blind:
        cache = {}
        for v, payload in out.items():
            key = id(payload)
            if key not in cache:
                ctx = ForgeContext(rnd, total, u, v, su, site(v), seed, corrupt)
                cache[key] = program.map_values(payload, lambda val: forge(ctx, val))
            p = cache[key]
            if p is not SILENT:
                forged[v] = p
        return forged
    for v, payload in out.items():
        ctx = ForgeContext(rnd, total, u, v, su, site(v), seed, corrupt)
        p = program.map_values(payload, lambda val: forge(ctx, val))
        if p is not SILENT:
            forged[v] = p
    return forged
