"""Clique-scale building blocks: immediate BA, differential BA, initiation and
the one-round majority relay.

Both BA kernels are the same phase-king machine.  Each of the ``f+1`` phases
has three rounds:

1. every member broadcasts its value; a member that sees at least ``s - f``
   copies of one value proposes it;
2. every member broadcasts its proposal; a value proposed more than ``f``
   times is adopted, and at least ``s - f`` proposals lock it;
3. the phase king (site ``phase``) broadcasts its value, which every unlocked
   member adopts.

With ``s - f`` correct holders of ``v`` every correct member proposes and
locks ``v`` in the first phase, which is the differential validity contract.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .adversary import SILENT, AdversarySpec
from .engine import ContractBreach, Execution, SyncProgram, run_sync_execution
from .topology import HypercubeTopology, dimension_neighbors

DEFAULT_VALUE = 0


class KernelPreconditionError(ValueError):
    """The corruption set exceeds the kernel's fault bound."""


def clean(value: Any) -> Any:
    """Map anything that is not a plain integer to ``None`` (bottom)."""
    if type(value) is int:
        return value
    return None


def majority_relay(values: Iterable[Any]) -> Any:
    """Strict-majority value of ``values``, else the lowest value received."""
    counts = Counter(v for v in values if v is not None)
    if not counts:
        raise ValueError("majority_relay needs at least one received value")
    total = sum(counts.values())
    best, n = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    if 2 * n > total:
        return best
    return min(counts)


class PhaseKing:
    """Per-instance rules of the phase-king machine for ``size`` members.

    Instance state is a 3-item list ``[value, proposal, locked]``.
    """

    __slots__ = ("size", "f", "keep", "rounds")

    def __init__(self, size: int, fault_bound: int | None = None):
        f = size // 3 if fault_bound is None else fault_bound
        if size < 3 * f + 1:
            raise ValueError(f"{size} members cannot tolerate {f} faults")
        self.size = size
        self.f = f
        self.keep = size - f
        self.rounds = 3 * (f + 1)

    @staticmethod
    def start(value: Any) -> list:
        v = clean(value)
        return [DEFAULT_VALUE if v is None else v, None, False]

    def is_broadcast_round(self, j: int) -> bool:
        return j % 3 != 2

    def king(self, j: int) -> int:
        return j // 3

    def message(self, j: int, site: int, st: list) -> Any:
        """Value a member sends in kernel round ``j`` (0-based), or SILENT."""
        step = j % 3
        if step == 0:
            return st[0]
        if step == 1:
            return st[1]
        return st[0] if site == j // 3 else SILENT

    def update(self, j: int, site: int, st: list, received: Sequence[Any]) -> None:
        """Apply kernel round ``j``.  ``received`` holds values from the other
        members (for king rounds: the king's value, if any)."""
        step = j % 3
        if step == 0:
            counts = {st[0]: 1}
            for v in received:
                if type(v) is int:
                    counts[v] = counts.get(v, 0) + 1
            prop = None
            for v, c in counts.items():
                if c >= self.keep:
                    prop = v
                    break
            st[1] = prop
        elif step == 1:
            counts = {}
            if st[1] is not None:
                counts[st[1]] = 1
            for v in received:
                if type(v) is int:
                    counts[v] = counts.get(v, 0) + 1
            st[2] = False
            if counts:
                best, c = max(counts.items(), key=_by_count)
                if c > self.f:
                    st[0] = best
                    st[2] = c >= self.keep
        else:
            if site != j // 3 and not st[2]:
                for v in received:
                    if type(v) is int:
                        st[0] = v
                        break


def _by_count(kv):
    return kv[1], -kv[0]


# ---------------------------------------------------------------------------
# standalone kernel runs


@dataclass(frozen=True)
class KernelConfig:
    participants: tuple[int, ...]
    f: int | None = None
    round_budget: int | None = None

    def __post_init__(self):
        if len(set(self.participants)) != len(self.participants):
            raise ValueError("participants must be distinct")
        if self.f is None:
            object.__setattr__(self, "f", len(self.participants) // 3)
        if len(self.participants) < 3 * self.f + 1:
            raise ValueError(f"s={len(self.participants)} < 3f+1 with f={self.f}")

    @classmethod
    def of_size(cls, s: int, **kw) -> "KernelConfig":
        return cls(tuple(range(s)), **kw)

    @property
    def s(self) -> int:
        return len(self.participants)


@dataclass
class KernelOutcome:
    decisions: dict[int, Any]
    rounds: int
    messages: dict[int, int]
    execution: Execution | None = field(default=None, repr=False)

    @property
    def agreed(self) -> bool:
        return len(set(self.decisions.values())) <= 1

    @property
    def value(self) -> Any:
        vals = set(self.decisions.values())
        return vals.pop() if len(vals) == 1 else None


class CompleteGraph:
    """The participants of one kernel instance, fully connected."""

    def __init__(self, members: Sequence[int]):
        self.members = tuple(members)
        self._index = {v: i for i, v in enumerate(self.members)}
        self._nbrs = {v: frozenset(self.members) - {v} for v in self.members}

    @property
    def nodes(self):
        return self.members

    def site(self, node: int) -> int:
        return self._index[node]

    def neighbor_set(self, node: int) -> frozenset[int]:
        return self._nbrs[node]

    def adjacent(self, u: int, v: int) -> bool:
        return u != v and u in self._index and v in self._index


class KernelProgram(SyncProgram):
    def __init__(self, cfg: KernelConfig):
        self.cfg = cfg
        self.pk = PhaseKing(cfg.s, cfg.f)
        self.rounds = self.pk.rounds
        self.nodes = cfg.participants
        self.site = {v: i for i, v in enumerate(cfg.participants)}

    def init(self, node, value):
        return PhaseKing.start(value)

    def senders(self, rnd):
        j = rnd - 1
        if self.pk.is_broadcast_round(j):
            return None
        return (self.cfg.participants[self.pk.king(j)],)

    def send(self, rnd, node, st):
        msg = self.pk.message(rnd - 1, self.site[node], st)
        if msg is SILENT:
            return None
        return {v: msg for v in self.cfg.participants if v != node}

    def recv(self, rnd, node, st, inbox):
        st = list(st)
        self.pk.update(rnd - 1, self.site[node], st, list(inbox.values()))
        return st

    def output(self, node, st):
        return st[0]

    def describe(self, st):
        return list(st)


def _check_kernel_adversary(cfg: KernelConfig, adversary: AdversarySpec | None) -> AdversarySpec:
    adversary = adversary or AdversarySpec()
    inside = adversary.corrupt & set(cfg.participants)
    if len(inside) > cfg.f:
        raise KernelPreconditionError(
            f"{len(inside)} corrupted participants exceed the kernel bound f={cfg.f}"
        )
    return adversary


def _run_kernel(cfg, inputs, adversary, record):
    adversary = _check_kernel_adversary(cfg, adversary)
    prog = KernelProgram(cfg)
    missing = [v for v in cfg.participants if v not in adversary.corrupt and v not in inputs]
    if missing:
        raise ContractBreach(f"no input for correct participants {missing}")
    ex = run_sync_execution(
        CompleteGraph(cfg.participants), prog, inputs, adversary, cfg.round_budget, record
    )
    return KernelOutcome(ex.outputs, ex.rounds, ex.messages_sent, ex)


def run_immediate_ba_As(
    cfg: KernelConfig,
    inputs: Mapping[int, Any],
    adversary: AdversarySpec | None = None,
    record: bool = False,
) -> KernelOutcome:
    """Immediate BA inside one clique: agreement, validity, fixed round count."""
    return _run_kernel(cfg, inputs, adversary, record)


def run_differential_ba_Bs(
    cfg: KernelConfig,
    inputs: Mapping[int, Any],
    adversary: AdversarySpec | None = None,
    record: bool = False,
) -> KernelOutcome:
    """Differential BA: all correct decide ``v`` once ``s - f`` correct members hold it."""
    return _run_kernel(cfg, inputs, adversary, record)


def kernel_rounds(s: int) -> int:
    return PhaseKing(s).rounds


# ---------------------------------------------------------------------------
# initiation


class InitiationProgram(SyncProgram):
    rounds = 1

    def __init__(self, topo: HypercubeTopology, source: int, target: int, k: int):
        self.topo = topo
        self.k = k
        self.src = topo.clique_members(source)
        self.dst = topo.clique_members(target)
        self.nodes = self.src + self.dst
        self.counterpart = {}
        for u in self.src:
            across = dimension_neighbors(topo, u, k)
            match = [v for v in across if topo.clique_of(v) == target]
            self.counterpart[u] = match[0]
        self._targets = set(self.dst)
        self._from = {v: u for u, v in self.counterpart.items()}

    def senders(self, rnd):
        return self.src

    def send(self, rnd, node, value):
        return {self.counterpart[node]: value}

    def recv(self, rnd, node, state, inbox):
        if node in self._targets:
            got = clean(inbox.get(self._from[node]))
            return DEFAULT_VALUE if got is None else got
        return state


def run_initiation_Is(
    topo: HypercubeTopology,
    source_state: Mapping[int, Any],
    source_clique: int,
    target_clique: int,
    k: int,
    adversary: AdversarySpec | None = None,
) -> dict[int, Any]:
    """One round: each target node takes its dimension-``k`` counterpart's value.

    Returns the initialized value of every correct target node.
    """
    if not 2 <= k <= topo.L:
        raise ValueError(f"initiation runs across dimensions 2..{topo.L}, got {k}")
    a = topo.clique_members(source_clique)[0]
    b = topo.clique_members(target_clique)[0]
    if source_clique == target_clique or b not in dimension_neighbors(topo, a, k):
        raise ValueError(f"cliques {source_clique} and {target_clique} are not adjacent across dimension {k}")
    prog = InitiationProgram(topo, source_clique, target_clique, k)
    ex = run_sync_execution(topo, prog, dict(source_state), adversary)
    return {v: ex.outputs[v] for v in prog.dst if v in ex.outputs}
