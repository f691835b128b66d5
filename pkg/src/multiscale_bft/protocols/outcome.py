from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from ..engine import Execution


@dataclass
class ProtocolOutcome:
    decisions: dict[int, Any]
    corrupt: frozenset[int]
    rounds: int
    messages: dict[int, int]
    round_messages: dict[int, int]
    npc: frozenset[int]
    given_up: frozenset[int]
    agreement: bool
    validity: bool | None
    extra: dict[str, Any] = field(default_factory=dict)
    execution: Execution | None = field(default=None, repr=False)

    @property
    def zeta(self) -> frozenset[int]:
        """Faulty plus given-up nodes."""
        return self.corrupt | self.given_up

    @property
    def correct(self) -> frozenset[int]:
        return frozenset(self.decisions)

    def max_messages(self) -> int:
        return max((self.messages[v] for v in self.decisions), default=0)

    def max_round_messages(self) -> int:
        return max((self.round_messages[v] for v in self.decisions), default=0)

    def to_dict(self) -> dict:
        return {
            "decisions": {str(k): v for k, v in sorted(self.decisions.items())},
            "corrupt": sorted(self.corrupt),
            "npc": sorted(self.npc),
            "given_up": sorted(self.given_up),
            "agreement": self.agreement,
            "validity": self.validity,
            "rounds": self.rounds,
            "max_messages": self.max_messages(),
            "max_round_messages": self.max_round_messages(),
            "extra": {k: v for k, v in self.extra.items() if not k.startswith("_")},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_plain)


def _plain(x):
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)


def common_value(values: Iterable[Any]) -> Any:
    """Most frequent value, lowest on ties."""
    counts = Counter(values)
    if not counts:
        return None
    return max(counts.items(), key=lambda kv: (kv[1], -kv[0] if isinstance(kv[0], int) else 0))[0]


@dataclass(frozen=True)
class IncompletenessEstimate:
    """Given-up counts over a tested placement family.

    ``x_estimate`` is the largest count observed, which only bounds the true
    worst case from below unless the family covered every placement.
    """

    x_estimate: int
    per_placement: tuple[int, ...]
    distribution: dict[int, int]
    exhaustive: bool = False

    @property
    def label(self) -> str:
        return "exact maximum" if self.exhaustive else "lower bound on the maximum"


def compute_incompleteness(outcomes: Iterable[ProtocolOutcome], exhaustive: bool = False) -> IncompletenessEstimate:
    sizes = tuple(len(o.given_up) for o in outcomes)
    return IncompletenessEstimate(
        max(sizes, default=0), sizes, dict(sorted(Counter(sizes).items())), exhaustive
    )
