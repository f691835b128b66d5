"""Multi-scale static adversary: scope constraints, corruption placement, and
Byzantine strategy scripts."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .topology import ExpanderStack, HypercubeTopology


class InfeasiblePlacement(RuntimeError):
    """No corruption set of the requested size could be found."""


def third(size: int) -> Fraction:
    return Fraction(1, 3)


def scope_bound(size: int, alpha: Callable[[int], float | Fraction] = third) -> int:
    """``floor(alpha(s) * s)``, exact for rational resilience functions."""
    a = alpha(size)
    if isinstance(a, (int, Fraction)):
        return math.floor(Fraction(a) * size)
    return math.floor(a * size + 1e-9)


@dataclass(frozen=True)
class Scope:
    name: str
    nodes: frozenset[int]
    bound: int

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violated: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


def validate_corruption(
    corrupt: Iterable[int], scopes: Sequence[Scope], sacrificed: Iterable[str] = ()
) -> Verdict:
    faulty = set(corrupt)
    skip = set(sacrificed)
    bad = tuple(
        sc.name for sc in scopes if sc.name not in skip and len(faulty & sc.nodes) > sc.bound
    )
    return Verdict(not bad, bad)


# ---------------------------------------------------------------------------
# scope families


def clique_scopes(topo: HypercubeTopology, alpha=third) -> list[Scope]:
    return [
        Scope(f"clique:{topo.clique_label(c)}", frozenset(topo.clique_members(c)), scope_bound(topo.s, alpha))
        for c in range(topo.num_cliques)
    ]


def pair_scope(topo: HypercubeTopology, c1: int, c2: int, alpha=third) -> Scope:
    a, b = sorted((c1, c2))
    nodes = frozenset(topo.clique_members(a)) | frozenset(topo.clique_members(b))
    # the 2s-node initiation scope keeps the s-node bound
    return Scope(
        f"pair:{topo.clique_label(a)}|{topo.clique_label(b)}", nodes, scope_bound(topo.s, alpha)
    )


def scopes_for_broadcast(topo: HypercubeTopology, tree=None, alpha=third) -> list[Scope]:
    """One scope per innermost clique plus one per tree edge (adjacent clique pair)."""
    from .protocols.tree import DisseminationTree

    if tree is None:
        tree = DisseminationTree(topo, 0)
    scopes = clique_scopes(topo, alpha)
    scopes.extend(pair_scope(topo, child, parent, alpha) for child, parent in tree.edges())
    return scopes


def scopes_for_agreement(topo: HypercubeTopology, alpha=third) -> list[Scope]:
    """Clique scopes plus a pair scope for every clique pair used by any root's tree."""
    from .protocols.tree import DisseminationTree

    pairs = set()
    for root in range(topo.num_cliques):
        for child, parent in DisseminationTree(topo, root).edges():
            pairs.add((min(child, parent), max(child, parent)))
    scopes = clique_scopes(topo, alpha)
    scopes.extend(pair_scope(topo, a, b, alpha) for a, b in sorted(pairs))
    return scopes


def scopes_for_stack(stack: ExpanderStack, alpha=third) -> list[Scope]:
    out = []
    for layer in stack.layers:
        b = scope_bound(layer.size, alpha)
        for r in range(layer.count):
            out.append(Scope(f"layer{layer.index}:{r}", frozenset(layer.members(r)), b))
    return out


# ---------------------------------------------------------------------------
# placements


@dataclass(frozen=True)
class Placement:
    nodes: frozenset[int]
    attempts: int
    method: str


class _ScopeCounter:
    def __init__(self, scopes: Sequence[Scope], sacrificed: Iterable[str] = ()):
        skip = set(sacrificed)
        self.scopes = [sc for sc in scopes if sc.name not in skip]
        self.member_of: dict[int, list[int]] = {}
        for i, sc in enumerate(self.scopes):
            for v in sc.nodes:
                self.member_of.setdefault(v, []).append(i)
        self.counts = [0] * len(self.scopes)

    def reset(self):
        self.counts = [0] * len(self.scopes)

    def fits(self, v: int) -> bool:
        return all(self.counts[i] < self.scopes[i].bound for i in self.member_of.get(v, ()))

    def add(self, v: int):
        for i in self.member_of.get(v, ()):
            self.counts[i] += 1


def sample_corruption(
    scopes: Sequence[Scope],
    target: int,
    seed: int,
    universe: Sequence[int] | None = None,
    sacrificed: Iterable[str] = (),
    forced: Iterable[int] = (),
    max_attempts: int = 2000,
    rejection_attempts: int = 200,
) -> Placement:
    """Draw a valid corruption set of exactly ``target`` nodes.

    Plain rejection sampling is tried first; when it keeps failing (tight bounds
    on large instances) a randomized sequential fill is used: nodes are visited
    in random order and kept whenever every scope still holds.
    """
    sacrificed = tuple(sacrificed)
    forced = sorted(set(forced))
    if universe is None:
        universe = sorted(set().union(*(sc.nodes for sc in scopes))) if scopes else []
    universe = sorted(universe)
    if target == 0 and not forced:
        return Placement(frozenset(), 0, "empty")
    if target < len(forced) or target > len(universe):
        raise InfeasiblePlacement(f"target {target} outside [{len(forced)}, {len(universe)}]")
    counter = _ScopeCounter(scopes, sacrificed)
    capacity = sum(sc.bound for sc in counter.scopes)
    covered = set().union(*(sc.nodes for sc in counter.scopes)) if counter.scopes else set()
    if covered >= set(universe) and target > capacity:
        raise InfeasiblePlacement(f"target {target} exceeds the total scope capacity {capacity}")
    rng = np.random.default_rng(seed)
    pool = [v for v in universe if v not in set(forced)]
    need = target - len(forced)
    if not validate_corruption(forced, scopes, sacrificed):
        raise InfeasiblePlacement("forced nodes already violate a scope")
    attempts = 0
    for _ in range(rejection_attempts):
        attempts += 1
        pick = rng.choice(len(pool), size=need, replace=False) if need else []
        cand = set(forced) | {pool[i] for i in pick}
        if validate_corruption(cand, scopes, sacrificed):
            return Placement(frozenset(cand), attempts, "rejection")
    for _ in range(max_attempts):
        attempts += 1
        counter.reset()
        for v in forced:
            counter.add(v)
        chosen = list(forced)
        for i in rng.permutation(len(pool)):
            v = pool[i]
            if counter.fits(v):
                counter.add(v)
                chosen.append(v)
                if len(chosen) == target:
                    return Placement(frozenset(chosen), attempts, "sequential")
    raise InfeasiblePlacement(f"no valid placement of size {target} after {attempts} attempts")


def enumerate_placements(
    scopes: Sequence[Scope], universe: Sequence[int], max_size: int
) -> Iterator[frozenset[int]]:
    """All valid corruption sets of size <= max_size, smallest first, lexicographic."""
    universe = sorted(universe)
    counter = _ScopeCounter(scopes)

    def rec(start: int, size: int, chosen: list[int]):
        if len(chosen) == size:
            yield frozenset(chosen)
            return
        for idx in range(start, len(universe) - (size - len(chosen)) + 1):
            v = universe[idx]
            if counter.fits(v):
                counter.add(v)
                chosen.append(v)
                yield from rec(idx + 1, size, chosen)
                chosen.pop()
                for i in counter.member_of.get(v, ()):
                    counter.counts[i] -= 1

    for size in range(max_size + 1):
        yield from rec(0, size, [])


# ---------------------------------------------------------------------------
# strategy scripts

SILENT = object()


def _mix(*xs: int) -> int:
    # splitmix64 over the tuple, independent of PYTHONHASHSEED
    h = 0x9E3779B97F4A7C15
    for x in xs:
        h = (h ^ (x & 0xFFFFFFFFFFFFFFFF)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 31
        h = h * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 29
    return h


class ForgeContext(NamedTuple):
    """What a corrupted node's script sees when forging one value."""

    round: int
    total_rounds: int
    sender: int
    receiver: int
    sender_site: int
    receiver_site: int
    seed: int
    corrupt: frozenset[int]


class Strategy:
    name = "abstract"
    # scripts whose output ignores the receiver can forge once per send
    receiver_blind = False

    def forge(self, ctx: ForgeContext, honest):
        raise NotImplementedError

    def __repr__(self):
        return f"<{self.name}>"


class Silent(Strategy):
    name = "silent"
    receiver_blind = True

    def forge(self, ctx, honest):
        return SILENT


class Constant(Strategy):
    receiver_blind = True

    def __init__(self, value: int):
        self.value = value
        self.name = f"constant-{value}"

    def forge(self, ctx, honest):
        return self.value


class Equivocate(Strategy):
    """Tells receivers on even sites 0 and receivers on odd sites 1."""

    name = "equivocate"

    def forge(self, ctx, honest):
        return ctx.receiver_site % 2


class SeededRandom(Strategy):
    name = "random"

    def __init__(self, values: Sequence[int] = (0, 1)):
        self.values = tuple(values)

    def forge(self, ctx, honest):
        h = _mix(ctx.seed, ctx.round, ctx.sender_site, ctx.receiver_site)
        if h % 7 == 0:
            return None
        return self.values[(h >> 8) % len(self.values)]


class CopyThenFlip(Strategy):
    """Behaves honestly for the first half of the execution, then flips values."""

    name = "flip"
    receiver_blind = True

    def forge(self, ctx, honest):
        if 2 * ctx.round <= ctx.total_rounds:
            return honest
        if honest is None:
            return None
        if isinstance(honest, int):
            return 1 - honest if honest in (0, 1) else honest + 1
        return honest


STRATEGIES: dict[str, Callable[[], Strategy]] = {
    "silent": Silent,
    "constant-0": lambda: Constant(0),
    "constant-1": lambda: Constant(1),
    "equivocate": Equivocate,
    "random": SeededRandom,
    "flip": CopyThenFlip,
}

SCRIPT_FAMILY = ("silent", "constant-0", "equivocate", "random", "flip")


def make_strategy(name: str) -> Strategy:
    if name.startswith("constant-") and name not in STRATEGIES:
        return Constant(int(name.split("-", 1)[1]))
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise ValueError(f"unknown strategy script {name!r}") from None


@dataclass(frozen=True)
class AdversarySpec:
    """Static corruption set plus the scripts its members run."""

    corrupt: frozenset[int] = frozenset()
    scopes: tuple[Scope, ...] = ()
    strategy: str | dict[int, str] = "silent"
    seed: int = 0
    sacrificed: frozenset[str] = frozenset()
    enforce: bool = True

    @classmethod
    def of(cls, corrupt=(), scopes=(), strategy="silent", seed=0, sacrificed=(), enforce=True):
        return cls(frozenset(corrupt), tuple(scopes), strategy, seed, frozenset(sacrificed), enforce)

    def script_for(self, node: int) -> str:
        if isinstance(self.strategy, str):
            return self.strategy
        return self.strategy.get(node, "silent")

    def verdict(self) -> Verdict:
        return validate_corruption(self.corrupt, self.scopes, self.sacrificed)

    def scripts(self) -> dict[int, Strategy]:
        cache: dict[str, Strategy] = {}
        out = {}
        for v in sorted(self.corrupt):
            name = self.script_for(v)
            if name not in cache:
                cache[name] = make_strategy(name)
            out[v] = cache[name]
        return out


def relabel(corrupt: Iterable[int], mapping: Callable[[int], int]) -> frozenset[int]:
    return frozenset(mapping(v) for v in corrupt)


def combinations_upto(items: Sequence[int], k: int) -> Iterator[tuple[int, ...]]:
    for size in range(k + 1):
        yield from itertools.combinations(items, size)
