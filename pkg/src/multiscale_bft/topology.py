"""Sparse network families: the s-base hypercube and the multi-layer expander stack.

Node ids are plain integers.  In the hypercube a node id is the integer value of
its base-s label, so digit ``k`` (counted from the right, starting at 1) is
``(node // s**(k-1)) % s``.  Dimension 1 is the rightmost digit: the s nodes that
share every other digit form one innermost clique, and the rightmost digit is
the node's *site* inside that clique.
"""

from __future__ import annotations

import json
import math
import string
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_NODES = 1 << 20
_DIGITS = string.digits + string.ascii_lowercase


class SizingError(ValueError):
    """Topology parameters are infeasible or exceed the memory budget."""


@dataclass(frozen=True)
class HypercubeTopology:
    """The s-base hypercube with ``L`` dimensions (``s**L`` nodes)."""

    s: int
    L: int

    kind = "hypercube"

    @property
    def n(self) -> int:
        return self.s**self.L

    @property
    def degree(self) -> int:
        return (self.s - 1) * self.L

    @property
    def nodes(self) -> range:
        return range(self.n)

    @property
    def num_cliques(self) -> int:
        return self.s ** (self.L - 1)

    def digit(self, node: int, k: int) -> int:
        return (node // self.s ** (k - 1)) % self.s

    def with_digit(self, node: int, k: int, value: int) -> int:
        w = self.s ** (k - 1)
        return node + (value - self.digit(node, k)) * w

    def label(self, node: int) -> str:
        return "".join(_DIGITS[self.digit(node, k)] for k in range(self.L, 0, -1))

    def parse(self, label: str) -> int:
        if len(label) > self.L:
            raise ValueError(f"label {label!r} has more than {self.L} digits")
        node = 0
        for ch in label:
            d = _DIGITS.index(ch.lower())
            if d >= self.s:
                raise ValueError(f"digit {ch!r} out of range for base {self.s}")
            node = node * self.s + d
        return node

    def site(self, node: int) -> int:
        return node % self.s

    def clique_of(self, node: int) -> int:
        return node // self.s

    def clique_members(self, clique: int) -> list[int]:
        return list(range(clique * self.s, (clique + 1) * self.s))

    def clique_label(self, clique: int) -> str:
        if self.L == 1:
            return ""
        return self.label(clique * self.s)[:-1]

    def adjacent(self, u: int, v: int) -> bool:
        if u == v:
            return False
        diff = 0
        while u or v:
            if u % self.s != v % self.s:
                diff += 1
                if diff > 1:
                    return False
            u //= self.s
            v //= self.s
        return diff == 1

    def neighbors(self, node: int) -> list[int]:
        out = []
        for k in range(1, self.L + 1):
            out.extend(dimension_neighbors(self, node, k))
        return out

    @cached_property
    def _neighbor_sets(self) -> list[frozenset[int]]:
        return [frozenset(self.neighbors(u)) for u in self.nodes]

    def neighbor_set(self, node: int) -> frozenset[int]:
        return self._neighbor_sets[node]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "s": self.s, "L": self.L, "n": self.n}


def build_hypercube(s: int, L: int, max_nodes: int = MAX_NODES) -> HypercubeTopology:
    if s < 4:
        raise SizingError(f"base s={s} is too small; kernels need s >= 3f+1 with f >= 1")
    if L < 1:
        raise SizingError(f"dimension count L={L} must be at least 1")
    if s**L > max_nodes:
        raise SizingError(f"s**L = {s**L} nodes exceeds the budget of {max_nodes}")
    return HypercubeTopology(s, L)


def dimension_neighbors(
    topo: HypercubeTopology, node: int, k: int, closed: bool = False
) -> list[int]:
    """Nodes whose labels differ from ``node`` only in digit ``k``.

    With ``closed=True`` the node itself is included, giving the full
    s-node line through ``node`` along dimension ``k`` (in digit order).
    """
    if not 1 <= k <= topo.L:
        raise ValueError(f"dimension {k} outside 1..{topo.L}")
    if not 0 <= node < topo.n:
        raise ValueError(f"node {node} outside the topology")
    w = topo.s ** (k - 1)
    base = node - topo.digit(node, k) * w
    return [base + d * w for d in range(topo.s) if closed or base + d * w != node]


# ---------------------------------------------------------------------------
# expander stack


@dataclass(frozen=True)
class ExpanderLayer:
    index: int
    size: int
    degree: int
    # adjacency[r][i] lists local neighbor indices of local node i in subnetwork r
    adjacency: tuple[tuple[tuple[int, ...], ...], ...]
    regenerations: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.adjacency)

    def block_of(self, node: int) -> int:
        return node // self.size

    def members(self, block: int) -> range:
        return range(block * self.size, (block + 1) * self.size)

    def neighbors(self, node: int) -> list[int]:
        r, i = divmod(node, self.size)
        off = r * self.size
        return [off + j for j in self.adjacency[r][i]]


@dataclass(frozen=True)
class ExpanderStack:
    """Layered expander over one physical node set.

    Layer ``l`` partitions ``range(n)`` into contiguous blocks of ``sizes[l]``
    nodes, each carrying its own ``degrees[l]``-regular graph.  Contiguity makes
    the partitions nested by construction.
    """

    n: int
    s0: int
    thetas: tuple[float, ...]
    degrees: tuple[int, ...]
    seed: int
    layers: tuple[ExpanderLayer, ...] = field(repr=False)

    kind = "expander"

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(layer.size for layer in self.layers)

    @property
    def nodes(self) -> range:
        return range(self.n)

    def site(self, node: int) -> int:
        return node % self.s0

    @cached_property
    def _neighbor_sets(self) -> list[frozenset[int]]:
        acc: list[set[int]] = [set() for _ in range(self.n)]
        for layer in self.layers:
            for u in range(self.n):
                acc[u].update(layer.neighbors(u))
        return [frozenset(a) for a in acc]

    def neighbor_set(self, node: int) -> frozenset[int]:
        return self._neighbor_sets[node]

    @cached_property
    def layer_neighbor_sets(self) -> tuple[tuple[frozenset[int], ...], ...]:
        """``layer_neighbor_sets[l][u]``: neighbors of ``u`` in its layer-``l`` subnetwork."""
        return tuple(
            tuple(frozenset(layer.neighbors(u)) for u in range(self.n)) for layer in self.layers
        )

    def block(self, layer: int, node: int) -> range:
        """Members of the layer-``layer`` subnetwork that contains ``node``."""
        lay = self.layers[layer]
        return lay.members(lay.block_of(node))

    def adjacent(self, u: int, v: int) -> bool:
        return v in self._neighbor_sets[u]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "s_0": self.s0,
            "theta": list(self.thetas),
            "d": list(self.degrees),
            "seed": self.seed,
        }


def layer_sizes(n: int, s0: int, thetas: Sequence[float]) -> list[int]:
    """``s_l = s_{l-1} / theta_l``; every size must be an exact divisor of ``n``."""
    sizes = [s0]
    for l, theta in enumerate(thetas, start=1):
        if not 0 < theta < 1:
            raise SizingError(f"theta_{l}={theta} must lie in (0, 1)")
        exact = Fraction(sizes[-1]) / Fraction(theta).limit_denominator(1 << 16)
        if exact.denominator != 1:
            raise SizingError(f"s_{l} = {sizes[-1]}/{theta} is not an integer")
        sizes.append(int(exact))
    for l, size in enumerate(sizes):
        if n % size:
            raise SizingError(f"n={n} is not divisible by s_{l}={size}")
    for l in range(1, len(sizes)):
        if sizes[l] % sizes[l - 1]:
            raise SizingError(f"s_{l}={sizes[l]} is not a multiple of s_{l - 1}")
    if sizes[-1] != n:
        raise SizingError(f"top layer size {sizes[-1]} differs from n={n}")
    return sizes


def _pair_stubs(size: int, degree: int, rng: np.random.Generator, max_restarts: int = 200):
    """Random d-regular simple graph by sequential stub pairing with restarts.

    Stubs are matched one random pair at a time among pairs that keep the graph
    simple; a dead end restarts the whole pairing.
    """
    for _ in range(max_restarts):
        edges: set[tuple[int, int]] = set()
        stubs = [v for v in range(size) for _ in range(degree)]
        ok = True
        while stubs:
            rng.shuffle(stubs)
            leftover = []
            for k in range(0, len(stubs) - 1, 2):
                u, v = stubs[k], stubs[k + 1]
                e = (u, v) if u < v else (v, u)
                if u != v and e not in edges:
                    edges.add(e)
                else:
                    leftover.extend((u, v))
            if len(leftover) == len(stubs):
                # no progress on a full shuffle: check whether any legal pair remains
                pool = sorted(set(leftover))
                legal = any(
                    (a, b) not in edges for i, a in enumerate(pool) for b in pool[i + 1 :]
                )
                if not legal:
                    ok = False
                    break
            stubs = leftover
        if ok:
            return edges
    return None


def random_regular_edges(size: int, degree: int, rng: np.random.Generator) -> set[tuple[int, int]]:
    if degree >= size or degree < 0:
        raise SizingError(f"degree {degree} must satisfy 0 <= d < {size}")
    if (degree * size) % 2:
        raise SizingError(f"d*s = {degree}*{size} is odd; no regular graph exists")
    complement = degree > (size - 1) // 2
    d = size - 1 - degree if complement else degree
    edges = _pair_stubs(size, d, rng)
    if edges is None:
        raise SizingError(f"stub pairing failed for a {d}-regular graph on {size} nodes")
    if complement:
        edges = {(u, v) for u in range(size) for v in range(u + 1, size) if (u, v) not in edges}
    return edges


def is_connected(adj: Sequence[Sequence[int]]) -> bool:
    if not adj:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(adj)


def _edges_to_adjacency(size: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, ...], ...]:
    adj: list[list[int]] = [[] for _ in range(size)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return tuple(tuple(sorted(a)) for a in adj)


def default_degrees(n: int, sizes: Sequence[int]) -> list[int]:
    """Clique at layer 0, ``min(s_l - 1, 3*ceil(log2 n))`` above it."""
    cap = 3 * max(1, math.ceil(math.log2(n)))
    out = [sizes[0] - 1]
    for size in sizes[1:]:
        d = min(size - 1, cap)
        if (d * size) % 2:
            d -= 1
        out.append(d)
    return out


def build_expander_stack(
    n: int,
    s0: int,
    thetas: Sequence[float] = (),
    degrees: Sequence[int] | None = None,
    seed: int = 0,
    max_regenerations: int = 50,
) -> ExpanderStack:
    sizes = layer_sizes(n, s0, thetas)
    if degrees is None:
        degrees = default_degrees(n, sizes)
    if len(degrees) != len(sizes):
        raise SizingError(f"expected {len(sizes)} layer degrees, got {len(degrees)}")
    layers = []
    for l, (size, d) in enumerate(zip(sizes, degrees)):
        if not 0 < d < size:
            raise SizingError(f"d_{l}={d} must satisfy 0 < d < s_{l}={size}")
        if (d * size) % 2:
            raise SizingError(f"d_{l}*s_{l} = {d}*{size} is odd")
        blocks = []
        regens = []
        for r in range(n // size):
            rng = np.random.default_rng([seed, l, r])
            for attempt in range(max_regenerations):
                adj = _edges_to_adjacency(size, random_regular_edges(size, d, rng))
                if is_connected(adj):
                    break
            else:
                raise SizingError(
                    f"layer {l} block {r}: no connected graph after {max_regenerations} attempts"
                )
            blocks.append(adj)
            regens.append(attempt)
        layers.append(ExpanderLayer(l, size, d, tuple(blocks), tuple(regens)))
    return ExpanderStack(n, s0, tuple(float(t) for t in thetas), tuple(degrees), seed, tuple(layers))


def second_eigenvalue_ratio(adj: Sequence[Sequence[int]], degree: int) -> float:
    size = len(adj)
    a = np.zeros((size, size))
    for u, nbrs in enumerate(adj):
        a[u, list(nbrs)] = 1.0
    eig = np.linalg.eigvalsh(a)
    return float(eig[-2] / degree)


@dataclass(frozen=True)
class ExpansionReport:
    layer: int
    ratios: tuple[float, ...]
    threshold: float

    @property
    def flagged(self) -> tuple[int, ...]:
        return tuple(r for r, x in enumerate(self.ratios) if x > self.threshold)

    @property
    def worst(self) -> float:
        return max(self.ratios)


def expansion_check(stack: ExpanderStack, layer: int, threshold: float = 0.9) -> ExpansionReport:
    """Second-largest adjacency eigenvalue over ``d`` for each subnetwork of a layer."""
    lay = stack.layers[layer]
    ratios = tuple(second_eigenvalue_ratio(adj, lay.degree) for adj in lay.adjacency)
    return ExpansionReport(layer, ratios, threshold)


def topology_to_json(topo) -> str:
    return json.dumps(topo.to_dict(), sort_keys=True)


def topology_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "hypercube":
        topo = build_hypercube(int(doc["s"]), int(doc["L"]))
    elif kind == "expander":
        topo = build_expander_stack(
            int(doc["n"]),
            int(doc["s_0"]),
            [float(t) for t in doc.get("theta", [])],
            [int(d) for d in doc["d"]] if doc.get("d") is not None else None,
            int(doc.get("seed", 0)),
        )
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    if "n" in doc and int(doc["n"]) != topo.n:
        raise SizingError(f"declared n={doc['n']} does not match derived n={topo.n}")
    return topo


def topology_from_json(text: str):
    return topology_from_dict(json.loads(text))
