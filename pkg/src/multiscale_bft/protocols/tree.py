"""Dissemination tree over innermost cliques."""

from __future__ import annotations

from ..topology import HypercubeTopology


class DisseminationTree:
    """Spanning tree of innermost cliques rooted at ``root``.

    Clique digit ``j`` (1-based from the right) is hypercube dimension ``j+1``.
    With ``diff`` the digit-wise difference to the root modulo s, a clique's
    layer is the index of the highest nonzero digit of ``diff`` and its parent
    is obtained by setting that digit back to the root's.
    """

    def __init__(self, topo: HypercubeTopology, root: int = 0):
        if not 0 <= root < topo.num_cliques:
            raise ValueError(f"clique {root} outside the topology")
        self.topo = topo
        self.root = root
        s, m = topo.s, topo.num_cliques
        self.layer = [0] * m
        self.parent: list[int | None] = [None] * m
        for w in range(m):
            top = 0
            for j in range(1, topo.L):
                if _digit(w, j, s) != _digit(root, j, s):
                    top = j
            self.layer[w] = top
            if top:
                p = w + (_digit(root, top, s) - _digit(w, top, s)) * s ** (top - 1)
                self.parent[w] = p

    @property
    def depth(self) -> int:
        return max(self.layer)

    def __len__(self) -> int:
        return self.topo.num_cliques

    def edges(self) -> list[tuple[int, int]]:
        """``(child, parent)`` pairs in clique-id order."""
        return [(w, p) for w, p in enumerate(self.parent) if p is not None]

    def at_layer(self, t: int) -> list[int]:
        return [w for w, lay in enumerate(self.layer) if lay == t]

    def crossing_dimension(self, clique: int) -> int:
        """Hypercube dimension of the edge joining ``clique`` to its parent."""
        return self.layer[clique] + 1


def _digit(x: int, j: int, s: int) -> int:
    return (x // s ** (j - 1)) % s
