"""Graph types shared by the parser, ring perception, and descriptors."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

BOND_ORDERS = ("single", "double", "triple", "aromatic")
ORDER_VALUE = {"single": 1, "double": 2, "triple": 3}


@dataclass
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    implicit_h: int = 0
    index: int = 0


@dataclass
class Bond:
    i: int
    j: int
    order: str
    in_ring: bool = False
    # Bond order under the kekulized assignment: equals the numeric order
    # for plain bonds, 1 or 2 for aromatic bonds once perceived.
    kekule_order: int = 0

    def other(self, idx: int) -> int:
        return self.j if idx == self.i else self.i

    def key(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class Ring:
    """One ring of the smallest set of smallest rings."""

    atoms: tuple[int, ...]
    aromatic: bool
    hetero: bool

    @property
    def size(self) -> int:
        return len(self.atoms)


@dataclass
class MolGraph:
    """Perceived molecular graph.

    Treated as immutable once the parser returns it; nothing in the package
    mutates a perceived graph, so instances are safe to share.
    """

    atoms: list[Atom]
    bonds: list[Bond]
    rings: list[Ring] = field(default_factory=list)
    _adjacency: list[list[int]] | None = field(default=None, repr=False)

    def adjacency(self) -> list[list[int]]:
        """Bond indices incident to each atom."""
        if self._adjacency is None:
            adj: list[list[int]] = [[] for _ in self.atoms]
            for bidx, bond in enumerate(self.bonds):
                adj[bond.i].append(bidx)
                adj[bond.j].append(bidx)
            self._adjacency = adj
        return self._adjacency

    def neighbors(self, idx: int) -> list[tuple[int, Bond]]:
        """(neighbor atom index, bond) pairs for one atom."""
        return [(self.bonds[b].other(idx), self.bonds[b]) for b in self.adjacency()[idx]]

    def heavy_degree(self, idx: int) -> int:
        return len(self.adjacency()[idx])

    def fragments(self) -> list[list[int]]:
        """Connected components as sorted atom-index lists."""
        seen = [False] * len(self.atoms)
        out: list[list[int]] = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            comp = []
            queue = deque([start])
            seen[start] = True
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v, _ in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        queue.append(v)
            out.append(sorted(comp))
        return out

    def bond_between(self, i: int, j: int) -> Bond | None:
        for bidx in self.adjacency()[i]:
            bond = self.bonds[bidx]
            if bond.other(i) == j:
                return bond
        return None


@dataclass(frozen=True)
class ElementCounts:
    n_C: int = 0
    n_H: int = 0
    n_N: int = 0
    n_O: int = 0
    n_Cl: int = 0
    n_F: int = 0

    @property
    def n_atoms(self) -> int:
        return self.n_C + self.n_H + self.n_N + self.n_O + self.n_Cl + self.n_F


def molecular_formula(g: MolGraph) -> ElementCounts:
    """Element counts including implicit hydrogens."""
    counts = {"C": 0, "H": 0, "N": 0, "O": 0, "Cl": 0, "F": 0}
    for atom in g.atoms:
        counts[atom.element] += 1
        counts["H"] += atom.implicit_h
    return ElementCounts(
        n_C=counts["C"],
        n_H=counts["H"],
        n_N=counts["N"],
        n_O=counts["O"],
        n_Cl=counts["Cl"],
        n_F=counts["F"],
    )


def graph_distances(g: MolGraph, start: int) -> list[int]:
    """BFS distances over the heavy-atom graph; -1 marks unreachable atoms."""
    dist = [-1] * len(g.atoms)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v, _ in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist
