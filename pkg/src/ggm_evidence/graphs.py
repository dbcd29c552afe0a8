"""Undirected graphs on p nodes, stored as dense 0/1 adjacency matrices.

Nodes are 0-based. The diagonal is always 1 (diagonal precision entries are
never constrained), and the neighbour set of ``j`` excludes ``j`` itself.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, IndexOutOfRange


class Graph:
    """Immutable undirected graph."""

    __slots__ = ("adj", "_nb")

    def __init__(self, adj):
        a = np.asarray(adj)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {a.shape}")
        if not np.all(np.isin(a, (0, 1))):
            raise DomainError("adjacency entries must be 0 or 1")
        a = a.astype(np.int64)
        if not np.array_equal(a, a.T):
            raise DomainError("adjacency must be symmetric")
        if not np.all(np.diag(a) == 1):
            warnings.warn("graph diagonal set to 1", stacklevel=2)
            np.fill_diagonal(a, 1)
        a.setflags(write=False)
        object.__setattr__(self, "adj", a)
        nb = tuple(tuple(int(k) for k in np.flatnonzero(a[:, j]) if k != j) for j in range(a.shape[0]))
        object.__setattr__(self, "_nb", nb)

    def __setattr__(self, name, value):
        raise AttributeError("Graph is immutable")

    @property
    def p(self) -> int:
        return self.adj.shape[0]

    def _check(self, j: int):
        if not 0 <= j < self.p:
            raise IndexOutOfRange(f"node {j} out of range for p={self.p}")

    def neighbors(self, j: int) -> tuple[int, ...]:
        self._check(j)
        return self._nb[j]

    def non_neighbors(self, j: int) -> tuple[int, ...]:
        """Nodes other than ``j`` that are not adjacent to ``j``."""
        self._check(j)
        nb = set(self._nb[j])
        return tuple(k for k in range(self.p) if k != j and k not in nb)

    def n_edges(self) -> int:
        return int((self.adj.sum() - self.p) // 2)

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel so that new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm)
        return Graph(self.adj[np.ix_(perm, perm)])

    def is_complete(self) -> bool:
        return bool(np.all(self.adj == 1))

    def mask(self) -> np.ndarray:
        return self.adj.astype(bool)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())

    def __repr__(self):
        return f"Graph(p={self.p}, edges={self.n_edges()})"


def neighbors(g: Graph, j: int) -> tuple[int, ...]:
    return g.neighbors(j)


def complete_graph(p: int) -> Graph:
    return Graph(np.ones((p, p), dtype=int))


def empty_graph(p: int) -> Graph:
    return Graph(np.eye(p, dtype=int))


def banded_graph(p: int, bandwidth: int) -> Graph:
    i, j = np.indices((p, p))
    return Graph((np.abs(i - j) <= bandwidth).astype(int))


def random_graph(p: int, edge_prob: float, rng: np.random.Generator) -> Graph:
    if not 0.0 <= edge_prob <= 1.0:
        raise DomainError("edge_prob must lie in [0, 1]")
    upper = np.triu(rng.random((p, p)) < edge_prob, 1).astype(int)
    return Graph(upper + upper.T + np.eye(p, dtype=int))


def from_edges(p: int, edges) -> Graph:
    a = np.eye(p, dtype=int)
    for i, j in edges:
        a[i, j] = a[j, i] = 1
    return Graph(a)
