"""Undirected simple graphs in CSR form, edge-list I/O and component labeling."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

_VERTICES_HEADER = re.compile(r"^#\s*vertices\s+(\d+)\s*$")


class GraphFormatError(ValueError):
    """Malformed edge-list or community file."""

    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line.rstrip()!r}")
        self.lineno = lineno


class Graph:
    """Immutable undirected simple graph.

    Adjacency is stored contiguously: the neighbors of ``v`` are
    ``indices[indptr[v]:indptr[v + 1]]``, sorted ascending.
    """

    __slots__ = ("indptr", "indices", "_lists")

    def __init__(self, indptr: np.ndarray, indices: np.ndarray):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False
        self._lists = None

    @classmethod
    def from_edges(cls, vertex_count: int, edges) -> "Graph":
        """Build a graph from an ``(m, 2)`` array of endpoints.

        Self-loops are dropped and duplicate edges (in either orientation)
        are collapsed.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= vertex_count):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = np.unique(lo * max(vertex_count, 1) + hi)
        lo = keys // max(vertex_count, 1)
        hi = keys % max(vertex_count, 1)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(vertex_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=vertex_count), out=indptr[1:])
        return cls(indptr, dst)

    @classmethod
    def empty(cls, vertex_count: int = 0) -> "Graph":
        return cls(np.zeros(vertex_count + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @property
    def vertex_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists as plain Python lists (cached)."""
        if self._lists is None:
            self._lists = [a.tolist() for a in np.split(self.indices, self.indptr[1:-1])] \
                if self.vertex_count else []
        return self._lists

    def edges(self) -> np.ndarray:
        """Each undirected edge once, as ``(u, v)`` rows with ``u < v``."""
        src = np.repeat(np.arange(self.vertex_count, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.indptr.tobytes(), self.indices.tobytes()))

    def __repr__(self):
        return f"Graph(vertex_count={self.vertex_count}, edge_count={self.edge_count})"


@dataclass(frozen=True)
class ComponentLabeling:
    component_of: np.ndarray
    component_count: int
    component_sizes: np.ndarray

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.component_of == c)


def load_edge_list(stream: TextIO | Iterable[str]) -> Graph:
    """Parse ``u v`` lines; ``#`` starts a comment, ``# vertices N`` sets a minimum vertex count."""
    declared = 0
    pairs: list[tuple[int, int]] = []
    for lineno, line in enumerate(stream, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _VERTICES_HEADER.match(s)
            if m:
                declared = max(declared, int(m.group(1)))
            continue
        tokens = s.split()
        if len(tokens) != 2:
            raise GraphFormatError(lineno, line, f"expected 2 fields, got {len(tokens)}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(lineno, line, "non-integer vertex id") from None
        if u < 0 or v < 0:
            raise GraphFormatError(lineno, line, "negative vertex id")
        pairs.append((u, v))
    n = declared
    if pairs:
        n = max(n, max(max(p) for p in pairs) + 1)
    return Graph.from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def write_edge_list(g: Graph, stream: TextIO, comments: Iterable[str] = ()) -> None:
    stream.write(f"# vertices {g.vertex_count}\n")
    for c in comments:
        stream.write(f"# {c}\n")
    for u, v in g.edges().tolist():
        stream.write(f"{u} {v}\n")


def load_communities(stream: TextIO | Iterable[str]) -> np.ndarray:
    """Parse a ``vertex community`` file into a label vector indexed by vertex id."""
    assign: dict[int, int] = {}
    for lineno, line in enumerate(stream, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tokens = s.split()
        if len(tokens) != 2:
            raise GraphFormatError(lineno, line, f"expected 2 fields, got {len(tokens)}")
        try:
            v, c = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(lineno, line, "non-integer field") from None
        assign[v] = c
    if not assign:
        return np.zeros(0, dtype=np.int64)
    n = max(assign) + 1
    if len(assign) != n or min(assign) < 0:
        raise ValueError("community file does not cover vertices 0..N-1 exactly once")
    labels = np.empty(n, dtype=np.int64)
    for v, c in assign.items():
        labels[v] = c
    return labels


def write_communities(labels, stream: TextIO) -> None:
    for v, c in enumerate(np.asarray(labels).tolist()):
        stream.write(f"{v} {c}\n")


def connected_components(g: Graph) -> ComponentLabeling:
    """Component ids are assigned in order of each component's smallest vertex id."""
    n = g.vertex_count
    if n == 0:
        return ComponentLabeling(np.zeros(0, dtype=np.int64), 0, np.zeros(0, dtype=np.int64))
    adj = csr_matrix((np.ones(len(g.indices), dtype=np.int8), g.indices, g.indptr), shape=(n, n))
    count, raw = _cc(adj, directed=False)
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(count, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(count)
    labels = rank[raw]
    labels.flags.writeable = False
    return ComponentLabeling(labels, int(count), np.bincount(labels, minlength=count))


def induced_subgraph(g: Graph, vertices) -> tuple[Graph, dict[int, int]]:
    """Subgraph on ``vertices``, re-indexed densely in ascending old-id order."""
    keep = np.unique(np.fromiter(vertices, dtype=np.int64) if not isinstance(vertices, np.ndarray)
                     else vertices.astype(np.int64))
    n = g.vertex_count
    if keep.size and (keep[0] < 0 or keep[-1] >= n):
        raise IndexError("vertex id out of range")
    new_id = np.full(n, -1, dtype=np.int64)
    new_id[keep] = np.arange(len(keep))
    e = g.edges()
    if len(e):
        a, b = new_id[e[:, 0]], new_id[e[:, 1]]
        mask = (a >= 0) & (b >= 0)
        sub = np.column_stack([a[mask], b[mask]])
    else:
        sub = e
    mapping = dict(zip(keep.tolist(), range(len(keep))))
    return Graph.from_edges(len(keep), sub), mapping
