"""Partition type plus geometric NMI and Newman modularity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class Partition:
    """Total vertex -> community assignment with dense 0-based labels.

    Labels are compacted in order of first appearance, so two partitions
    describing the same blocks compare equal.
    """

    labels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.labels, dtype=np.int64)
        if raw.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if raw.size and raw.min() < 0:
            raise ValueError("partition is not total: negative label present")
        _, first, inv = np.unique(raw, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        dense = rank[inv.reshape(-1)]
        dense.flags.writeable = False
        object.__setattr__(self, "labels", dense)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def block_count(self) -> int:
        return int(self.labels.max()) + 1 if self.n else 0

    @property
    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.block_count)

    def blocks(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        return np.split(order, np.cumsum(self.block_sizes)[:-1])

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ContingencyTable:
    """Sparse co-occurrence counts between two partitions."""

    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int = field(default=0)

    def dense(self) -> np.ndarray:
        out = np.zeros((len(self.row_sums), len(self.col_sums)), dtype=np.int64)
        out[self.rows, self.cols] = self.counts
        return out


def _as_partition(p) -> Partition:
    return p if isinstance(p, Partition) else Partition(p)


def contingency(x, y) -> ContingencyTable:
    x, y = _as_partition(x), _as_partition(y)
    if x.n != y.n:
        raise ValueError(f"partition sizes differ: {x.n} != {y.n}")
    ny = max(y.block_count, 1)
    keys, counts = np.unique(x.labels * ny + y.labels, return_counts=True)
    return ContingencyTable(keys // ny, keys % ny, counts, x.block_sizes, y.block_sizes, x.n)


def entropy(p) -> float:
    """Shannon entropy of the block-size distribution, in nats."""
    p = _as_partition(p)
    if p.n == 0:
        raise ValueError("entropy of an empty partition is undefined")
    q = p.block_sizes / p.n
    return float(-np.sum(q * np.log(q)))


def _mutual_information(t: ContingencyTable) -> float:
    n = t.n
    nij = t.counts.astype(np.float64)
    ai = t.row_sums[t.rows].astype(np.float64)
    bj = t.col_sums[t.cols].astype(np.float64)
    mi = float(np.sum(nij / n * (np.log(nij * n) - np.log(ai * bj))))
    return max(mi, 0.0)


def mutual_information(x, y) -> float:
    return _mutual_information(contingency(x, y))


def nmi_geometric(x, y) -> float:
    """Mutual information normalized by the geometric mean of both entropies.

    If both partitions have a single block the result is 1.0; if exactly one
    has zero entropy it is 0.0.
    """
    x, y = _as_partition(x), _as_partition(y)
    if x.n != y.n:
        raise ValueError(f"partition sizes differ: {x.n} != {y.n}")
    hx, hy = entropy(x), entropy(y)
    if hx == 0.0 and hy == 0.0:
        return 1.0
    if hx == 0.0 or hy == 0.0:
        return 0.0
    t = contingency(x, y)
    if len(t.counts) == len(t.row_sums) == len(t.col_sums):
        return 1.0  # identical up to relabeling
    return float(min(max(_mutual_information(t) / np.sqrt(hx * hy), 0.0), 1.0))


def modularity(g: Graph, p) -> float:
    """Newman modularity ``sum_c e_c/m - (d_c/2m)^2``."""
    p = _as_partition(p)
    if p.n != g.vertex_count:
        raise ValueError("partition does not cover the graph's vertices")
    m = g.edge_count
    if m == 0:
        raise ValueError("modularity is undefined on an edgeless graph")
    e = g.edges()
    lab = p.labels
    same = lab[e[:, 0]] == lab[e[:, 1]]
    intra = np.bincount(lab[e[same, 0]], minlength=p.block_count)
    deg = np.bincount(lab, weights=g.degrees, minlength=p.block_count)
    return float(np.sum(intra / m) - np.sum((deg / (2.0 * m)) ** 2))
