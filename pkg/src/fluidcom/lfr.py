"""LFR-style benchmark graphs with planted communities.

Degrees and community sizes follow truncated discrete power laws. Each
vertex gets ``ceil((1 - mu) * degree)`` internal stubs, wired by stub
matching inside its community, and the rest are matched globally across
communities. Conflicting pairs (self-loops, duplicates, external pairs that
land inside one community) are repaired by random edge swaps and dropped if
still broken after a bounded number of sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .graph import Graph
from .metrics import Partition

SWAP_SWEEPS = 10
SWAP_TRIES = 256
MAX_DEGREE_RETRIES = 20
MAX_SIZE_RETRIES = 50
MAX_ASSIGN_RETRIES = 5
MAX_COUNT_RETRIES = 200


class GenerationError(RuntimeError):
    def __init__(self, stage: str, detail: str):
        super().__init__(f"LFR generation failed at stage '{stage}': {detail}")
        self.stage = stage


@dataclass(frozen=True)
class LfrParams:
    n: int
    mu: float
    avg_degree: float = 20.0
    max_degree: int = 100
    degree_exponent: float = -2.0
    community_exponent: float = -1.0
    min_community: int = 10
    max_community: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"mu must lie in [0, 1), got {self.mu}")
        if not 1 <= self.min_community <= self.max_community <= self.n:
            raise ValueError("need 1 <= min_community <= max_community <= n")
        if not 0 < self.avg_degree < self.max_degree:
            raise ValueError("need 0 < avg_degree < max_degree")
        if self.degree_exponent >= 0 or self.community_exponent >= 0:
            raise ValueError("power-law exponents must be negative")

    @classmethod
    def benchmark(cls, n: int, mu: float, seed: int = 0, avg_degree: float = 20.0) -> "LfrParams":
        """Hyperparameters of the standard sweep: max degree and max community size 0.1 n."""
        cap = max(int(0.1 * n), 2)
        return cls(n=n, mu=mu, avg_degree=avg_degree, max_degree=cap,
                   min_community=min(cap, max(10, math.ceil(avg_degree / 2))),
                   max_community=cap, seed=seed)

    @classmethod
    def multi_truth(cls, n: int, seed: int = 0, avg_degree: float = 20.0) -> "LfrParams":
        """Parameters for one overlay of a two-truth graph: mu = 0, communities of 0.2n to 0.3n."""
        return cls(n=n, mu=0.0, avg_degree=avg_degree, max_degree=max(int(0.1 * n), 2),
                   min_community=math.ceil(0.2 * n), max_community=int(0.3 * n), seed=seed)


@dataclass(frozen=True)
class GroundTruthGraph:
    graph: Graph
    truth: Partition
    realized_mu: float
    target_degrees: np.ndarray

    @property
    def community_count(self) -> int:
        return self.truth.block_count


def _power_law_cdf(exponent: float, x_min: int, x_max: int) -> tuple[np.ndarray, np.ndarray]:
    support = np.arange(x_min, x_max + 1, dtype=np.int64)
    w = support.astype(np.float64) ** exponent
    cdf = np.cumsum(w)
    return support, cdf / cdf[-1]


def sample_power_law(count: int, exponent: float, x_min: int, x_max: int,
                     rng: np.random.Generator) -> np.ndarray:
    """I.i.d. integers with P(x) proportional to x**exponent on [x_min, x_max]."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not 1 <= x_min <= x_max:
        raise ValueError(f"invalid support [{x_min}, {x_max}]")
    support, cdf = _power_law_cdf(exponent, x_min, x_max)
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return support[np.minimum(idx, len(support) - 1)]


def power_law_mean(exponent: float, x_min: int, x_max: int) -> float:
    x = np.arange(x_min, x_max + 1, dtype=np.float64)
    w = x ** exponent
    return float(np.sum(x * w) / np.sum(w))


def solve_min_degree(avg_degree: float, exponent: float, max_degree: int) -> int:
    """Smallest x_min whose truncated power-law mean on [x_min, max_degree] reaches avg_degree."""
    if not avg_degree < max_degree:
        raise ValueError("avg_degree must be below max_degree")
    for x_min in range(1, max_degree + 1):
        if power_law_mean(exponent, x_min, max_degree) >= avg_degree:
            return x_min
    raise ValueError(f"no minimum degree reaches mean {avg_degree} below {max_degree}")


def sample_community_sizes(n: int, exponent: float, min_size: int, max_size: int,
                           rng: np.random.Generator) -> list[int]:
    """Draw sizes until they cover n, clamp the last, then repair a too-small last block."""
    if not 1 <= min_size <= max_size:
        raise ValueError("need 1 <= min_size <= max_size")
    if n < min_size:
        raise ValueError(f"n={n} is smaller than min_size={min_size}")
    max_size = min(max_size, n)
    support, cdf = _power_law_cdf(exponent, min_size, max_size)
    sizes: list[int] = []
    total = 0
    while total < n:
        batch = support[np.minimum(np.searchsorted(cdf, rng.random(64), side="right"),
                                   len(support) - 1)]
        for s in batch.tolist():
            if total >= n:
                break
            sizes.append(s)
            total += s
    sizes[-1] -= total - n
    if sizes[-1] >= min_size or len(sizes) == 1:
        return sizes
    leftover = sizes.pop()
    for i in sorted(range(len(sizes)), key=lambda i: -sizes[i]):
        room = max_size - sizes[i]
        take = min(room, leftover)
        sizes[i] += take
        leftover -= take
        if leftover == 0:
            return sizes
    # no room left: rebuild the last block from the largest ones
    sizes.append(leftover)
    for i in sorted(range(len(sizes) - 1), key=lambda i: -sizes[i]):
        give = min(sizes[i] - min_size, min_size - sizes[-1])
        if give > 0:
            sizes[i] -= give
            sizes[-1] += give
        if sizes[-1] >= min_size:
            break
    return sizes


def _internal_degrees(degrees: np.ndarray, mu: float) -> np.ndarray:
    # guard against (1 - mu) * d landing a hair above an integer
    return np.ceil((1.0 - mu) * degrees - 1e-9).astype(np.int64)


def _hall_feasible(need: np.ndarray, sizes: np.ndarray) -> bool:
    """Every vertex needing a community of size > t can get a slot in one."""
    need_asc = np.sort(need)
    cap_asc = np.sort(sizes)
    slots_desc = np.cumsum(cap_asc[::-1])
    t = np.unique(need_asc)
    demand = len(need_asc) - np.searchsorted(need_asc, t, side="left")
    # communities able to host need t are those with size - 1 >= t
    hosts = len(cap_asc) - np.searchsorted(cap_asc - 1, t, side="left")
    if np.any(hosts == 0):
        return False
    return bool(np.all(slots_desc[hosts - 1] >= demand))


def _graphical(seq: np.ndarray) -> bool:
    """Erdos-Gallai test, after dropping one stub from the top vertex if the sum is odd."""
    d = np.sort(seq)[::-1].copy()
    if len(d) == 0:
        return True
    if d.sum() % 2:
        d[0] -= 1
        d = np.sort(d)[::-1]
    asc = d[::-1]
    prefix_asc = np.concatenate([[0], np.cumsum(asc)])
    lhs = np.cumsum(d)
    k = np.arange(1, len(d) + 1)
    below = np.searchsorted(asc, k, side="left")
    at_least = len(d) - below
    tail = np.where(at_least >= k, k * (at_least - k) + prefix_asc[below], lhs[-1] - lhs)
    return bool(np.all(lhs <= k * (k - 1) + tail))


def _all_graphical(internal: np.ndarray, member: np.ndarray, count: int) -> bool:
    order = np.argsort(member, kind="stable")
    cuts = np.cumsum(np.bincount(member, minlength=count))[:-1]
    return all(_graphical(internal[vs]) for vs in np.split(order, cuts))


@njit(cache=True)
def _place(prefix, picks, free):
    """Pick a community slot for each vertex in turn; a negative first entry flags failure."""
    n = len(prefix)
    slot = np.empty(n, dtype=np.int64)
    for i in range(n):
        p = prefix[i]
        total = 0
        for j in range(p):
            total += free[j]
        if total == 0:
            slot[0] = -1 - i
            return slot
        target = picks[i] * total
        acc = 0
        j = 0
        while j < p - 1:
            acc += free[j]
            if acc > target:
                break
            j += 1
        while free[j] == 0:
            j -= 1
        free[j] -= 1
        slot[i] = j
    return slot


def _assign(internal: np.ndarray, sizes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Place vertices, most demanding first, into a feasible community chosen by free space."""
    n = len(internal)
    comm_order = np.argsort(-sizes, kind="stable")
    sorted_sizes = sizes[comm_order]
    free = sorted_sizes.copy()
    shuffled = rng.permutation(n)
    order = shuffled[np.argsort(-internal[shuffled], kind="stable")]
    member = np.empty(n, dtype=np.int64)
    # number of communities (prefix of comm_order) with size - 1 >= need
    prefix = np.searchsorted(-(sorted_sizes - 1), -internal[order], side="right")
    picks = rng.random(n)
    slot = _place(prefix, picks, free)
    if slot[0] < 0:
        v = order[-1 - slot[0]]
        raise GenerationError("assignment", f"no community can host internal degree {internal[v]}")
    member[order] = comm_order[slot]
    return member


@njit(cache=True)
def _swap_repair(pool, size, broken, n, comm, check_comm, sweeps, tries, seed):
    """Edge-swap repair; ``pool[:size]`` holds valid edges and has room for every broken one."""
    np.random.seed(seed)
    keys = set()
    for i in range(size):
        keys.add(min(pool[i, 0], pool[i, 1]) * n + max(pool[i, 0], pool[i, 1]))
    nb = broken.shape[0]
    alive = np.ones(nb, dtype=np.bool_)
    for _ in range(sweeps):
        remaining = 0
        for b in range(nb):
            if not alive[b]:
                continue
            x, y = broken[b, 0], broken[b, 1]
            fixed = False
            for _t in range(tries):
                j = np.random.randint(size)
                c, d = pool[j, 0], pool[j, 1]
                if np.random.random() < 0.5:
                    c, d = d, c
                if x == c or y == d:
                    continue
                if check_comm and (comm[x] == comm[c] or comm[y] == comm[d]):
                    continue
                k1 = min(x, c) * n + max(x, c)
                k2 = min(y, d) * n + max(y, d)
                if k1 == k2 or k1 in keys or k2 in keys:
                    continue
                keys.discard(min(c, d) * n + max(c, d))
                keys.add(k1)
                keys.add(k2)
                pool[j, 0], pool[j, 1] = x, c
                pool[size, 0], pool[size, 1] = y, d
                size += 1
                fixed = True
                break
            if fixed:
                alive[b] = False
            else:
                remaining += 1
        if remaining == 0:
            break
    return size


def _repair(edges: np.ndarray, n: int, rng: np.random.Generator,
            comm: np.ndarray | None) -> np.ndarray:
    """Keep valid pairs, fix the rest by swaps against valid pairs of the same pool.

    ``comm`` is given for external pools, where both endpoints must lie in
    different communities. Pools never share edges: internal pools live in
    disjoint communities and external edges always cross communities.
    """
    if len(edges) == 0:
        return edges.reshape(0, 2)
    a, b = edges[:, 0], edges[:, 1]
    k = np.minimum(a, b) * n + np.maximum(a, b)
    bad = a == b
    if comm is not None:
        bad |= comm[a] == comm[b]
    _, first = np.unique(np.where(bad, -1 - np.arange(len(k)), k), return_index=True)
    dup = np.ones(len(k), dtype=bool)
    dup[first] = False
    bad |= dup
    good = edges[~bad]
    broken = np.ascontiguousarray(edges[bad])
    if len(broken) == 0 or len(good) == 0:
        return good
    pool = np.empty((len(good) + len(broken), 2), dtype=np.int64)
    pool[:len(good)] = good
    check = comm is not None
    size = _swap_repair(pool, len(good), broken, n,
                        comm if check else np.zeros(1, dtype=np.int64), check,
                        SWAP_SWEEPS, SWAP_TRIES, int(rng.integers(2**32)))
    return pool[:size]


def realized_mixing(g: Graph, truth) -> float:
    """Mean, over vertices with at least one edge, of the fraction of edges leaving the community."""
    lab = truth.labels if isinstance(truth, Partition) else np.asarray(truth)
    if len(lab) != g.vertex_count:
        raise ValueError("truth does not cover the graph")
    deg = g.degrees
    src = np.repeat(np.arange(g.vertex_count), deg)
    cross = np.bincount(src, weights=(lab[src] != lab[g.indices]), minlength=g.vertex_count)
    has = deg > 0
    if not np.any(has):
        return 0.0
    return float(np.mean(cross[has] / deg[has]))


def _wire(degrees, internal, member, n_comm, rng):
    n = len(degrees)
    internal = internal.copy()
    external = degrees - internal
    parts = []
    order = np.argsort(member, kind="stable")
    groups = np.split(order, np.cumsum(np.bincount(member, minlength=n_comm))[:-1])
    for verts in groups:
        stubs = np.repeat(verts, internal[verts])
        if len(stubs) % 2:
            # borrow an external stub if some member has room, else drop one internal stub
            room = verts[(external[verts] > 0) & (internal[verts] < len(verts) - 1)]
            if len(room):
                w = room[rng.integers(len(room))]
                internal[w] += 1
                external[w] -= 1
            else:
                internal[verts[np.argmax(internal[verts])]] -= 1
            stubs = np.repeat(verts, internal[verts])
        stubs = rng.permutation(stubs).reshape(-1, 2)
        parts.append(_repair(stubs, n, rng, None))
    stubs = np.repeat(np.arange(n), external)
    if len(stubs) % 2:
        stubs = np.delete(stubs, rng.integers(len(stubs)))
    stubs = rng.permutation(stubs).reshape(-1, 2)
    parts.append(_repair(stubs, n, rng, member))
    return np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)


def lfr_generate(params: LfrParams) -> GroundTruthGraph:
    p = params
    rng = np.random.default_rng(p.seed)
    x_min = solve_min_degree(p.avg_degree, p.degree_exponent, p.max_degree)
    # largest degree whose internal part still fits inside the biggest community
    d_cap = p.max_degree
    while d_cap > 1 and _internal_degrees(np.array([d_cap]), p.mu)[0] > p.max_community - 1:
        d_cap -= 1
    fallback = None
    found = False
    for _ in range(MAX_DEGREE_RETRIES):
        degrees = np.minimum(sample_power_law(p.n, p.degree_exponent, x_min, p.max_degree, rng), d_cap)
        internal = _internal_degrees(degrees, p.mu)
        min_size = min(max(p.min_community, int(internal.min()) + 1), p.max_community)
        placed = 0
        for _ in range(MAX_SIZE_RETRIES):
            sizes = np.array(sample_community_sizes(p.n, p.community_exponent, min_size,
                                                    p.max_community, rng), dtype=np.int64)
            if not _hall_feasible(internal, sizes):
                continue
            member = _assign(internal, sizes, rng)
            # hubs crowded into one community can make its degree sequence unrealizable
            if _all_graphical(internal, member, len(sizes)):
                found = True
                break
            fallback = fallback or (degrees, internal, sizes, member)
            placed += 1
            if placed == MAX_ASSIGN_RETRIES:
                break
        if found:
            break
    if not found:
        if fallback is None:
            raise GenerationError("community sizes",
                                  f"no size sequence could host the internal degrees after "
                                  f"{MAX_DEGREE_RETRIES * MAX_SIZE_RETRIES} draws")
        degrees, internal, sizes, member = fallback
    edges = _wire(degrees, internal, member, len(sizes), rng)
    g = Graph.from_edges(p.n, edges)
    truth = Partition(member)
    return GroundTruthGraph(g, truth, realized_mixing(g, truth), degrees)


def overlay(a: Graph, b: Graph, permutation=None) -> Graph:
    """Union of two edge sets over the same vertices, b's ids mapped through ``permutation``."""
    if a.vertex_count != b.vertex_count:
        raise ValueError("overlaid graphs must have the same vertex count")
    eb = b.edges()
    if permutation is not None:
        eb = np.asarray(permutation, dtype=np.int64)[eb]
    return Graph.from_edges(a.vertex_count, np.concatenate([a.edges(), eb]))


def _four_block(params: LfrParams, rng: np.random.Generator, communities: int) -> GroundTruthGraph:
    for _ in range(MAX_COUNT_RETRIES):
        inst = lfr_generate(replace(params, seed=int(rng.integers(2**63))))
        if inst.community_count == communities:
            return inst
    raise GenerationError("community count",
                          f"no instance with exactly {communities} communities in {MAX_COUNT_RETRIES} tries")


def multi_ground_truth(params: LfrParams, communities: int = 4) -> tuple[Graph, Partition, Partition]:
    """Overlay two independent mu = 0 graphs; the second is relabeled by a random permutation."""
    if params.mu != 0.0:
        raise ValueError("multi-truth overlays are built from mu = 0 graphs")
    rng = np.random.default_rng(params.seed)
    a = _four_block(params, rng, communities)
    b = _four_block(params, rng, communities)
    perm = rng.permutation(params.n)
    t2 = np.empty(params.n, dtype=np.int64)
    t2[perm] = b.truth.labels
    return overlay(a.graph, b.graph, perm), a.truth, Partition(t2)
