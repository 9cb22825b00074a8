"""Fluid Communities: density-weighted asynchronous propagation of k fluids.

Each community ``c`` carries density ``1 / |c|``. A vertex adopts the
community with the largest summed density over its ego network (itself plus
its neighbors), keeping its current community whenever that one is among
the maxima. Densities follow sizes immediately after every single update.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import Graph, connected_components, induced_subgraph
from .metrics import Partition, modularity

UNASSIGNED = -1
TIE_RTOL = 1e-12
DEFAULT_MAX_SUPERSTEPS = 100


class ParameterError(ValueError):
    pass


@njit(cache=True)
def _update(v, u, indptr, indices, community_of, sizes, counts, touched, cand):
    """Apply the update rule to ``v``; ``u`` in [0, 1) picks among tied candidates.

    ``counts`` must be all-zero on entry and is left all-zero on exit.
    Returns 1 if v's community changed, else 0.
    """
    cur = community_of[v]
    ntouch = 0
    if cur >= 0:
        counts[cur] = 1
        touched[0] = cur
        ntouch = 1
    for j in range(indptr[v], indptr[v + 1]):
        c = community_of[indices[j]]
        if c >= 0:
            if counts[c] == 0:
                touched[ntouch] = c
                ntouch += 1
            counts[c] += 1
    if ntouch == 0:
        return 0
    best = 0.0
    for i in range(ntouch):
        c = touched[i]
        s = counts[c] / sizes[c]
        if s > best:
            best = s
    threshold = best * (1.0 - 1e-12)
    ncand = 0
    keep = False
    for i in range(ntouch):
        c = touched[i]
        if counts[c] / sizes[c] >= threshold:
            cand[ncand] = c
            ncand += 1
            if c == cur:
                keep = True
        counts[c] = 0
    if keep:
        return 0
    pick = int(u * ncand)
    if pick >= ncand:
        pick = ncand - 1
    new = cand[pick]
    if cur >= 0:
        sizes[cur] -= 1
    sizes[new] += 1
    community_of[v] = new
    return 1


@njit(cache=True)
def _superstep(order, uniforms, indptr, indices, community_of, sizes, counts, touched, cand):
    changed = 0
    for i in range(order.shape[0]):
        changed += _update(order[i], uniforms[i], indptr, indices, community_of, sizes,
                           counts, touched, cand)
    return changed


@dataclass
class FluidState:
    """Mutable per-run state. Densities are derived from sizes on every read."""

    community_of: np.ndarray
    community_size: np.ndarray
    k: int

    def __post_init__(self):
        deg_cap = int(self.community_of.shape[0]) + 1
        self._counts = np.zeros(self.k, dtype=np.int64)
        self._touched = np.empty(min(self.k, deg_cap), dtype=np.int64)
        self._cand = np.empty(min(self.k, deg_cap), dtype=np.int64)

    def density(self, c: int) -> float:
        size = int(self.community_size[c])
        if size == 0:
            raise ValueError(f"community {c} has no vertices")
        return 1.0 / size

    @property
    def assigned_count(self) -> int:
        return int(np.count_nonzero(self.community_of >= 0))

    @property
    def fully_assigned(self) -> bool:
        return bool(np.all(self.community_of >= 0))

    def check(self) -> None:
        """Raise AssertionError if sizes disagree with assignments or a community is empty."""
        assigned = self.community_of[self.community_of >= 0]
        recount = np.bincount(assigned, minlength=self.k)
        assert np.array_equal(recount, self.community_size), "sizes out of sync"
        assert np.all(self.community_size >= 1), "a community was eliminated"

    def to_partition(self) -> Partition:
        if not self.fully_assigned:
            raise ValueError("some vertices are unassigned")
        return Partition(self.community_of.copy())


@dataclass(frozen=True)
class FluidResult:
    partition: Partition
    supersteps: int
    converged: bool
    elapsed: float = 0.0  # seconds spent in the superstep loop

    @property
    def time_per_superstep(self) -> float:
        return self.elapsed / self.supersteps if self.supersteps else 0.0


def init_communities(g: Graph, k: int, rng: np.random.Generator) -> FluidState:
    n = g.vertex_count
    if k <= 0 or k > n:
        raise ParameterError(f"k must satisfy 0 < k <= |V| = {n}, got {k}")
    community_of = np.full(n, UNASSIGNED, dtype=np.int64)
    seeds = rng.choice(n, size=k, replace=False)
    community_of[seeds] = np.arange(k)
    return FluidState(community_of, np.ones(k, dtype=np.int64), k)


def update_vertex(state: FluidState, g: Graph, v: int, rng: np.random.Generator) -> bool:
    return bool(_update(v, rng.random(), g.indptr, g.indices, state.community_of,
                        state.community_size, state._counts, state._touched, state._cand))


def superstep(state: FluidState, g: Graph, rng: np.random.Generator) -> int:
    """Update every vertex once in a fresh random order; return the change count."""
    n = g.vertex_count
    order = rng.permutation(n)
    uniforms = rng.random(n)
    return int(_superstep(order, uniforms, g.indptr, g.indices, state.community_of,
                          state.community_size, state._counts, state._touched, state._cand))


def _run_connected(g: Graph, k: int, rng: np.random.Generator, max_supersteps: int) -> FluidResult:
    state = init_communities(g, k, rng)
    steps = 0
    converged = False
    t0 = time.perf_counter()
    # the cap only applies once every vertex holds a fluid, which takes at most diameter steps
    while steps < max_supersteps or not state.fully_assigned:
        changed = superstep(state, g, rng)
        steps += 1
        if state.fully_assigned:
            if changed == 0:
                converged = True
                break
        elif changed == 0:
            raise RuntimeError("fluids stopped spreading; is the graph connected?")
    elapsed = time.perf_counter() - t0
    return FluidResult(state.to_partition(), steps, converged, elapsed)


def run_fluidc(g: Graph, k: int, rng: np.random.Generator,
               max_supersteps: int = DEFAULT_MAX_SUPERSTEPS) -> FluidResult:
    """Run FluidC on a connected graph until a superstep changes nothing."""
    if max_supersteps <= 0:
        raise ParameterError("max_supersteps must be positive")
    if k <= 0 or k > g.vertex_count:
        raise ParameterError(f"k must satisfy 0 < k <= |V| = {g.vertex_count}, got {k}")
    if connected_components(g).component_count != 1:
        raise ParameterError("run_fluidc needs a connected graph; use run_fluidc_disconnected")
    return _run_connected(g, k, rng, max_supersteps)


def allocate_k(component_sizes, k: int) -> list[int]:
    """Split ``k`` across components by largest remainder, at least 1 and at most size each."""
    sizes = [int(s) for s in component_sizes]
    total = sum(sizes)
    if k < len(sizes):
        raise ParameterError(f"k={k} is smaller than the component count {len(sizes)}")
    if k > total:
        raise ParameterError(f"k={k} exceeds the vertex count {total}")
    alloc = [min(s, max(1, k * s // total)) for s in sizes]
    # fractional part of the quota k*s/total, scaled by total to stay exact
    rem = [(k * s) % total for s in sizes]
    diff = k - sum(alloc)
    order = sorted(range(len(sizes)), key=lambda i: (-rem[i], i))
    while diff > 0:
        for i in order:
            if diff and alloc[i] < sizes[i]:
                alloc[i] += 1
                diff -= 1
    while diff < 0:
        for i in reversed(order):
            if diff and alloc[i] > 1:
                alloc[i] -= 1
                diff += 1
    return alloc


def run_fluidc_disconnected(g: Graph, k: int, rng: np.random.Generator,
                            max_supersteps: int = DEFAULT_MAX_SUPERSTEPS,
                            components=None) -> FluidResult:
    """Run FluidC independently on every connected component and append the results."""
    if max_supersteps <= 0:
        raise ParameterError("max_supersteps must be positive")
    comps = components if components is not None else connected_components(g)
    if comps.component_count == 1:
        if k <= 0 or k > g.vertex_count:
            raise ParameterError(f"k must satisfy 0 < k <= |V| = {g.vertex_count}, got {k}")
        return _run_connected(g, k, rng, max_supersteps)
    alloc = allocate_k(comps.component_sizes, k)
    labels = np.empty(g.vertex_count, dtype=np.int64)
    offset = 0
    steps = 0
    converged = True
    elapsed = 0.0
    order = np.argsort(comps.component_of, kind="stable")
    members = np.split(order, np.cumsum(comps.component_sizes)[:-1])
    for verts, kc in zip(members, alloc):
        if len(verts) == 1:
            labels[verts] = offset
            steps = max(steps, 1)
            offset += 1
            continue
        sub, _ = induced_subgraph(g, verts)
        res = _run_connected(sub, kc, rng, max_supersteps)
        labels[verts] = res.partition.labels + offset
        offset += kc
        steps = max(steps, res.supersteps)
        converged &= res.converged
        elapsed += res.elapsed
    return FluidResult(Partition(labels), steps, converged, elapsed)


def _trial_rng(base: int, k: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base, k, trial]))


def best_k_by_modularity(g: Graph, k_min: int | None = None, k_max: int | None = None,
                         trials_per_k: int = 5, rng: np.random.Generator | None = None,
                         max_supersteps: int = DEFAULT_MAX_SUPERSTEPS) -> tuple[FluidResult, int]:
    """Return the highest-modularity run over ``k`` in ``[k_min, k_max]``.

    Ties go to the smaller k, then to the earlier trial. Values of k below
    the component count are skipped since they cannot be allocated.
    """
    n = g.vertex_count
    if k_min is None:
        k_min = 2
    if k_max is None:
        k_max = max(k_min, math.ceil(math.sqrt(n)))
    if not 0 < k_min <= k_max <= n:
        raise ParameterError(f"need 0 < k_min <= k_max <= |V|, got [{k_min}, {k_max}] with |V|={n}")
    if trials_per_k <= 0:
        raise ParameterError("trials_per_k must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    base = int(rng.integers(2**63))
    comps = connected_components(g)
    lo = max(k_min, comps.component_count)
    if lo > k_max:
        raise ParameterError(f"k_max={k_max} is smaller than the component count {comps.component_count}")
    best: tuple[float, FluidResult, int] | None = None
    for k in range(lo, k_max + 1):
        for t in range(trials_per_k):
            res = run_fluidc_disconnected(g, k, _trial_rng(base, k, t), max_supersteps, comps)
            q = modularity(g, res.partition)
            if best is None or q > best[0]:
                best = (q, res, k)
    return best[1], best[2]
