"""Asynchronous label propagation (Raghavan, Albert and Kumara, 2007)."""

from __future__ import annotations

import time

import numpy as np
from numba import njit

from .fluidc import DEFAULT_MAX_SUPERSTEPS, FluidResult, ParameterError
from .graph import Graph
from .metrics import Partition


@njit(cache=True)
def _superstep(order, uniforms, indptr, indices, label, counts, touched, cand):
    changed = 0
    for i in range(order.shape[0]):
        v = order[i]
        lo, hi = indptr[v], indptr[v + 1]
        if lo == hi:
            continue
        ntouch = 0
        best = 0
        for j in range(lo, hi):
            c = label[indices[j]]
            if counts[c] == 0:
                touched[ntouch] = c
                ntouch += 1
            counts[c] += 1
            if counts[c] > best:
                best = counts[c]
        cur = label[v]
        keep = counts[cur] == best
        ncand = 0
        for t in range(ntouch):
            c = touched[t]
            if counts[c] == best:
                cand[ncand] = c
                ncand += 1
            counts[c] = 0
        if keep:
            continue
        pick = int(uniforms[i] * ncand)
        if pick >= ncand:
            pick = ncand - 1
        label[v] = cand[pick]
        changed += 1
    return changed


@njit(cache=True)
def _is_stable(indptr, indices, label, counts, touched):
    """True if every vertex's label is among the most frequent in its neighborhood."""
    n = indptr.shape[0] - 1
    for v in range(n):
        lo, hi = indptr[v], indptr[v + 1]
        if lo == hi:
            continue
        ntouch = 0
        best = 0
        for j in range(lo, hi):
            c = label[indices[j]]
            if counts[c] == 0:
                touched[ntouch] = c
                ntouch += 1
            counts[c] += 1
            if counts[c] > best:
                best = counts[c]
        ok = counts[label[v]] == best
        for t in range(ntouch):
            counts[touched[t]] = 0
        if not ok:
            return False
    return True


def is_stable(g: Graph, labels) -> bool:
    lab = np.ascontiguousarray(labels, dtype=np.int64)
    size = int(lab.max()) + 1 if lab.size else 1
    return bool(_is_stable(g.indptr, g.indices, lab, np.zeros(size, dtype=np.int64),
                           np.empty(max(size, 1), dtype=np.int64)))


def run_lpa(g: Graph, rng: np.random.Generator,
            max_supersteps: int = DEFAULT_MAX_SUPERSTEPS) -> FluidResult:
    """Start from unique labels; stop once every label is a neighborhood maximum."""
    if max_supersteps <= 0:
        raise ParameterError("max_supersteps must be positive")
    n = g.vertex_count
    label = np.arange(n, dtype=np.int64)
    counts = np.zeros(max(n, 1), dtype=np.int64)
    width = int(g.degrees.max()) if n else 0
    touched = np.empty(max(width, 1), dtype=np.int64)
    cand = np.empty(max(width, 1), dtype=np.int64)
    steps = 0
    converged = False
    t0 = time.perf_counter()
    while steps < max_supersteps:
        order = rng.permutation(n)
        uniforms = rng.random(n)
        _superstep(order, uniforms, g.indptr, g.indices, label, counts, touched, cand)
        steps += 1
        if _is_stable(g.indptr, g.indices, label, counts, touched):
            converged = True
            break
    elapsed = time.perf_counter() - t0
    return FluidResult(Partition(label), steps, converged, elapsed)
