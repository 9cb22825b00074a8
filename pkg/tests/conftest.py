import itertools
import math
from collections import Counter, deque

import numpy as np
import pytest

from fluidcom.graph import Graph


def make_graph(n, edges):
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


def triangle():
    return make_graph(3, [(0, 1), (1, 2), (2, 0)])


def two_triangles(bridge=False):
    edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]
    if bridge:
        edges.append((2, 3))
    return make_graph(6, edges)


def clique(n):
    return make_graph(n, list(itertools.combinations(range(n), 2)))


def random_graph(rng, n, p):
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]
    return make_graph(n, edges)


def random_connected_graph(rng, n, extra_p=0.1):
    """Random spanning tree plus Erdos-Renyi extras."""
    edges = [(int(rng.integers(v)), v) for v in range(1, n)]
    edges += [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < extra_p]
    return make_graph(n, edges)


# --- independent oracles -------------------------------------------------

def bfs_components(g):
    """Component ids by BFS from vertices in ascending order."""
    comp = [-1] * g.vertex_count
    adj = g.adjacency()
    c = 0
    for s in range(g.vertex_count):
        if comp[s] >= 0:
            continue
        comp[s] = c
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if comp[w] < 0:
                    comp[w] = c
                    q.append(w)
        c += 1
    return comp, c


def pairwise_modularity(g, labels):
    """Q = (1/2m) sum_{u,v} [A_uv - k_u k_v / 2m] delta(c_u, c_v), over all ordered pairs."""
    n = g.vertex_count
    m = g.edge_count
    a = np.zeros((n, n))
    for u, v in g.edges().tolist():
        a[u, v] = a[v, u] = 1
    k = a.sum(axis=1)
    total = 0.0
    for u in range(n):
        for v in range(n):
            if labels[u] == labels[v]:
                total += a[u, v] - k[u] * k[v] / (2 * m)
    return total / (2 * m)


def direct_entropy(labels):
    n = len(labels)
    return -sum(c / n * math.log(c / n) for c in Counter(labels).values())


def direct_nmi(x, y):
    """Geometric NMI straight from the label vectors."""
    n = len(x)
    hx, hy = direct_entropy(x), direct_entropy(y)
    if hx == 0 and hy == 0:
        return 1.0
    if hx == 0 or hy == 0:
        return 0.0
    px, py, pxy = Counter(x), Counter(y), Counter(zip(x, y))
    mi = sum(c / n * math.log(c * n / (px[a] * py[b])) for (a, b), c in pxy.items())
    return mi / math.sqrt(hx * hy)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns ``ok`` so the caller can assert on it."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number, title, ok, detail):
        store[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
