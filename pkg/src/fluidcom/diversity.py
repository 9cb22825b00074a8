"""Which of two planted truths does an algorithm recover, and how alike are two algorithms at it.

Each run is scored with theta in {-1, 0, +1}; repeated runs give a categorical
series, and two series are compared with a chi-square homogeneity test whose
p-value serves as a qualitative similarity.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fluidc import run_fluidc_disconnected
from .graph import Graph
from .lpa import run_lpa
from .metrics import Partition, nmi_geometric

THETA_VALUES = (1, 0, -1)
_EPS = 1e-15
_MAX_ITER = 10_000

Runner = Callable[[Graph, np.random.Generator], Partition]


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    if x <= 0.0:
        return 0.0
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x).

    Uses the series of P for ``x < a + 1`` and a modified Lentz continued
    fraction otherwise.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - gammainc_lower(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_sf(statistic: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    return gammainc_upper(df / 2.0, statistic / 2.0)


@dataclass
class ThetaSeries:
    counts: dict[int, int] = field(default_factory=lambda: {t: 0 for t in THETA_VALUES})

    @property
    def runs(self) -> int:
        return sum(self.counts.values())

    def add(self, value: int) -> None:
        self.counts[value] += 1

    def vector(self) -> list[int]:
        return [self.counts.get(t, 0) for t in THETA_VALUES]

    @classmethod
    def from_counts(cls, plus: int = 0, zero: int = 0, minus: int = 0) -> "ThetaSeries":
        return cls({1: plus, 0: zero, -1: minus})


@dataclass(frozen=True)
class SimilarityMatrix:
    algorithms: list[str]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.algorithms.index(a) for a in pair)
        return float(self.values[i, j])

    def to_csv(self, stream) -> None:
        stream.write(",".join(self.algorithms) + "\n")
        for row in self.values:
            stream.write(",".join(f"{v:.9g}" for v in row) + "\n")


def theta(nmi_t1: float, nmi_t2: float, alpha: float) -> int:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if nmi_t1 - nmi_t2 > alpha:
        return 1
    if nmi_t2 - nmi_t1 > alpha:
        return -1
    return 0


def theta_series(runner: Runner, graph: Graph, t1: Partition, t2: Partition, runs: int,
                 alpha: float, rng: np.random.Generator) -> ThetaSeries:
    """Score ``runs`` executions of ``runner``, each with its own derived generator."""
    if runs <= 0:
        raise ValueError("runs must be positive")
    if len(t1) != graph.vertex_count or len(t2) != graph.vertex_count:
        raise ValueError("ground truths must cover the graph")
    base = int(rng.integers(2**63))
    series = ThetaSeries()
    for i in range(runs):
        p = runner(graph, np.random.default_rng([base, i]))
        series.add(theta(nmi_geometric(p, t1), nmi_geometric(p, t2), alpha))
    return series


def chi_square_statistic(a: ThetaSeries, b: ThetaSeries) -> tuple[float, int]:
    """Pearson statistic of the 2 x 3 table and its degrees of freedom.

    Categories empty in both series are dropped.
    """
    if a.runs <= 0 or b.runs <= 0:
        raise ValueError("both series need at least one run")
    obs = np.array([a.vector(), b.vector()], dtype=np.float64)
    obs = obs[:, obs.sum(axis=0) > 0]
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / obs.sum()
    stat = float(np.sum((obs - expected) ** 2 / expected))
    return stat, obs.shape[1] - 1


def chi_square_homogeneity(a: ThetaSeries, b: ThetaSeries) -> float:
    """Probability that both series share one categorical distribution."""
    stat, df = chi_square_statistic(a, b)
    if df == 0:
        return 1.0
    return min(max(chi2_sf(stat, df), 0.0), 1.0)


def fluidc_runner(k: int = 4, max_supersteps: int = 100) -> Runner:
    def run(g: Graph, rng: np.random.Generator) -> Partition:
        return run_fluidc_disconnected(g, k, rng, max_supersteps).partition
    return run


def lpa_runner(max_supersteps: int = 100) -> Runner:
    def run(g: Graph, rng: np.random.Generator) -> Partition:
        return run_lpa(g, rng, max_supersteps).partition
    return run


def runner_for(name: str, k: int = 4) -> Runner:
    """Map ``fluidc``/``lpa`` (with any ``#suffix`` tag) to a runner."""
    algo = name.split("#", 1)[0].strip().lower()
    if algo == "fluidc":
        return fluidc_runner(k)
    if algo == "lpa":
        return lpa_runner()
    raise ValueError(f"unknown algorithm {name!r}")


def similarity_matrix(algorithms: Sequence[tuple[str, Runner]],
                      graphs: Sequence[tuple[Graph, Partition, Partition]],
                      runs: int, alpha: float, rng: np.random.Generator) -> SimilarityMatrix:
    """Mean over graphs of the pairwise chi-square p-values between theta series.

    Each algorithm draws from a seed stream keyed by its name, so the same
    name listed twice produces identical series while ``fluidc`` and
    ``fluidc#2`` are independent.
    """
    if len(algorithms) < 2:
        raise ValueError("need at least two algorithms")
    if not graphs:
        raise ValueError("need at least one graph")
    names = [name for name, _ in algorithms]
    seed = int(rng.integers(2**63))
    total = np.zeros((len(names), len(names)))
    for gi, (g, t1, t2) in enumerate(graphs):
        series = []
        for name, runner in algorithms:
            rng = np.random.default_rng([seed, gi, zlib.crc32(name.encode())])
            series.append(theta_series(runner, g, t1, t2, runs, alpha, rng))
        for i in range(len(names)):
            total[i, i] += 1.0
            for j in range(i + 1, len(names)):
                p = chi_square_homogeneity(series[i], series[j])
                total[i, j] += p
                total[j, i] += p
    return SimilarityMatrix(names, total / len(graphs))
