"""Size x mu x replicate sweeps, summaries and the per-superstep linearity fit."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .fluidc import best_k_by_modularity, run_fluidc_disconnected
from .graph import connected_components, load_communities, load_edge_list, write_communities, write_edge_list
from .lfr import GroundTruthGraph, LfrParams, lfr_generate, realized_mixing
from .lpa import run_lpa
from .metrics import Partition, modularity, nmi_geometric

log = logging.getLogger(__name__)

ALGORITHMS = ("fluidc", "lpa")


@dataclass
class BenchRecord:
    algorithm: str
    n: int
    m: int
    mu_requested: float
    mu_realized: float
    replicate: int
    seed: int
    k_used: int
    nmi: float
    modularity: float
    supersteps: int
    converged: bool
    wall_time_total: float
    wall_time_per_superstep: float
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


FIELDS = [f.name for f in dataclasses.fields(BenchRecord)]
TIMING_FIELDS = ("wall_time_total", "wall_time_per_superstep")


@dataclass
class SweepConfig:
    sizes: Sequence[int]
    mus: Sequence[float]
    reps: int = 20
    algorithms: Sequence[str] = ALGORITHMS
    k_policy: str = "truth"
    k_range: tuple[int, int] | None = None
    trials_per_k: int = 5
    max_supersteps: int = 100
    master_seed: int = 0
    workers: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        if self.k_policy not in ("truth", "best"):
            raise ValueError(f"k_policy must be 'truth' or 'best', got {self.k_policy!r}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms: {bad}")
        if self.reps <= 0:
            raise ValueError("reps must be positive")


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def instance_seed(master: int, n: int, mu: float, replicate: int) -> int:
    return derive_seed(master, n, round(mu, 12), replicate)


def load_or_generate(params: LfrParams, cache_dir: str | None) -> GroundTruthGraph:
    if cache_dir is None:
        return lfr_generate(params)
    stem = Path(cache_dir) / f"lfr_n{params.n}_mu{params.mu:.4f}_s{params.seed}"
    edges, cmty = stem.with_suffix(".edges"), stem.with_suffix(".cmty")
    if edges.exists() and cmty.exists():
        with open(edges) as fe, open(cmty) as fc:
            g = load_edge_list(fe)
            truth = Partition(load_communities(fc))
        return GroundTruthGraph(g, truth, realized_mixing(g, truth), g.degrees)
    inst = lfr_generate(params)
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(edges, "w") as fe, open(cmty, "w") as fc:
        write_edge_list(inst.graph, fe, [f"realized_mu {inst.realized_mu:.9g}",
                                         f"communities {inst.community_count}"])
        write_communities(inst.truth.labels, fc)
    return inst


def warmup() -> None:
    """Load the compiled kernels so the first timed superstep does not pay for it."""
    from .graph import Graph
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    rng = np.random.default_rng(0)
    run_fluidc_disconnected(g, 2, rng)
    run_lpa(g, rng)


def _run_instance(config: SweepConfig, n: int, mu: float, rep: int) -> list[BenchRecord]:
    seed = instance_seed(config.master_seed, n, mu, rep)
    base = dict(n=n, mu_requested=mu, replicate=rep, seed=seed)
    try:
        inst = load_or_generate(LfrParams.benchmark(n, mu, seed=seed), config.cache_dir)
    except Exception as exc:  # recorded as failed rows; the sweep goes on
        log.warning("generation failed for n=%d mu=%g rep=%d: %s", n, mu, rep, exc)
        return [BenchRecord(algorithm=a, m=0, mu_realized=math.nan, k_used=0, nmi=math.nan,
                            modularity=math.nan, supersteps=0, converged=False,
                            wall_time_total=math.nan, wall_time_per_superstep=math.nan,
                            error=f"generation: {exc}", **base)
                for a in config.algorithms]
    g = inst.graph
    out = []
    for algo in config.algorithms:
        rng = np.random.default_rng(derive_seed(seed, algo))
        rec = dict(algorithm=algo, m=g.edge_count, mu_realized=inst.realized_mu, **base)
        try:
            if algo == "lpa":
                res = run_lpa(g, rng, config.max_supersteps)
                k = res.partition.block_count
            elif config.k_policy == "truth":
                k = max(inst.community_count, connected_components(g).component_count)
                res = run_fluidc_disconnected(g, k, rng, config.max_supersteps)
            else:
                lo, hi = config.k_range or (2, max(2, math.ceil(math.sqrt(n))))
                res, k = best_k_by_modularity(g, lo, hi, config.trials_per_k, rng, config.max_supersteps)
            out.append(BenchRecord(
                k_used=k, nmi=nmi_geometric(res.partition, inst.truth),
                modularity=modularity(g, res.partition) if g.edge_count else math.nan,
                supersteps=res.supersteps, converged=res.converged,
                wall_time_total=res.elapsed, wall_time_per_superstep=res.time_per_superstep, **rec))
        except Exception as exc:
            log.warning("%s failed on n=%d mu=%g rep=%d: %s", algo, n, mu, rep, exc)
            out.append(BenchRecord(k_used=0, nmi=math.nan, modularity=math.nan, supersteps=0,
                                   converged=False, wall_time_total=math.nan,
                                   wall_time_per_superstep=math.nan, error=f"{algo}: {exc}", **rec))
    return out


def _worker_init():
    warmup()


def _task(args):
    return _run_instance(*args)


def bench_sweep(config: SweepConfig) -> Iterator[BenchRecord]:
    """Yield one record per (instance, algorithm) in (n, mu, replicate, algorithm) order."""
    tasks = [(config, n, mu, rep) for n in config.sizes for mu in config.mus for rep in range(config.reps)]
    if config.workers <= 1:
        warmup()
        for t in tasks:
            yield from _task(t)
        return
    with ProcessPoolExecutor(max_workers=config.workers, initializer=_worker_init) as pool:
        for recs in pool.map(_task, tasks):
            yield from recs


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def write_records(records: Iterable[BenchRecord], stream: TextIO) -> int:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(FIELDS)
    count = 0
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in FIELDS])
        count += 1
    return count


def read_records(stream: TextIO) -> list[BenchRecord]:
    reader = csv.DictReader(stream)
    if reader.fieldnames != FIELDS:
        raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
    types = {f.name: f.type for f in dataclasses.fields(BenchRecord)}
    out = []
    for row in reader:
        kw = {}
        for name, raw in row.items():
            t = types[name]
            if t == "bool":
                kw[name] = raw == "true"
            elif t == "int":
                kw[name] = int(raw)
            elif t == "float":
                kw[name] = float(raw)
            else:
                kw[name] = raw
        out.append(BenchRecord(**kw))
    return out


@dataclass
class SummaryRow:
    algorithm: str
    n: int
    mu: float
    count: int
    nmi_mean: float
    nmi_std: float
    supersteps_mean: float
    supersteps_std: float
    wall_time_total_mean: float
    wall_time_total_std: float
    wall_time_per_superstep_mean: float
    wall_time_per_superstep_std: float
    degenerate: bool = field(default=False)


def _mean_std(xs: list[float]) -> tuple[float, float]:
    if len(xs) == 1:
        return xs[0], 0.0
    return statistics.fmean(xs), statistics.stdev(xs)


def summarize(records: Iterable[BenchRecord]) -> list[SummaryRow]:
    """Mean and sample standard deviation per (algorithm, n, mu); failed rows are skipped."""
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        if not r.failed:
            groups.setdefault((r.algorithm, r.n, r.mu_requested), []).append(r)
    rows = []
    for (algo, n, mu), rs in sorted(groups.items()):
        cols = {}
        for name in ("nmi", "supersteps", "wall_time_total", "wall_time_per_superstep"):
            cols[name] = _mean_std([float(getattr(r, name)) for r in rs])
        rows.append(SummaryRow(algo, n, mu, len(rs),
                               *cols["nmi"], *cols["supersteps"], *cols["wall_time_total"],
                               *cols["wall_time_per_superstep"], degenerate=len(rs) == 1))
    return rows


def write_summary(rows: Iterable[SummaryRow], stream: TextIO) -> None:
    names = [f.name for f in dataclasses.fields(SummaryRow)]
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(names)
    for r in rows:
        w.writerow([_fmt(getattr(r, f)) for f in names])


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def linearity_check(records: Iterable[BenchRecord]) -> LinearFit:
    """Ordinary least squares of per-superstep time against edge count."""
    pts = [(r.m, r.wall_time_per_superstep) for r in records if not r.failed]
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    if len(np.unique(x)) < 3:
        raise ValueError("linear fit needs at least three distinct edge counts")
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearFit(slope, intercept, r2)
