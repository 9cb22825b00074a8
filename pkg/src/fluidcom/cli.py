"""Command-line entry point: ``fluidcom <subcommand> ...``."""

from __future__ import annotations

import argparse
import configparser
import contextlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .diversity import runner_for, similarity_matrix
from .fluidc import DEFAULT_MAX_SUPERSTEPS, best_k_by_modularity, run_fluidc_disconnected
from .graph import load_communities, load_edge_list, write_communities, write_edge_list
from .lfr import LfrParams, lfr_generate, multi_ground_truth
from .lpa import run_lpa
from .metrics import Partition, modularity, nmi_geometric

log = logging.getLogger("fluidcom")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_range(text: str) -> list[float]:
    """``0.1,0.2`` or inclusive ``start:stop:step``."""
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(t) for t in text.split(",") if t.strip()]


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as f:
            yield f


def _read_graph(path: str):
    with open(path) as f:
        return load_edge_list(f)


def _read_partition(path: str) -> Partition:
    with open(path) as f:
        return Partition(load_communities(f))


def cmd_gen(args) -> None:
    params = LfrParams.benchmark(args.n, args.mu, seed=args.seed, avg_degree=args.avg_degree)
    overrides = {k: v for k, v in (("max_degree", args.max_degree), ("min_community", args.min_community),
                                   ("max_community", args.max_community)) if v is not None}
    if overrides:
        params = LfrParams(**{**params.__dict__, **overrides})
    inst = lfr_generate(params)
    prefix = args.out or "lfr"
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.edges", "w") as f:
        write_edge_list(inst.graph, f, [f"realized_mu {inst.realized_mu:.6f}",
                                        f"communities {inst.community_count}"])
    with open(f"{prefix}.cmty", "w") as f:
        write_communities(inst.truth.labels, f)
    log.info("wrote %s.{edges,cmty}: %d vertices, %d edges, %d communities, realized mu %.4f",
             prefix, inst.graph.vertex_count, inst.graph.edge_count, inst.community_count, inst.realized_mu)


def cmd_gen_multi(args) -> None:
    g, t1, t2 = multi_ground_truth(LfrParams.multi_truth(args.n, seed=args.seed), args.communities)
    prefix = args.out or "multi"
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.edges", "w") as f:
        write_edge_list(g, f, [f"nmi_t1_t2 {nmi_geometric(t1, t2):.6f}"])
    for tag, t in (("t1", t1), ("t2", t2)):
        with open(f"{prefix}.{tag}.cmty", "w") as f:
            write_communities(t.labels, f)


def cmd_detect(args) -> None:
    g = _read_graph(args.graph)
    rng = np.random.default_rng(args.seed)
    if args.algo == "lpa":
        res = run_lpa(g, rng, args.max_supersteps)
    else:
        if args.k is None:
            raise SystemExit("detect --algo fluidc requires --k")
        res = run_fluidc_disconnected(g, args.k, rng, args.max_supersteps)
    with _output(args.out) as f:
        write_communities(res.partition.labels, f)
    log.info("%s: %d communities, %d supersteps, converged=%s",
             args.algo, res.partition.block_count, res.supersteps, res.converged)


def cmd_best_k(args) -> None:
    g = _read_graph(args.graph)
    res, k = best_k_by_modularity(g, args.k_min, args.k_max, args.trials,
                                  np.random.default_rng(args.seed), args.max_supersteps)
    with _output(args.out) as f:
        write_communities(res.partition.labels, f)
    print(f"k {k} modularity {modularity(g, res.partition):.6f}", file=sys.stderr)


def cmd_eval(args) -> None:
    pred = _read_partition(args.pred)
    if args.metric == "nmi":
        if args.truth is None:
            raise SystemExit("eval --metric nmi requires --truth")
        value = nmi_geometric(pred, _read_partition(args.truth))
    else:
        if args.graph is None:
            raise SystemExit("eval --metric modularity requires --graph")
        value = modularity(_read_graph(args.graph), pred)
    print(f"{value:.6f}")


def _bench_config(args) -> bench.SweepConfig:
    values: dict[str, str] = {}
    if args.config:
        parser = configparser.ConfigParser()
        parser.read_string("[bench]\n" + Path(args.config).read_text())
        values.update(parser["bench"])
    for key in ("sizes", "mus", "reps", "algos", "k_policy", "k_range", "trials", "cache_dir"):
        v = getattr(args, key)
        if v is not None:
            values[key] = str(v)
    if "sizes" not in values or "mus" not in values:
        raise SystemExit("bench needs --sizes and --mus (or a config file providing them)")
    k_range = None
    if values.get("k_range"):
        lo, hi = _int_list(values["k_range"])
        k_range = (lo, hi)
    return bench.SweepConfig(
        sizes=_int_list(values["sizes"]), mus=_float_range(values["mus"]),
        reps=int(values.get("reps", 20)),
        algorithms=[a.strip() for a in values.get("algos", "fluidc,lpa").split(",")],
        k_policy=values.get("k_policy", "truth"), k_range=k_range,
        trials_per_k=int(values.get("trials", 5)), master_seed=args.seed,
        workers=args.workers, cache_dir=values.get("cache_dir"))


def cmd_bench(args) -> None:
    config = _bench_config(args)
    records = list(bench.bench_sweep(config))
    with _output(args.out) as f:
        bench.write_records(records, f)
    if args.summary:
        with open(args.summary, "w") as f:
            bench.write_summary(bench.summarize(records), f)
    failed = sum(r.failed for r in records)
    log.info("bench: %d records, %d failed", len(records), failed)


def cmd_diversity(args) -> None:
    root = Path(args.graphs)
    stems = sorted(p.name[: -len(".t1.cmty")] for p in root.glob("*.t1.cmty"))
    if not stems:
        raise SystemExit(f"no *.t1.cmty files in {root}")
    graphs = []
    for stem in stems:
        graphs.append((_read_graph(str(root / f"{stem}.edges")),
                       _read_partition(str(root / f"{stem}.t1.cmty")),
                       _read_partition(str(root / f"{stem}.t2.cmty"))))
    names = [a.strip() for a in args.algos.split(",") if a.strip()]
    algos = [(name, runner_for(name, args.k)) for name in names]
    matrix = similarity_matrix(algos, graphs, args.runs, args.alpha, np.random.default_rng(args.seed))
    with _output(args.out) as f:
        matrix.to_csv(f)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="output path or prefix")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fluidcom", description="Fluid Communities toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", parents=[common], help="generate an LFR-style graph")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--avg-degree", type=float, default=20.0)
    s.add_argument("--max-degree", type=int)
    s.add_argument("--min-community", type=int)
    s.add_argument("--max-community", type=int)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("gen-multi", parents=[common], help="generate a two-truth overlay graph")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--communities", type=int, default=4)
    s.set_defaults(func=cmd_gen_multi)

    s = sub.add_parser("detect", parents=[common], help="run one community detection")
    s.add_argument("--graph", required=True)
    s.add_argument("--algo", choices=("fluidc", "lpa"), default="fluidc")
    s.add_argument("--k", type=int)
    s.add_argument("--max-supersteps", type=int, default=DEFAULT_MAX_SUPERSTEPS)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("best-k", parents=[common], help="FluidC with k chosen by modularity")
    s.add_argument("--graph", required=True)
    s.add_argument("--k-min", type=int)
    s.add_argument("--k-max", type=int)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--max-supersteps", type=int, default=DEFAULT_MAX_SUPERSTEPS)
    s.set_defaults(func=cmd_best_k)

    s = sub.add_parser("eval", parents=[common], help="NMI or modularity of a partition")
    s.add_argument("--metric", choices=("nmi", "modularity"), required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--truth")
    s.add_argument("--graph")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", parents=[common], help="size x mu sweep to CSV")
    s.add_argument("--config", help="key = value file with the options below")
    s.add_argument("--sizes")
    s.add_argument("--mus", help="comma list or start:stop:step")
    s.add_argument("--reps", type=int)
    s.add_argument("--algos")
    s.add_argument("--k-policy", dest="k_policy", choices=("truth", "best"))
    s.add_argument("--k-range", dest="k_range", help="lo,hi for --k-policy best")
    s.add_argument("--trials", type=int)
    s.add_argument("--cache-dir", dest="cache_dir")
    s.add_argument("--summary", help="also write per-group mean/std CSV here")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("diversity", parents=[common], help="similarity matrix over two-truth graphs")
    s.add_argument("--graphs", required=True, help="directory of gen-multi outputs")
    s.add_argument("--algos", default="fluidc,lpa")
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--k", type=int, default=4, help="FluidC k")
    s.set_defaults(func=cmd_diversity)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"fluidcom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
