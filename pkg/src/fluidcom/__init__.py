"""Fluid Communities detection, label propagation baseline, LFR-style benchmarks and metrics."""

from .fluidc import (FluidResult, FluidState, ParameterError, best_k_by_modularity,
                     init_communities, run_fluidc, run_fluidc_disconnected, superstep, update_vertex)
from .graph import Graph, connected_components, induced_subgraph, load_edge_list
from .lfr import LfrParams, lfr_generate, multi_ground_truth, realized_mixing
from .lpa import run_lpa
from .metrics import Partition, entropy, modularity, nmi_geometric

__all__ = [
    "FluidResult", "FluidState", "Graph", "LfrParams", "ParameterError", "Partition",
    "best_k_by_modularity", "connected_components", "entropy", "induced_subgraph",
    "init_communities", "lfr_generate", "load_edge_list", "modularity", "multi_ground_truth",
    "nmi_geometric", "realized_mixing", "run_fluidc", "run_fluidc_disconnected", "run_lpa",
    "superstep", "update_vertex",
]
