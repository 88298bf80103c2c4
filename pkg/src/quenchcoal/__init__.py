"""Quenched coalescent simulation for partially selfing diploid populations."""
from .partitions import MarkedPartition, MergeSpec, Partition
from .population import ModelParams, Pedigree, build_pedigree, moran, wright_fisher
from .genealogy import GenealogyPath, SampleConfig, quenched_replicates, trace_lineages
from .limit import XiMeasure, preset, simulate_graph, walk_graph

__version__ = "0.1.0"

__all__ = [
    "MarkedPartition", "MergeSpec", "Partition",
    "ModelParams", "Pedigree", "build_pedigree", "moran", "wright_fisher",
    "GenealogyPath", "SampleConfig", "quenched_replicates", "trace_lineages",
    "XiMeasure", "preset", "simulate_graph", "walk_graph",
]
