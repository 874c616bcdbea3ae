"""Compact routing tables, labels and distance sketches built from approximate clusters."""

from .clusters import (
    ClusterTree,
    LevelHierarchy,
    PivotTable,
    build_clusters,
    build_large_trees,
    build_middle_tree,
    build_small_trees,
    compute_pivots,
    default_eps,
    overlap_census,
    sample_hierarchy,
)
from .graph import INF, WeightedGraph, generate_graph, hop_bounded_dist, oracle
from .ledger import RoundLedger, simulate_staggered_broadcast
from .pipeline import RunConfig, RunReport, run
from .routing import assemble, find_tree, route, sketch_dist, stretch_bound
from .tree_routing import ARRIVED, build_all_trees_parallel, build_tree_routing, tree_route_step

__version__ = "0.1.0"
