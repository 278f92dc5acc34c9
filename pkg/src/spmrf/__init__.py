"""Superpixel-level reformulation and exact min-cut solving of binary MRFs."""

from spmrf.mrf import (
    GridGeometry,
    NeighborPair,
    PairwiseWeights,
    PixelMrf,
    brute_force_minimize,
    build_grid_mrf,
    energy,
    is_submodular,
)
from spmrf.partition import (
    RgbImage,
    SuperpixelPartition,
    adjacency,
    identity_partition,
    load_partition,
    save_partition,
    slic_superpixels,
)
from spmrf.superpixelize import (
    AggregationReport,
    SuperpixelMrf,
    edge_aggregation_residuals,
    lift,
    restrict,
    sp_energy,
    superpixelize,
    superpixelize_potts,
)
from spmrf.maxflow import FlowGraph, SolveResult, build_st_graph, max_flow, solve
from spmrf.pipeline import (
    EdgeMap,
    RobotUserConverged,
    Seeds,
    SegMetrics,
    boundary_deviation,
    compute_metrics,
    edge_pairwise_weights,
    gradient_edge_map,
    overlap_ratio,
    robot_user,
    seed_unary,
    segment_pixel,
    segment_superpixel,
    user_effort,
)

__all__ = [
    "AggregationReport",
    "EdgeMap",
    "FlowGraph",
    "GridGeometry",
    "NeighborPair",
    "PairwiseWeights",
    "PixelMrf",
    "RgbImage",
    "RobotUserConverged",
    "Seeds",
    "SegMetrics",
    "SolveResult",
    "SuperpixelMrf",
    "SuperpixelPartition",
    "adjacency",
    "boundary_deviation",
    "brute_force_minimize",
    "build_grid_mrf",
    "build_st_graph",
    "edge_aggregation_residuals",
    "compute_metrics",
    "edge_pairwise_weights",
    "energy",
    "gradient_edge_map",
    "identity_partition",
    "is_submodular",
    "lift",
    "load_partition",
    "max_flow",
    "overlap_ratio",
    "restrict",
    "robot_user",
    "save_partition",
    "seed_unary",
    "segment_pixel",
    "segment_superpixel",
    "slic_superpixels",
    "solve",
    "sp_energy",
    "superpixelize",
    "superpixelize_potts",
    "user_effort",
]
