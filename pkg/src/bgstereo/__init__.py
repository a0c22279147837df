"""Edge-aware cost volume upsampling in a bilateral grid.

A small numerical library and CLI: classical census-based stereo costs at
low resolution, a differentiable bilateral-grid slicing operator to lift
them to full resolution under an intensity guidance map, soft-argmin
disparity regression, and the matching evaluation metrics.
"""
from .core import DenseArray, at, make_array, map_binary, set_at
from .features import (
    CensusCodes,
    CostVolume,
    FeatureMap,
    GroupCostVolume,
    GuidanceMap,
    aggregate_box,
    census_cost_volume,
    census_transform,
    downsample_avg,
    groupwise_correlation,
    reduce_groups,
    to_luma,
)
from .grid import (
    BilateralGrid,
    LinearGridWeights,
    SliceParams,
    convert_linear,
    linear_upsample,
    set_threads,
    slice_backward,
    slice_forward,
    splat_build,
)
from .imageio import (
    DisparityMap,
    Image,
    read_pfm,
    read_pnm,
    write_disparity_pgm,
    write_pfm,
    write_pnm,
)
from .metrics import EdgeMask, EvalReport, bad_tau, d1, edge_flat_partition, epe, eval_report
from .pipeline import CompareResult, MatchResult, PipelineConfig, bench, match, upsample_compare
from .regress import SoftArgminConfig, smooth_l1_loss, soft_argmin, soft_argmin_backward

__version__ = "0.1.0"

__all__ = [
    "DenseArray",
    "make_array",
    "at",
    "set_at",
    "map_binary",
    "Image",
    "DisparityMap",
    "read_pnm",
    "write_pnm",
    "read_pfm",
    "write_pfm",
    "write_disparity_pgm",
    "GuidanceMap",
    "FeatureMap",
    "CostVolume",
    "GroupCostVolume",
    "CensusCodes",
    "to_luma",
    "census_transform",
    "census_cost_volume",
    "groupwise_correlation",
    "reduce_groups",
    "downsample_avg",
    "aggregate_box",
    "BilateralGrid",
    "SliceParams",
    "LinearGridWeights",
    "splat_build",
    "convert_linear",
    "slice_forward",
    "slice_backward",
    "linear_upsample",
    "set_threads",
    "SoftArgminConfig",
    "soft_argmin",
    "soft_argmin_backward",
    "smooth_l1_loss",
    "EdgeMask",
    "EvalReport",
    "epe",
    "bad_tau",
    "d1",
    "edge_flat_partition",
    "eval_report",
    "PipelineConfig",
    "MatchResult",
    "CompareResult",
    "match",
    "upsample_compare",
    "bench",
]
