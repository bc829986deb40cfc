"""Homotopy continuation for square polynomial systems."""

from .core import (
    PathResult,
    TrackerConfig,
    TrackResult,
    compile_system,
    evaluate_system,
    newton_refine,
    refine_points,
    track_homotopy,
    track_path,
)
from .homotopy import Homotopy, LinearFactors, build, merge_terms, poly_terms, variable_groups
from .start import StartSystem, bezout_multihomog, bezout_total, multihomog_start, total_degree_start

__all__ = [
    "Homotopy",
    "LinearFactors",
    "PathResult",
    "StartSystem",
    "TrackResult",
    "TrackerConfig",
    "bezout_multihomog",
    "bezout_total",
    "build",
    "compile_system",
    "evaluate_system",
    "merge_terms",
    "multihomog_start",
    "newton_refine",
    "poly_terms",
    "refine_points",
    "total_degree_start",
    "track_homotopy",
    "track_path",
    "variable_groups",
]
