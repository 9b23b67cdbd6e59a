"""Adaptation loop and metric-conforming mesh generation."""
from .affine import eigenframe, generate_affine_mapped
from .bisect import generate_bisection, metric_lengths
from .external import external_mesher_roundtrip, format_command
from .loop import AdaptConfig, AdaptResult, Backend, IterationRecord, adapt_loop, compute_metric, regenerate
from .sampling import MetricSampler

__all__ = [
    "AdaptConfig", "AdaptResult", "Backend", "IterationRecord", "adapt_loop", "compute_metric", "regenerate",
    "generate_affine_mapped", "generate_bisection", "external_mesher_roundtrip", "format_command",
    "MetricSampler", "eigenframe", "metric_lengths",
]
