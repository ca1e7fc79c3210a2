"""Benchmark toolkit for anomaly detection on low-count seasonal time series."""

from .datagen import GeneratorConfig, generate, generate_grid, seasonal_rate
from .metrics import auprc, best_f1, f1_ttd_tradeoff, pr_curve, time_to_detection
from .series import AnomalySegment, CountSeries, ScoreSeries, mask_from_segments, segments_from_mask
from .smoothing import SmootherSpec, smooth

__version__ = "0.1.0"

__all__ = [
    "AnomalySegment",
    "CountSeries",
    "GeneratorConfig",
    "ScoreSeries",
    "SmootherSpec",
    "auprc",
    "best_f1",
    "f1_ttd_tradeoff",
    "generate",
    "generate_grid",
    "mask_from_segments",
    "pr_curve",
    "seasonal_rate",
    "segments_from_mask",
    "smooth",
    "time_to_detection",
]
