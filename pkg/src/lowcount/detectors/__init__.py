"""Detector suite and the registry keyed by canonical detector id."""

from __future__ import annotations

from typing import Any, Mapping

from ..datagen import GeneratorConfig
from ..forecast import ForecasterSpec, detect as forecast_detect
from ..series import CountSeries, ScoreSeries
from .autoencoder import Autoencoder, AutoencoderSpec, autoencoder_score
from .baselines import ecod_score, zero_run_length_score
from .boc import BocSpec, boc_score, forward_filter
from .distance import WindowSpec, knn_distance, matrix_profile
from .iforest import IsoForestSpec, IsolationForest, isolation_forest_score

DETECTOR_IDS: tuple[str, ...] = (
    "matrix-profile",
    "knn",
    "auto-encoder",
    "ecod",
    "isolation-forest",
    "zero-run-length",
    "boc",
    "forecast-absolute-error",
    "forecast-quantile",
    "forecast-negative-residual",
)

# Detectors that read a seed from their spec.
SEEDED = ("auto-encoder", "isolation-forest")


class UnknownDetectorError(KeyError):
    def __str__(self) -> str:
        return f"unknown detector {self.args[0]!r}; valid ids: {', '.join(DETECTOR_IDS)}"


class MissingGeneratorError(ValueError):
    """BOC was requested for a series without its generating configuration."""


def run_detector(
    detector_id: str,
    series: CountSeries,
    spec: Mapping[str, Any] | None = None,
    *,
    period: int = 10,
    generator: GeneratorConfig | None = None,
    train_fraction: float = 0.3,
    quantile_level: float = 0.05,
) -> ScoreSeries:
    """Score ``series`` with the detector named ``detector_id``.

    ``spec`` holds detector-specific options (window ``width``, ``k``,
    ``hidden``, ``n_trees`` ...). Windowed detectors default to one seasonal
    ``period``; forecast and autoencoder detectors train on the first
    ``train_fraction`` of the series.
    """
    opts = dict(spec or {})
    if detector_id not in DETECTOR_IDS:
        raise UnknownDetectorError(detector_id)
    window = WindowSpec(int(opts.pop("width", period)))

    if detector_id == "matrix-profile":
        return matrix_profile(series, window, opts.pop("history_filter", "oracle-labels"))
    if detector_id == "knn":
        return knn_distance(series, window, int(opts.pop("k", 5)))
    if detector_id == "auto-encoder":
        opts.setdefault("train_fraction", train_fraction)
        return autoencoder_score(series, window, AutoencoderSpec(**opts))
    if detector_id == "isolation-forest":
        return isolation_forest_score(series, window, IsoForestSpec(**opts))
    if detector_id == "ecod":
        return ecod_score(series)
    if detector_id == "zero-run-length":
        return zero_run_length_score(series)
    if detector_id == "boc":
        if generator is None:
            raise MissingGeneratorError("boc needs the generating configuration (true rates)")
        return boc_score(series, BocSpec.from_generator(generator))

    scorer = detector_id.removeprefix("forecast-")
    level = float(opts.pop("l", quantile_level))
    fspec = ForecasterSpec(
        period=int(opts.pop("period", period)),
        train_fraction=float(opts.pop("train_fraction", train_fraction)),
        robust=bool(opts.pop("robust", False)),
    )
    return forecast_detect(series, fspec, scorer, l=level)


__all__ = [
    "Autoencoder",
    "AutoencoderSpec",
    "BocSpec",
    "DETECTOR_IDS",
    "IsoForestSpec",
    "IsolationForest",
    "MissingGeneratorError",
    "UnknownDetectorError",
    "WindowSpec",
    "autoencoder_score",
    "boc_score",
    "ecod_score",
    "forward_filter",
    "isolation_forest_score",
    "knn_distance",
    "matrix_profile",
    "run_detector",
    "zero_run_length_score",
]
