"""Causal post-hoc smoothing of anomaly scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .series import ScoreSeries

SmootherKind = Literal["none", "ema", "sw-avg", "sw-med", "sw-max", "sw-min"]
SMOOTHER_IDS: tuple[str, ...] = ("none", "ema", "sw-avg", "sw-med", "sw-max", "sw-min")

_WINDOW_REDUCERS = {
    "sw-avg": np.mean,
    "sw-med": np.median,
    "sw-max": np.max,
    "sw-min": np.min,
}


@dataclass(frozen=True)
class SmootherSpec:
    kind: SmootherKind = "none"
    alpha: float = 0.125
    window: int = 8

    def __post_init__(self) -> None:
        if self.kind not in SMOOTHER_IDS:
            raise ValueError(f"unknown smoother {self.kind!r}; valid ids: {', '.join(SMOOTHER_IDS)}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.window < 1:
            raise ValueError("window must be at least 1")

    @property
    def id(self) -> str:
        return self.kind

    def to_dict(self) -> dict:
        return asdict(self)


def ema(values: np.ndarray, alpha: float) -> np.ndarray:
    out = np.empty(len(values))
    s = 0.0
    for t, a in enumerate(values):
        s = a if t == 0 else (1.0 - alpha) * s + alpha * a
        out[t] = s
    return out


def trailing_window(values: np.ndarray, window: int, reducer) -> np.ndarray:
    """Apply ``reducer`` to the trailing ``window`` values, truncated at the start."""
    values = np.asarray(values, dtype=float)
    n = values.size
    out = np.empty(n)
    head = min(window - 1, n)
    for t in range(head):
        out[t] = reducer(values[: t + 1])
    if n >= window:
        out[window - 1 :] = reducer(sliding_window_view(values, window), axis=1)
    return out


def smooth(scores: ScoreSeries, spec: SmootherSpec) -> ScoreSeries:
    """Smooth the evaluated part of ``scores``; warm-up entries are left alone."""
    if spec.kind == "none":
        return scores
    raw = scores.evaluated
    if spec.kind == "ema":
        out = ema(raw, spec.alpha)
    else:
        out = trailing_window(raw, spec.window, _WINDOW_REDUCERS[spec.kind])
    full = scores.scores.copy()
    full[scores.valid_from :] = out
    return ScoreSeries(full, valid_from=scores.valid_from)
