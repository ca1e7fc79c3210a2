"""Distance detectors over trailing windows: matrix profile and k-NN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..series import CountSeries, ScoreSeries

HistoryFilter = Literal["none", "oracle-labels"]


@dataclass(frozen=True)
class WindowSpec:
    width: int = 10
    stride: int = 1
    assign: Literal["last"] = "last"

    def __post_init__(self) -> None:
        if self.width < 2:
            raise ValueError("window width must be at least 2")
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")
        if self.assign != "last":
            raise ValueError("scores are assigned to the window's last index")


def windows(values: np.ndarray, width: int) -> np.ndarray:
    """Row ``s`` is ``values[s:s+width]``; the window ending at ``i`` is row ``i-width+1``."""
    return sliding_window_view(np.asarray(values, dtype=float), width)


def znormalize(rows: np.ndarray) -> np.ndarray:
    """Z-normalise each row; constant rows become the zero vector."""
    rows = np.asarray(rows, dtype=float)
    mu = rows.mean(axis=1, keepdims=True)
    sd = rows.std(axis=1, keepdims=True)
    constant = (rows.max(axis=1) == rows.min(axis=1))[:, None]
    safe = np.where(constant, 1.0, sd)
    return np.where(constant, 0.0, (rows - mu) / safe)


def max_distance(width: int) -> float:
    return 2.0 * np.sqrt(width)


def clean_windows(series: CountSeries, width: int) -> np.ndarray:
    """True for windows that overlap no labelled anomalous step."""
    if series.labels is None:
        return np.ones(len(series) - width + 1, dtype=bool)
    return ~sliding_window_view(series.labels, width).any(axis=1)


def matrix_profile(
    series: CountSeries,
    w: WindowSpec = WindowSpec(),
    history_filter: HistoryFilter = "oracle-labels",
) -> ScoreSeries:
    """Left matrix profile against non-overlapping history.

    The window ending at ``i`` is compared with every window ending at or
    before ``i - width``; under ``oracle-labels`` only history windows free of
    labelled anomalies are eligible. Without eligible history the score is
    the z-normalised distance bound ``2*sqrt(width)``.
    """
    m = w.width
    n = len(series)
    if n < 2 * m:
        raise ValueError(f"series length {n} is shorter than twice the window ({m})")
    if history_filter not in ("none", "oracle-labels"):
        raise ValueError(f"unknown history filter {history_filter!r}")
    Z = znormalize(windows(series.values, m))
    eligible = (
        clean_windows(series, m)
        if history_filter == "oracle-labels"
        else np.ones(Z.shape[0], dtype=bool)
    )
    sentinel = max_distance(m)
    scores = np.zeros(n)
    for i in range(2 * m - 1, n):
        last_start = i - 2 * m + 1
        hist = Z[: last_start + 1][eligible[: last_start + 1]]
        if hist.shape[0] == 0:
            scores[i] = sentinel
            continue
        d = np.sqrt(((hist - Z[i - m + 1]) ** 2).sum(axis=1))
        scores[i] = d.min()
    return ScoreSeries(scores, valid_from=2 * m - 1)


def knn_distance(series: CountSeries, w: WindowSpec = WindowSpec(), k: int = 5) -> ScoreSeries:
    """Mean raw Euclidean distance to the ``k`` nearest non-overlapping earlier windows."""
    if k < 1:
        raise ValueError("k must be positive")
    m = w.width
    n = len(series)
    if n < 2 * m:
        raise ValueError(f"series length {n} is shorter than twice the window ({m})")
    X = windows(series.values, m)
    scores = np.zeros(n)
    for i in range(2 * m - 1, n):
        hist = X[: i - 2 * m + 2]
        d = np.sqrt(((hist - X[i - m + 1]) ** 2).sum(axis=1))
        if d.size > k:
            d = np.partition(d, k - 1)[:k]
        scores[i] = d.mean()
    return ScoreSeries(scores, valid_from=2 * m - 1)
