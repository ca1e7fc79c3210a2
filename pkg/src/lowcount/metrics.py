"""Point-wise precision/recall metrics and time-to-detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .series import AnomalySegment, ScoreSeries, segments_from_mask


class UndefinedCurveError(ValueError):
    """The evaluated labels are all positive or all negative."""


@dataclass(frozen=True, eq=False)
class PrCurve:
    """Precision/recall at every distinct score threshold, highest threshold first."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    prevalence: float
    true_positives: np.ndarray | None = None
    flagged: np.ndarray | None = None

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(p), float(r))
            for t, p, r in zip(self.thresholds, self.precision, self.recall)
        ]

    def __len__(self) -> int:
        return int(self.thresholds.size)


@dataclass(frozen=True)
class TtdReport:
    per_segment: list[tuple[AnomalySegment, int]]
    mean_ttd: float
    detected_fraction: float


def _as_scores(scores: ScoreSeries | Sequence[float] | np.ndarray) -> ScoreSeries:
    return scores if isinstance(scores, ScoreSeries) else ScoreSeries(np.asarray(scores, float))


def evaluation_window(
    scores: ScoreSeries | Sequence[float] | np.ndarray,
    labels: Sequence[bool] | np.ndarray,
    eval_from: int = 0,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Scores and labels from ``max(valid_from, eval_from)`` on, plus that offset."""
    s = _as_scores(scores)
    y = np.asarray(labels, dtype=bool)
    if y.shape != s.scores.shape:
        raise ValueError("scores and labels differ in length")
    start = max(s.valid_from, eval_from)
    return s.scores[start:], y[start:], start


def _curve(s: np.ndarray, y: np.ndarray) -> PrCurve:
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise UndefinedCurveError("precision-recall needs both positive and negative labels")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each tie group
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    tp = np.cumsum(y_sorted)[ends]
    predicted = ends + 1
    return PrCurve(
        thresholds=s_sorted[ends],
        precision=tp / predicted,
        recall=tp / n_pos,
        prevalence=n_pos / y.size,
        true_positives=tp,
        flagged=predicted,
    )


def pr_curve(
    scores: ScoreSeries | Sequence[float] | np.ndarray,
    labels: Sequence[bool] | np.ndarray,
    eval_from: int = 0,
) -> PrCurve:
    s, y, _ = evaluation_window(scores, labels, eval_from)
    return _curve(s, y)


def auprc(curve: PrCurve) -> float:
    """Average precision: precision weighted by the recall gained at each threshold."""
    gains = np.diff(np.concatenate(([0.0], curve.recall)))
    return float(np.sum(gains * curve.precision))


def _f1(curve: PrCurve) -> np.ndarray:
    """F1 per threshold; 0 where precision and recall are both 0.

    With counts available F1 is the integer ratio ``2 tp / (flagged + positives)``,
    so equal F1 values compare equal and ties break deterministically.
    """
    if curve.true_positives is not None and curve.flagged is not None:
        positives = curve.true_positives[-1]
        return 2.0 * curve.true_positives / (curve.flagged + positives)
    p, r = curve.precision, curve.recall
    denom = p + r
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, 2.0 * p * r / denom, 0.0)


def best_f1(
    scores: ScoreSeries | Sequence[float] | np.ndarray,
    labels: Sequence[bool] | np.ndarray,
    eval_from: int = 0,
) -> tuple[float, float]:
    """Highest F1 over thresholds and the threshold achieving it (highest on ties)."""
    curve = pr_curve(scores, labels, eval_from)
    f1 = _f1(curve)
    k = int(np.argmax(f1))
    return float(f1[k]), float(curve.thresholds[k])


def _segment_delays(
    scores: np.ndarray, segments: Sequence[AnomalySegment], thresholds: np.ndarray
) -> np.ndarray:
    """Delay matrix of shape ``(len(segments), len(thresholds))``; a miss costs the segment length."""
    delays = np.empty((len(segments), thresholds.size), dtype=np.int64)
    for row, seg in enumerate(segments):
        running_max = np.maximum.accumulate(scores[seg.start : seg.end])
        delays[row] = np.searchsorted(running_max, thresholds, side="left")
    return delays


def time_to_detection(
    scores: ScoreSeries | Sequence[float] | np.ndarray,
    segments: Sequence[AnomalySegment],
    threshold: float,
) -> TtdReport:
    s = _as_scores(scores)
    for seg in segments:
        if seg.start < s.valid_from or seg.end > len(s):
            raise ValueError(f"segment [{seg.start}, {seg.end}) outside the evaluated region")
    if not segments:
        return TtdReport([], 0.0, 0.0)
    delays = _segment_delays(s.scores, segments, np.array([threshold]))[:, 0]
    detected = [int(d) < len(seg) for d, seg in zip(delays, segments)]
    return TtdReport(
        per_segment=[(seg, int(d)) for seg, d in zip(segments, delays)],
        mean_ttd=float(delays.mean()),
        detected_fraction=sum(detected) / len(segments),
    )


def clipped_segments(labels: np.ndarray, start: int) -> list[AnomalySegment]:
    """Segments of ``labels`` restricted to indices ``>= start``."""
    mask = np.asarray(labels, dtype=bool).copy()
    mask[:start] = False
    return segments_from_mask(mask)


def f1_ttd_tradeoff(
    scores: ScoreSeries | Sequence[float] | np.ndarray,
    labels: Sequence[bool] | np.ndarray,
    segments: Sequence[AnomalySegment] | None = None,
    eval_from: int = 0,
) -> list[tuple[float, float, float]]:
    """``(threshold, f1, mean_ttd)`` for every distinct score threshold."""
    s = _as_scores(scores)
    sw, yw, start = evaluation_window(s, labels, eval_from)
    curve = _curve(sw, yw)
    f1 = _f1(curve)
    if segments is None:
        segments = clipped_segments(np.asarray(labels, dtype=bool), start)
    if segments:
        mean_ttd = _segment_delays(s.scores, segments, curve.thresholds).mean(axis=0)
    else:
        mean_ttd = np.zeros(curve.thresholds.size)
    return [(float(t), float(f), float(d)) for t, f, d in zip(curve.thresholds, f1, mean_ttd)]


def improvement_rate(auprc_smoothed: float, auprc_raw: float) -> float:
    """Percentage change of smoothed over raw AUPRC."""
    if auprc_raw < 0:
        raise ValueError("auprc_raw must be non-negative")
    return 100.0 * (auprc_smoothed - auprc_raw) / max(auprc_raw, 1e-9)
