"""Shared series types, label/segment conversions and the series CSV format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# Scores before ``valid_from`` carry this value and are never evaluated.
WARMUP_SENTINEL = 0.0


class SeriesFormatError(ValueError):
    """A series CSV file does not follow the ``t,value[,label]`` format."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AnomalySegment:
    """Half-open index range ``[start, end)`` of anomalous timesteps."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid segment [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class CountSeries:
    """Integer-valued series sampled every ``dt`` time units."""

    values: np.ndarray
    dt: float = 1.0
    labels: np.ndarray | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        raw = np.asarray(self.values)
        if raw.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if raw.size and not np.all(np.equal(np.mod(raw, 1), 0)):
            raise ValueError("values must be integral")
        values = raw.astype(np.int64)
        if np.any(values < 0):
            raise ValueError("values must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", _frozen(values))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=bool)
            if labels.shape != values.shape:
                raise ValueError("labels must have the same length as values")
            object.__setattr__(self, "labels", _frozen(labels.copy()))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return int(self.values.size)

    def with_values(self, values: np.ndarray) -> CountSeries:
        return CountSeries(values, self.dt, self.labels, self.meta)

    def with_labels(self, labels: np.ndarray | None) -> CountSeries:
        return CountSeries(self.values, self.dt, labels, self.meta)

    def segments(self) -> list[AnomalySegment]:
        if self.labels is None:
            return []
        return segments_from_mask(self.labels)


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """Per-timestep anomaly scores; entries before ``valid_from`` are warm-up."""

    scores: np.ndarray
    valid_from: int = 0

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=float)
        if scores.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if np.isnan(scores).any():
            raise ValueError("scores must not contain NaN")
        if not 0 <= self.valid_from <= scores.size:
            raise ValueError("valid_from out of range")
        scores[: self.valid_from] = WARMUP_SENTINEL
        object.__setattr__(self, "scores", _frozen(scores))

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def evaluated(self) -> np.ndarray:
        return self.scores[self.valid_from :]


def segments_from_mask(mask: Sequence[bool] | np.ndarray) -> list[AnomalySegment]:
    """Maximal runs of ``True`` as sorted, disjoint segments."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return []
    padded = np.concatenate(([False], m, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [AnomalySegment(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def mask_from_segments(segments: Iterable[AnomalySegment], length: int) -> np.ndarray:
    mask = np.zeros(length, dtype=bool)
    for seg in segments:
        if seg.end > length:
            raise ValueError(f"segment [{seg.start}, {seg.end}) exceeds length {length}")
        mask[seg.start : seg.end] = True
    return mask


def format_series_csv(series: CountSeries) -> str:
    buf = io.StringIO()
    with_labels = series.labels is not None
    buf.write("t,value,label\n" if with_labels else "t,value\n")
    for t, v in enumerate(series.values):
        if with_labels:
            buf.write(f"{t},{int(v)},{int(series.labels[t])}\n")
        else:
            buf.write(f"{t},{int(v)}\n")
    return buf.getvalue()


def write_series_csv(series: CountSeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_series_csv(series))


def read_series_csv(
    path: str | Path, dt: float = 1.0, label_column_present: bool | None = None
) -> CountSeries:
    """Parse a ``t,value[,label]`` file.

    ``label_column_present=None`` infers it from the header; ``True``/``False``
    require the header to agree.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SeriesFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header == ["t", "value"]:
        has_labels = False
    elif header == ["t", "value", "label"]:
        has_labels = True
    else:
        raise SeriesFormatError(f"{path}: line 1: bad header {','.join(header)!r}")
    if label_column_present is not None and label_column_present != has_labels:
        want = "with" if label_column_present else "without"
        raise SeriesFormatError(f"{path}: line 1: expected header {want} label column")

    values: list[int] = []
    labels: list[bool] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SeriesFormatError(f"{path}: line {lineno}: expected {len(header)} fields")
        try:
            v = int(row[1])
        except ValueError:
            raise SeriesFormatError(
                f"{path}: line {lineno}: value {row[1]!r} is not an integer"
            ) from None
        if v < 0:
            raise SeriesFormatError(f"{path}: line {lineno}: negative value {v}")
        values.append(v)
        if has_labels:
            if row[2] not in ("0", "1"):
                raise SeriesFormatError(f"{path}: line {lineno}: label must be 0 or 1")
            labels.append(row[2] == "1")
    return CountSeries(
        np.asarray(values, dtype=np.int64),
        dt=dt,
        labels=np.asarray(labels, dtype=bool) if has_labels else None,
        meta={"id": path.stem, "source": str(path)},
    )
