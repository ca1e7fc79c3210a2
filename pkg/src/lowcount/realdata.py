"""Preparing externally sourced count series: ingestion, binning, zero-out and injection."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen import DEFAULT_TRANSITION, markov_path, stream_entropy
from .series import CountSeries, read_series_csv


def _rng(*key: object) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(stream_entropy(*key)))


def ingest_csv(path: str | Path, dt: float = 1.0, label_column_present: bool = False) -> CountSeries:
    return read_series_csv(path, dt=dt, label_column_present=label_column_present)


def bin_by_count_level(series_set: Sequence[CountSeries], bins: int = 4) -> dict[int, list[CountSeries]]:
    """Split series into ``bins`` groups of near-equal size by ascending mean count.

    Bin 0 holds the lowest counts; leftover series go to the lowest bins.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    if len(series_set) < bins:
        raise ValueError(f"need at least {bins} series, got {len(series_set)}")
    order = sorted(range(len(series_set)), key=lambda i: (float(series_set[i].values.mean()), i))
    base, extra = divmod(len(series_set), bins)
    out: dict[int, list[CountSeries]] = {}
    pos = 0
    for b in range(bins):
        size = base + (1 if b < extra else 0)
        out[b] = [series_set[i] for i in order[pos : pos + size]]
        pos += size
    return out


def binomial_zero_out(series: CountSeries, p: float, seed: int) -> CountSeries:
    """Independently replace each value by zero with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = _rng("zero-out", int(seed))
    zero = rng.random(len(series)) < p
    return series.with_values(np.where(zero, 0, series.values))


def inject_anomalies(
    series: CountSeries,
    reduction_rate: float,
    transition: Sequence[Sequence[float]] = DEFAULT_TRANSITION,
    seed: int = 0,
) -> CountSeries:
    """Thin counts during Markov-chain anomalous states; any existing labels are replaced.

    Each unit of an anomalous count survives with probability ``1 - r``, which
    turns Poisson(lambda) into Poisson((1 - r) lambda).
    """
    if not 0.0 <= reduction_rate <= 1.0:
        raise ValueError("reduction_rate must lie in [0, 1]")
    n = len(series)
    key = (series.meta.get("id", ""), int(seed), float(reduction_rate))
    states_rng = _rng("inject-states", *key)
    thin_rng = _rng("inject-thin", *key)
    states = markov_path(transition, n, states_rng) if n else np.zeros(0, dtype=np.int8)
    anomalous = states == 1
    thinned = thin_rng.binomial(series.values, 1.0 - reduction_rate)
    values = np.where(anomalous, thinned, series.values)
    meta = dict(series.meta)
    meta["injected"] = f"r={reduction_rate:g},seed={seed}"
    return CountSeries(values, series.dt, anomalous, meta)
