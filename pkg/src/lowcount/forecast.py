"""Forecast-based detection: a pluggable one-step forecaster and three scoring rules."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Protocol

import numpy as np
from scipy import stats

from .series import CountSeries, ScoreSeries

SIGMA_FLOOR = 1e-3
QUANTILE_DENOM_FLOOR = 1e-3

Scorer = Literal["absolute-error", "quantile", "negative-residual"]
SCORERS: tuple[str, ...] = ("absolute-error", "quantile", "negative-residual")


def poisson_quantile(rate: float, p: float) -> int:
    """Smallest k with P(X <= k) >= p for X ~ Poisson(rate)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if rate <= 0.0:
        return 0
    k = int(stats.poisson.ppf(p, rate))
    # ppf is computed in floating point; settle onto the exact boundary
    while k > 0 and stats.poisson.cdf(k - 1, rate) >= p:
        k -= 1
    while stats.poisson.cdf(k, rate) < p:
        k += 1
    return k


@dataclass(frozen=True)
class Forecast:
    mean: float
    std: float
    quantile_fn: Callable[[float], float] = field(compare=False)

    def __post_init__(self) -> None:
        if self.std < 0:
            raise ValueError("std must be non-negative")

    def quantile(self, p: float) -> float:
        return self.quantile_fn(p)

    @classmethod
    def poisson(cls, rate: float, sigma_floor: float = SIGMA_FLOOR) -> Forecast:
        cache: dict[float, int] = {}

        def q(p: float) -> float:
            if p not in cache:
                cache[p] = poisson_quantile(rate, p)
            return float(cache[p])

        return cls(mean=rate, std=max(math.sqrt(rate), sigma_floor), quantile_fn=q)


class Forecaster(Protocol):
    """Anything that yields a one-step-ahead predictive summary for step ``t``."""

    def forecast(self, t: int) -> Forecast: ...


@dataclass(frozen=True)
class ForecasterSpec:
    kind: Literal["seasonal-profile"] = "seasonal-profile"
    period: int = 10
    train_fraction: float = 0.3
    robust: bool = False

    def __post_init__(self) -> None:
        if self.kind != "seasonal-profile":
            raise ValueError(f"unknown forecaster kind {self.kind!r}")
        if self.period < 1:
            raise ValueError("period must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def train_end(length: int, train_fraction: float) -> int:
    return int(math.ceil(train_fraction * length))


@dataclass(frozen=True, eq=False)
class SeasonalProfileForecaster:
    """Per-phase Poisson rate estimated from a training prefix."""

    profile: np.ndarray
    period: int
    fitted_until: int
    _by_phase: tuple[Forecast, ...] = field(repr=False, default=())

    def __post_init__(self) -> None:
        if not self._by_phase:
            object.__setattr__(
                self, "_by_phase", tuple(Forecast.poisson(float(lam)) for lam in self.profile)
            )

    def forecast(self, t: int) -> Forecast:
        return self._by_phase[t % self.period]


def fit_seasonal_profile(series: CountSeries, spec: ForecasterSpec) -> SeasonalProfileForecaster:
    n = len(series)
    if n < 2 * spec.period:
        raise ValueError(f"series of length {n} is shorter than two periods ({spec.period})")
    end = max(train_end(n, spec.train_fraction), 2 * spec.period)
    values = series.values[:end].astype(float)
    keep = np.ones(end, dtype=bool) if series.labels is None else ~series.labels[:end]
    phase = np.arange(end) % spec.period
    reduce = np.median if spec.robust else np.mean

    profile = np.empty(spec.period)
    for p in range(spec.period):
        at_phase = phase == p
        chosen = values[at_phase & keep]
        if chosen.size == 0:
            # every training step at this phase is labelled anomalous
            chosen = values[at_phase]
        profile[p] = float(reduce(chosen))
    return SeasonalProfileForecaster(profile, spec.period, end)


def score_absolute_error(x: float, f: Forecast, sigma_floor: float = SIGMA_FLOOR) -> float:
    return abs(x - f.mean) / max(f.std, sigma_floor)


def score_quantile(
    x: float, f: Forecast, l: float = 0.05, denom_floor: float = QUANTILE_DENOM_FLOOR
) -> float:
    q50 = f.quantile(0.5)
    ql = f.quantile(l)
    band = q50 - ql
    return max((abs(q50 - x) - band) / max(band, denom_floor), 0.0)


def score_negative_residual(x: float, f: Forecast, sigma_floor: float = SIGMA_FLOOR) -> float:
    return -(x - f.mean) / max(f.std, sigma_floor)


def detect(
    series: CountSeries,
    spec: ForecasterSpec,
    scorer: Scorer = "negative-residual",
    l: float = 0.05,
    forecaster: Forecaster | None = None,
) -> ScoreSeries:
    """Score every step after the training prefix against a one-step forecast.

    A pre-fitted ``forecaster`` may be passed in; otherwise a seasonal
    profile is fitted on the prefix.
    """
    if scorer == "absolute-error":
        rule = score_absolute_error
    elif scorer == "quantile":
        rule = lambda x, f: score_quantile(x, f, l)  # noqa: E731
    elif scorer == "negative-residual":
        rule = score_negative_residual
    else:
        raise ValueError(f"unknown scorer {scorer!r}; expected one of {SCORERS}")

    if forecaster is None:
        forecaster = fit_seasonal_profile(series, spec)
        start = forecaster.fitted_until
    else:
        start = train_end(len(series), spec.train_fraction)
    scores = np.zeros(len(series))
    values = series.values
    for t in range(start, len(series)):
        scores[t] = rule(float(values[t]), forecaster.forecast(t))
    return ScoreSeries(scores, valid_from=start)
