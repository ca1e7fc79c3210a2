"""Bayes optimal classifier: forward filtering of the true generative model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ..datagen import GeneratorConfig, seasonal_rates, stationary_distribution
from ..series import CountSeries, ScoreSeries


@dataclass(frozen=True, eq=False)
class BocSpec:
    rates: np.ndarray
    reduction_rate: float
    transition: tuple[tuple[float, float], tuple[float, float]]
    initial_dist: tuple[float, float] | None = field(default=None)

    def __post_init__(self) -> None:
        rates = np.asarray(self.rates, dtype=float)
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "rates", rates)
        if self.initial_dist is None:
            object.__setattr__(self, "initial_dist", stationary_distribution(self.transition))
        if abs(sum(self.initial_dist) - 1.0) > 1e-12:
            raise ValueError("initial_dist must sum to 1")

    @classmethod
    def from_generator(cls, cfg: GeneratorConfig) -> BocSpec:
        return cls(seasonal_rates(cfg), cfg.reduction_rate, cfg.transition)


def poisson_logpmf(x: np.ndarray, rate: np.ndarray) -> np.ndarray:
    """Poisson log-pmf that treats rate 0 as the point mass at 0."""
    x = np.asarray(x, dtype=float)
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(rate) - rate - gammaln(x + 1.0)
    degenerate = rate == 0.0
    return np.where(degenerate, np.where(x == 0, 0.0, -np.inf), out)


def _logaddexp(a: float, b: float) -> float:
    hi = a if a > b else b
    if hi == -math.inf:
        return -math.inf
    return hi + math.log1p(math.exp(-abs(a - b)))


def forward_filter(series: CountSeries, spec: BocSpec) -> np.ndarray:
    """Filtered state posteriors ``P(S_t | x_1..x_t)``, shape ``(n, 2)``."""
    x = series.values
    if spec.rates.size != x.size:
        raise ValueError(f"rates length {spec.rates.size} != series length {x.size}")
    n = x.size
    log_emit = np.stack(
        [poisson_logpmf(x, spec.rates), poisson_logpmf(x, (1.0 - spec.reduction_rate) * spec.rates)],
        axis=1,
    )
    with np.errstate(divide="ignore"):
        (l00, l01), (l10, l11) = np.log(np.asarray(spec.transition, dtype=float)).tolist()
        init0, init1 = np.log(np.asarray(spec.initial_dist, dtype=float)).tolist()

    post = np.empty((n, 2))
    e0 = log_emit[:, 0].tolist()
    e1 = log_emit[:, 1].tolist()
    p0, p1 = init0, init1
    for t in range(n):
        if t == 0:
            q0, q1 = init0, init1
        else:
            q0 = _logaddexp(p0 + l00, p1 + l10)
            q1 = _logaddexp(p0 + l01, p1 + l11)
        j0 = q0 + e0[t]
        j1 = q1 + e1[t]
        norm = _logaddexp(j0, j1)
        if norm == -math.inf:
            # observation impossible under both states
            p0, p1 = init0, init1
        else:
            p0, p1 = j0 - norm, j1 - norm
        post[t, 0] = math.exp(p0)
        post[t, 1] = math.exp(p1)
    return post


def boc_score(series: CountSeries, spec: BocSpec) -> ScoreSeries:
    return ScoreSeries(forward_filter(series, spec)[:, 1], valid_from=0)
