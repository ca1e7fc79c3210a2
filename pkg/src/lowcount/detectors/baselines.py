"""Distribution-tail and zero-run baselines."""

from __future__ import annotations

import numpy as np

from ..series import CountSeries, ScoreSeries


def ecod_score(series: CountSeries) -> ScoreSeries:
    """Larger of the left- and right-tail ECDF surprisals, fitted on the whole series.

    The skewness-driven tail choice of full ECOD is dropped; both tails are
    always considered.
    """
    x = series.values
    n = x.size
    if n < 10:
        raise ValueError("ECOD needs at least 10 observations")
    ordered = np.sort(x)
    left = np.searchsorted(ordered, x, side="right") / n
    right = (n - np.searchsorted(ordered, x, side="left")) / n
    return ScoreSeries(np.maximum(-np.log(left), -np.log(right)), valid_from=0)


def zero_run_length_score(series: CountSeries) -> ScoreSeries:
    """Length of the run of zeros ending at each step."""
    scores = np.zeros(len(series))
    run = 0
    for t, v in enumerate(series.values):
        run = run + 1 if v == 0 else 0
        scores[t] = run
    return ScoreSeries(scores, valid_from=0)
