"""Isolation forest over raw window vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..series import CountSeries, ScoreSeries
from .distance import WindowSpec, windows

EULER_GAMMA = 0.5772156649015329


def average_path_length(n: int | np.ndarray) -> np.ndarray:
    """Expected unsuccessful-search path length in a BST of ``n`` nodes."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    out[n == 2] = 1.0
    big = n > 2
    out[big] = 2.0 * (np.log(n[big] - 1.0) + EULER_GAMMA) - 2.0 * (n[big] - 1.0) / n[big]
    return out


@dataclass(frozen=True)
class IsoForestSpec:
    n_trees: int = 100
    subsample: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.subsample < 2:
            raise ValueError("subsample must be at least 2")


@dataclass(frozen=True, eq=False)
class IsolationTree:
    # Leaves have feature == -1; ``size`` is the training count reaching each node.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    @classmethod
    def grow(cls, X: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        size: list[int] = []

        def build(rows: np.ndarray, depth: int) -> int:
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            size.append(rows.shape[0])
            if depth >= height_limit or rows.shape[0] <= 1:
                return node
            lo = rows.min(axis=0)
            hi = rows.max(axis=0)
            splittable = np.flatnonzero(hi > lo)
            if splittable.size == 0:
                return node
            q = int(splittable[rng.integers(splittable.size)])
            p = float(rng.uniform(lo[q], hi[q]))
            go_left = rows[:, q] < p
            feature[node] = q
            threshold[node] = p
            left[node] = build(rows[go_left], depth + 1)
            right[node] = build(rows[~go_left], depth + 1)
            return node

        build(X, 0)
        return cls(
            np.asarray(feature),
            np.asarray(threshold),
            np.asarray(left),
            np.asarray(right),
            np.asarray(size),
        )

    def path_length(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        depth = np.zeros(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            depth[idx] += 1.0
            active = self.feature[node] >= 0
        return depth + average_path_length(self.size[node])


class IsolationForest:
    def __init__(self, spec: IsoForestSpec = IsoForestSpec()):
        self.spec = spec
        self.trees: list[IsolationTree] = []
        self.sample_size = spec.subsample

    def fit(self, X: np.ndarray) -> IsolationForest:
        X = np.asarray(X, dtype=float)
        if X.shape[0] < self.spec.subsample:
            raise ValueError(
                f"need at least {self.spec.subsample} samples, got {X.shape[0]}"
            )
        rng = np.random.default_rng(self.spec.seed)
        self.sample_size = self.spec.subsample
        height_limit = int(math.ceil(math.log2(self.sample_size)))
        self.trees = []
        for _ in range(self.spec.n_trees):
            idx = rng.choice(X.shape[0], self.sample_size, replace=False)
            self.trees.append(IsolationTree.grow(X[idx], height_limit, rng))
        return self

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        mean_path = np.mean([tree.path_length(X) for tree in self.trees], axis=0)
        return 2.0 ** (-mean_path / average_path_length(self.sample_size))


def isolation_forest_score(
    series: CountSeries, w: WindowSpec = WindowSpec(), spec: IsoForestSpec = IsoForestSpec()
) -> ScoreSeries:
    X = windows(series.values, w.width)
    forest = IsolationForest(spec).fit(X)
    scores = np.zeros(len(series))
    scores[w.width - 1 :] = forest.score(X)
    return ScoreSeries(scores, valid_from=w.width - 1)
