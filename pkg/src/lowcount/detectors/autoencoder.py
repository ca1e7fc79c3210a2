"""Single-hidden-layer window autoencoder trained by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..forecast import train_end
from ..series import CountSeries, ScoreSeries
from .distance import WindowSpec, clean_windows, windows

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class AutoencoderSpec:
    hidden: int = 4
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0
    train_fraction: float = 0.3

    def __post_init__(self) -> None:
        if self.hidden < 1 or self.epochs < 1:
            raise ValueError("hidden and epochs must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass
class Autoencoder:
    """``w -> tanh(h) -> w`` with an affine decoder."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    history: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, width: int, hidden: int, rng: np.random.Generator) -> Autoencoder:
        return cls(
            W1=rng.normal(0.0, 1.0 / np.sqrt(width), size=(width, hidden)),
            b1=np.zeros(hidden),
            W2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, width)),
            b2=np.zeros(width),
        )

    @property
    def params(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2)

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return np.tanh(X @ self.W1 + self.b1) @ self.W2 + self.b2

    def errors(self, X: np.ndarray) -> np.ndarray:
        """Per-row mean squared reconstruction error."""
        return ((self.reconstruct(X) - X) ** 2).mean(axis=1)

    def loss(self, X: np.ndarray) -> float:
        return float(((self.reconstruct(X) - X) ** 2).mean())

    def gradients(self, X: np.ndarray) -> tuple[float, tuple[np.ndarray, ...]]:
        H = np.tanh(X @ self.W1 + self.b1)
        R = H @ self.W2 + self.b2 - X
        loss = float((R**2).mean())
        dY = 2.0 * R / R.size
        dW2 = H.T @ dY
        db2 = dY.sum(axis=0)
        dA = (dY @ self.W2.T) * (1.0 - H**2)
        dW1 = X.T @ dA
        db1 = dA.sum(axis=0)
        return loss, (dW1, db1, dW2, db2)

    def fit(self, X: np.ndarray, epochs: int, learning_rate: float) -> Autoencoder:
        for _ in range(epochs):
            loss, grads = self.gradients(X)
            self.history.append(loss)
            for p, g in zip(self.params, grads):
                p -= learning_rate * g
        self.history.append(self.loss(X))
        return self


def autoencoder_score(
    series: CountSeries, w: WindowSpec = WindowSpec(), spec: AutoencoderSpec = AutoencoderSpec()
) -> ScoreSeries:
    """Reconstruction error of each trailing window under a model fitted on the clean prefix."""
    m = w.width
    if spec.hidden >= m:
        raise ValueError("hidden size must be smaller than the window width")
    n = len(series)
    end = train_end(n, spec.train_fraction)
    if end < 10 * m:
        raise ValueError(f"training prefix of {end} steps is shorter than 10 windows")

    X = windows(series.values, m)
    n_train = end - m + 1
    train = X[:n_train][clean_windows(series, m)[:n_train]]
    if train.shape[0] == 0:
        train = X[:n_train]
    mu = float(train.mean())
    sd = max(float(train.std()), STD_FLOOR)

    rng = np.random.default_rng(spec.seed)
    model = Autoencoder.init(m, spec.hidden, rng).fit(
        (train - mu) / sd, spec.epochs, spec.learning_rate
    )
    scores = np.zeros(n)
    scores[m - 1 :] = model.errors((X - mu) / sd)
    return ScoreSeries(scores, valid_from=m - 1)
