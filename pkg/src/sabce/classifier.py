"""One-hidden-layer ReLU/softmax classifier and Euclidean k-NN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .network import glorot_bound
from .numerics import make_rng
from .optimizer import AdamState, adam_step


@dataclass(frozen=True)
class AnnConfig:
    hidden_grid: tuple[int, ...] = (10, 25, 50, 100)
    learning_rate: float = 0.01
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_grid", tuple(int(h) for h in self.hidden_grid))
        if not self.hidden_grid or min(self.hidden_grid) < 1:
            raise ConfigError("hidden_grid needs widths >= 1")


class SoftmaxMLP:
    """x -> relu(x W1 + b1) W2 + b2 -> softmax, trained with full-batch Adam on
    mean cross-entropy."""

    def __init__(self, n_in: int, hidden: int, n_classes: int, seed: int = 0):
        rng = make_rng(seed)
        self.shapes = [(n_in, hidden), (hidden,), (hidden, n_classes), (n_classes,)]
        b1, b2 = glorot_bound(n_in, hidden), glorot_bound(hidden, n_classes)
        self.theta = np.concatenate([
            rng.uniform(-b1, b1, n_in * hidden), np.zeros(hidden),
            rng.uniform(-b2, b2, hidden * n_classes), np.zeros(n_classes)])

    def _unpack(self, theta):
        out, pos = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            out.append(theta[pos:pos + size].reshape(shape))
            pos += size
        return out

    def logits(self, x, theta=None):
        w1, b1, w2, b2 = self._unpack(self.theta if theta is None else theta)
        return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2

    def loss_and_grad(self, x, y, theta=None):
        theta = self.theta if theta is None else theta
        w1, b1, w2, b2 = self._unpack(theta)
        n = x.shape[0]
        z1 = x @ w1 + b1
        h = np.maximum(z1, 0.0)
        s = h @ w2 + b2
        s = s - s.max(axis=1, keepdims=True)
        p = np.exp(s)
        p /= p.sum(axis=1, keepdims=True)
        loss = -float(np.mean(np.log(p[np.arange(n), y] + 1e-300)))
        ds = p
        ds[np.arange(n), y] -= 1.0
        ds /= n
        gw2 = h.T @ ds
        gb2 = ds.sum(axis=0)
        dz1 = (ds @ w2.T) * (z1 > 0)
        gw1 = x.T @ dz1
        gb1 = dz1.sum(axis=0)
        return loss, np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])

    def fit(self, x, y, epochs: int, learning_rate: float):
        state = AdamState.zeros(self.theta.size, learning_rate)
        for epoch in range(epochs):
            loss, g = self.loss_and_grad(x, y)
            if not np.isfinite(loss):
                raise NumericalError(f"classifier diverged at epoch {epoch}")
            self.theta, state = adam_step(self.theta, g, state)
        return self

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1)


def accuracy(pred, labels) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(labels)))


@dataclass(frozen=True)
class AnnResult:
    accuracy: float
    hidden_units: int
    validation_accuracy: float


def ann_classify(train, validation, test, cfg: AnnConfig = AnnConfig(), n_classes=None) -> AnnResult:
    """Pick H on ``validation`` and report test accuracy of that network.

    ``train``/``validation``/``test`` are Datasets restricted to the same
    feature columns. When ``validation`` is None or empty, 20% of ``train``
    (stratified) is held out to choose H and the final network is refit on
    all of ``train``.
    """
    from .data import SplitSpec, split_indices

    m = n_classes or train.n_classes
    refit = validation is None or validation.n == 0
    fit_set, val_set = train, validation
    if refit:
        tr, va, _ = split_indices(train.labels, SplitSpec((0.8, 0.2, 0.0), True, cfg.seed))
        fit_set, val_set = train.subset(tr), train.subset(va)

    best = None
    for h in cfg.hidden_grid:
        net = SoftmaxMLP(train.d, h, m, cfg.seed).fit(fit_set.x, fit_set.labels,
                                                      cfg.epochs, cfg.learning_rate)
        acc = accuracy(net.predict(val_set.x), val_set.labels)
        if best is None or acc > best[0]:
            best = (acc, h, net)
    val_acc, h, net = best
    if refit:
        net = SoftmaxMLP(train.d, h, m, cfg.seed).fit(train.x, train.labels,
                                                      cfg.epochs, cfg.learning_rate)
    return AnnResult(accuracy(net.predict(test.x), test.labels), h, val_acc)


def knn_predict(train_x, train_labels, test_x, k: int) -> np.ndarray:
    """Euclidean k-NN majority vote.

    Equidistant neighbours are taken in training-row order; tied votes go to
    the smallest class index.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    test_x = np.atleast_2d(np.asarray(test_x, dtype=np.float64))
    train_labels = np.asarray(train_labels)
    if not 1 <= k <= train_x.shape[0]:
        raise ConfigError(f"k={k} must be in 1..{train_x.shape[0]}")
    if train_x.shape[1] != test_x.shape[1]:
        raise ConfigError("train and test dimensionality differ")
    n_classes = int(train_labels.max()) + 1
    out = np.empty(test_x.shape[0], dtype=np.int64)
    chunk = max(1, 2_000_000 // max(1, train_x.size))
    for start in range(0, test_x.shape[0], chunk):
        block = test_x[start:start + chunk]
        diff = block[:, None, :] - train_x[None, :, :]
        dist = np.einsum("tnd,tnd->tn", diff, diff)
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        for r, idx in enumerate(nearest):
            votes = np.bincount(train_labels[idx], minlength=n_classes)
            out[start + r] = int(np.argmax(votes))
    return out


def knn_classify(train, test, k: int = 5) -> np.ndarray:
    return knn_predict(train.x, train.labels, test.x, k)
