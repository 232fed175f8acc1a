"""Mini-batch gradient descent on the weighted multi-task objective."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .loss import (
    ClassDistribution,
    LabeledDataset,
    adapted_weights,
    attribute_accuracy,
    classify,
    compute_distribution,
    mean_accuracy,
)
from .network import MicroNetwork, backprop, forward

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) in epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    """Defaults follow the full-scale schedule; desk runs override most of them."""

    batch_size: int = 384
    initial_lr: float = 0.05
    lr_decay_factor: float = 0.8
    decay_every_epochs: int = 4
    min_lr: float = 1e-6
    epochs: int = 110
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.initial_lr <= 0 or self.min_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 < self.lr_decay_factor < 1:
            raise ValueError("lr_decay_factor must lie in (0, 1)")
        if self.decay_every_epochs < 1:
            raise ValueError("decay_every_epochs must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")

    def learning_rate(self, epoch: int) -> float:
        """Rate used during zero-based ``epoch``."""
        lr = self.initial_lr * self.lr_decay_factor ** (epoch // self.decay_every_epochs)
        return max(lr, self.min_lr)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    loss: float  # mean per-sample weighted loss over the epoch
    average_accuracy: float  # on the training data after the epoch


def train(
    net: MicroNetwork,
    data: LabeledDataset,
    target: ClassDistribution | None = None,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[MicroNetwork, list[EpochRecord]]:
    """Train a copy of ``net``; ``net`` itself is left untouched.

    Class weights are computed once from the training labels and ``target``
    (balanced when omitted).  Passing the training distribution itself as
    ``target`` gives unit weights, i.e. plain squared error.
    """
    if data.n_features != net.n_inputs or data.n_attributes != net.n_outputs:
        raise ValueError(
            f"data is {data.n_features} -> {data.n_attributes}, "
            f"network is {net.n_inputs} -> {net.n_outputs}"
        )
    model = net.copy()
    trace: list[EpochRecord] = []
    if cfg.epochs == 0:
        return model, trace

    train_dist = compute_distribution(data.labels, strict=True)
    if target is None:
        target = ClassDistribution.balanced(data.n_attributes)
    weights = adapted_weights(train_dist, target)
    rng = np.random.default_rng(cfg.rng_seed)

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            trace.append(_run_epoch(model, data, weights, cfg, epoch, rng))
    return model, trace


def _run_epoch(model, data, weights, cfg, epoch, rng) -> EpochRecord:
    lr = cfg.learning_rate(epoch)
    m = len(data)
    order = rng.permutation(m)
    total = 0.0
    for start in range(0, m, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        loss, gw, gb = backprop(model, data.inputs[idx], data.labels[idx], weights)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        total += loss
        for k in range(len(model.weights)):
            model.weights[k] -= lr * gw[k]
            model.biases[k] -= lr * gb[k]
    if not all(np.all(np.isfinite(p)) for p in model.parameters()):
        raise DivergenceError(epoch, float("nan"))
    acc = average_accuracy(model, data)
    log.debug("epoch %d lr %.3g loss %.6g acc %.4f", epoch, lr, total / m, acc)
    return EpochRecord(epoch, lr, total / m, acc)


def predict(net: MicroNetwork, inputs) -> np.ndarray:
    return classify(forward(net, inputs))


def per_attribute_accuracy(net: MicroNetwork, testset: LabeledDataset) -> np.ndarray:
    if len(testset) == 0:
        raise ValueError("empty test set")
    return attribute_accuracy(forward(net, testset.inputs), testset.labels)


def average_accuracy(net: MicroNetwork, testset: LabeledDataset) -> float:
    return mean_accuracy(per_attribute_accuracy(net, testset))


def trace_to_csv(trace: list[EpochRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["epoch", "lr", "loss", "average_accuracy"], lineterminator="\n")
    writer.writeheader()
    for rec in trace:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(rec).items()})
    return buf.getvalue()


def synthetic_attribute_data(
    n_samples: int,
    positive_fraction,
    features_per_attribute: int = 2,
    separation: float = 1.0,
    seed: int | np.random.Generator = 0,
) -> LabeledDataset:
    """Class-conditional Gaussian data, one feature block per attribute.

    Attribute ``i`` is +1 with probability ``positive_fraction[i]``; its block
    of features is drawn from ``N(y * separation, I)``.  Blocks are independent,
    so each attribute can be skewed or balanced on its own.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    frac = np.atleast_1d(np.asarray(positive_fraction, dtype=np.float64))
    n_attr = frac.shape[0]
    labels = np.where(rng.random((n_samples, n_attr)) < frac, 1, -1)
    means = np.repeat(labels * separation, features_per_attribute, axis=1)
    inputs = means + rng.standard_normal((n_samples, n_attr * features_per_attribute))
    return LabeledDataset(inputs, labels)


def exact_fraction_data(
    n_samples: int,
    positive_fraction,
    features_per_attribute: int = 2,
    separation: float = 1.0,
    seed: int | np.random.Generator = 0,
) -> LabeledDataset:
    """Like :func:`synthetic_attribute_data` but with exactly ``round(f * M)`` positives per attribute."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    frac = np.atleast_1d(np.asarray(positive_fraction, dtype=np.float64))
    cols = []
    for f in frac:
        k = int(round(f * n_samples))
        col = np.array([1] * k + [-1] * (n_samples - k))
        cols.append(rng.permutation(col))
    labels = np.stack(cols, axis=1)
    means = np.repeat(labels * separation, features_per_attribute, axis=1)
    inputs = means + rng.standard_normal((n_samples, frac.shape[0] * features_per_attribute))
    return LabeledDataset(inputs, labels)
