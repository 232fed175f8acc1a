"""Class distributions, adapted class weights and the multi-task losses.

Each attribute/class pair gets a weight that grows when the class is rarer in
training than in the target distribution and shrinks when it is more common.
The weighted squared error over all attributes then replaces per-attribute
hinge losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateDistributionError(ValueError):
    """An attribute column holds a single label, so its class weights are undefined."""


@dataclass(frozen=True)
class LabeledDataset:
    """``inputs`` is M x D, ``labels`` is M x N with entries in {-1, +1}."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels)
        if inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D array (samples x features)")
        if labels.ndim != 2:
            raise ValueError("labels must be a 2-D array (samples x attributes)")
        if inputs.shape[0] != labels.shape[0]:
            raise ValueError(
                f"{inputs.shape[0]} inputs but {labels.shape[0]} label rows"
            )
        if not np.all(np.isin(labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_attributes(self) -> int:
        return self.labels.shape[1]

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(self.inputs[index], self.labels[index])

    def save(self, path) -> None:
        np.savez(path, inputs=self.inputs, labels=self.labels)

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        with np.load(path) as data:
            return cls(data["inputs"], data["labels"])


@dataclass(frozen=True)
class ClassDistribution:
    """Per-attribute fraction of positive and negative labels."""

    pos: np.ndarray
    neg: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.pos, dtype=np.float64)
        neg = np.asarray(self.neg, dtype=np.float64)
        if pos.shape != neg.shape or pos.ndim != 1:
            raise ValueError("pos and neg must be 1-D arrays of equal length")
        if np.any(pos < 0) or np.any(neg < 0):
            raise ValueError("fractions must be non-negative")
        if np.any(np.abs(pos + neg - 1.0) > 1e-12):
            raise ValueError("pos[i] + neg[i] must equal 1")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)

    def __len__(self) -> int:
        return self.pos.shape[0]

    @classmethod
    def from_positive(cls, pos) -> "ClassDistribution":
        pos = np.asarray(pos, dtype=np.float64)
        return cls(pos, 1.0 - pos)

    @classmethod
    def balanced(cls, n: int) -> "ClassDistribution":
        return cls.from_positive(np.full(n, 0.5))

    def require_nondegenerate(self) -> None:
        bad = np.flatnonzero((self.pos <= 0) | (self.pos >= 1))
        if bad.size:
            raise DegenerateDistributionError(
                f"attributes {bad.tolist()} have only one label class"
            )


def compute_distribution(labels, strict: bool = True) -> ClassDistribution:
    """Fraction of +1 labels per attribute column.

    ``labels`` may be a :class:`LabeledDataset` or an M x N label array.
    """
    if isinstance(labels, LabeledDataset):
        labels = labels.labels
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[0] < 1:
        raise ValueError("need at least one labelled sample")
    pos = np.count_nonzero(labels == 1, axis=0) / labels.shape[0]
    dist = ClassDistribution.from_positive(pos)
    if strict:
        dist.require_nondegenerate()
    return dist


@dataclass(frozen=True)
class AdaptedWeights:
    w_pos: np.ndarray
    w_neg: np.ndarray

    def __post_init__(self) -> None:
        w_pos = np.asarray(self.w_pos, dtype=np.float64)
        w_neg = np.asarray(self.w_neg, dtype=np.float64)
        if w_pos.shape != w_neg.shape or w_pos.ndim != 1:
            raise ValueError("w_pos and w_neg must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(w_pos)) and np.all(np.isfinite(w_neg))):
            raise ValueError("weights must be finite")
        if np.any(w_pos <= 0) or np.any(w_neg <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "w_pos", w_pos)
        object.__setattr__(self, "w_neg", w_neg)

    def __len__(self) -> int:
        return self.w_pos.shape[0]

    @classmethod
    def unit(cls, n: int) -> "AdaptedWeights":
        return cls(np.ones(n), np.ones(n))

    def for_labels(self, labels) -> np.ndarray:
        """Weight of the realised class for every entry of ``labels``."""
        labels = np.asarray(labels)
        if labels.shape[-1] != len(self):
            raise ValueError(
                f"labels have {labels.shape[-1]} attributes, weights have {len(self)}"
            )
        return np.where(labels > 0, self.w_pos, self.w_neg)


def adapted_weights(train: ClassDistribution, target: ClassDistribution) -> AdaptedWeights:
    """Per-class weights ``1 + (target - train) / (target + train)``.

    The denominator is the sum of the two fractions, exactly as the weighting
    is defined, not a normalised frequency ratio.
    """
    if len(train) != len(target):
        raise ValueError(
            f"train has {len(train)} attributes, target has {len(target)}"
        )
    w_pos = 1.0 + (target.pos - train.pos) / (target.pos + train.pos)
    w_neg = 1.0 + (target.neg - train.neg) / (target.neg + train.neg)
    return AdaptedWeights(w_pos, w_neg)


def _check_pair(outputs, labels) -> tuple[np.ndarray, np.ndarray]:
    outputs = np.asarray(outputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if outputs.shape != labels.shape:
        raise ValueError(f"outputs {outputs.shape} and labels {labels.shape} differ in shape")
    return outputs, labels


def weighted_loss(outputs, labels, weights: AdaptedWeights) -> float:
    """Weighted squared error summed over attributes (and over samples for a batch)."""
    outputs, labels = _check_pair(outputs, labels)
    w = weights.for_labels(labels)
    return float(np.sum(w * (outputs - labels) ** 2))


def loss_gradient(outputs, labels, weights: AdaptedWeights) -> np.ndarray:
    """d weighted_loss / d outputs, same shape as ``outputs``."""
    outputs, labels = _check_pair(outputs, labels)
    return 2.0 * weights.for_labels(labels) * (outputs - labels)


def hinge_loss(outputs, labels) -> float:
    outputs, labels = _check_pair(outputs, labels)
    return float(np.sum(np.maximum(0.0, 1.0 - labels * outputs)))


def classify(outputs) -> np.ndarray:
    """+1 where the decision value is strictly positive, -1 otherwise (zero included)."""
    return np.where(np.asarray(outputs) > 0, 1, -1).astype(np.int8)


def attribute_accuracy(predictions, labels) -> np.ndarray:
    """Per-attribute fraction of samples classified correctly.

    ``predictions`` may be raw decision values or ±1 labels; they are passed
    through :func:`classify` first, so a zero output counts as -1.
    """
    predictions = np.atleast_2d(np.asarray(predictions))
    labels = np.atleast_2d(np.asarray(labels))
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in shape")
    if predictions.shape[0] == 0:
        raise ValueError("empty test set")
    return np.mean(labels * classify(predictions) > 0, axis=0)


def mean_accuracy(per_attribute) -> float:
    return float(np.mean(np.asarray(per_attribute, dtype=np.float64)))
