"""A small fully connected network with a linear output layer.

Hidden layers use ``max(0, .)``; the output layer is affine so its values can
be compared to ±1 labels under squared error.  Weight matrices are stored
``fan_in x fan_out`` and applied as ``h @ W + b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .loss import AdaptedWeights, loss_gradient, weighted_loss

CHECKPOINT_FORMAT = "bystander-mlp"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class MicroNetwork:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("need at least input and output sizes, all positive")
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError(f"expected {n_layers} weight matrices and bias vectors")
        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.array(b, dtype=np.float64) for b in self.biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape}, expected {shape}")

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "MicroNetwork":
        sizes = tuple(layer_sizes)
        return cls(
            sizes,
            [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
            [np.zeros(b) for b in sizes[1:]],
        )

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: int | np.random.Generator = 0) -> "MicroNetwork":
        """Uniform init in ``±sqrt(6 / (fan_in + fan_out))``, zero biases."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        sizes = tuple(layer_sizes)
        weights = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (a + b))
            weights.append(rng.uniform(-limit, limit, size=(a, b)))
        return cls(sizes, weights, [np.zeros(b) for b in sizes[1:]])

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MicroNetwork":
        return MicroNetwork(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MicroNetwork):
            return NotImplemented
        return self.layer_sizes == other.layer_sizes and all(
            np.array_equal(p, q) for p, q in zip(self.parameters(), other.parameters())
        )


def _layer_passes(net: MicroNetwork, x: np.ndarray, start: int = 0):
    """Yield (pre_activation, activation) for layers ``start..`` given the layer input ``x``."""
    h = x
    last = len(net.weights) - 1
    for k in range(start, len(net.weights)):
        z = h @ net.weights[k] + net.biases[k]
        h = z if k == last else np.maximum(z, 0.0)
        yield z, h


def forward(net: MicroNetwork, x) -> np.ndarray:
    """Decision values for one input (length D) or a batch (M x D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_inputs:
        raise ValueError(f"input has dimension {x.shape[-1]}, network expects {net.n_inputs}")
    h = x
    for _, h in _layer_passes(net, x):
        pass
    return h


def backprop(net: MicroNetwork, x, labels, weights: AdaptedWeights):
    """Summed weighted loss and its gradient for every parameter array.

    Returns ``(loss, grad_weights, grad_biases)``; works on a single sample or
    a batch, in which case the loss is summed over samples.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.atleast_2d(labels)
    inputs = [x]
    pre = []
    for z, h in _layer_passes(net, x):
        pre.append(z)
        inputs.append(h)
    out = inputs[-1]
    loss = weighted_loss(out, labels, weights)
    delta = loss_gradient(out, labels, weights)
    grad_w: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for k in range(len(net.weights) - 1, -1, -1):
        grad_w[k] = inputs[k].T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0)
    return loss, grad_w, grad_b


@dataclass
class GradientCheckResult:
    max_relative_error: float
    checked: int
    rejected: int
    worst: tuple[int, int] | None = field(default=None)  # (parameter array index, flat index)


def gradient_check_details(
    net: MicroNetwork,
    sample,
    weights: AdaptedWeights,
    step: float = 1e-4,
) -> GradientCheckResult:
    """Compare backprop gradients to central differences, parameter by parameter.

    A parameter is skipped when moving it by ``10 * step`` either way flips the
    on/off pattern of some hidden unit, i.e. it sits near a kink of the loss.
    Elsewhere the loss is smooth over the probed interval.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x, y = sample
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y).reshape(1, -1)
    _, grad_w, grad_b = backprop(net, x, y, weights)
    analytic = []
    for gw, gb in zip(grad_w, grad_b):
        analytic.extend((gw, gb))

    probe = net.copy()
    n_hidden = len(net.weights) - 1

    # input to every layer at the unperturbed parameters
    layer_inputs = [x]
    base_pre = []
    for z, h in _layer_passes(probe, x):
        base_pre.append(z)
        layer_inputs.append(h)

    def run_from(layer: int):
        pattern = []
        h = None
        for k, (z, h) in enumerate(_layer_passes(probe, layer_inputs[layer], layer), start=layer):
            if k < n_hidden:
                pattern.append(z > 0)
        return weighted_loss(h, y, weights), pattern

    worst_err = 0.0
    worst = None
    checked = rejected = 0
    params = probe.parameters()
    for p_idx, param in enumerate(params):
        layer = p_idx // 2
        base_pattern = [base_pre[k] > 0 for k in range(layer, n_hidden)]
        flat = param.reshape(-1)
        grad = analytic[p_idx].reshape(-1)
        margin = 10 * step
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + margin
            _, pat_p = run_from(layer)
            flat[j] = orig - margin
            _, pat_m = run_from(layer)
            if any(not np.array_equal(a, b) for a, b in zip(pat_p + pat_m, base_pattern + base_pattern)):
                flat[j] = orig
                rejected += 1
                continue
            flat[j] = orig + step
            lp, _ = run_from(layer)
            flat[j] = orig - step
            lm, _ = run_from(layer)
            flat[j] = orig
            numeric = (lp - lm) / (2 * step)
            err = abs(grad[j] - numeric) / max(1e-8, abs(grad[j]) + abs(numeric))
            checked += 1
            if err > worst_err:
                worst_err, worst = err, (p_idx, j)
    return GradientCheckResult(worst_err, checked, rejected, worst)


def gradient_check(net: MicroNetwork, sample, weights: AdaptedWeights, step: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients."""
    return gradient_check_details(net, sample, weights, step).max_relative_error


def save_checkpoint(net: MicroNetwork, path) -> None:
    """Write ``net`` as JSON: layer sizes, then W0, b0, W1, b1... flattened row-major.

    Floats are written with Python's shortest round-trip repr, so a reload is
    bit-exact.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "parameters": [p.reshape(-1).tolist() for p in net.parameters()],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> MicroNetwork:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a JSON checkpoint ({exc})") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    sizes = tuple(doc["layer_sizes"])
    params = doc["parameters"]
    if len(params) != 2 * (len(sizes) - 1):
        raise CheckpointError(f"{path}: expected {2 * (len(sizes) - 1)} parameter arrays")
    weights, biases = [], []
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        w, bias = params[2 * k], params[2 * k + 1]
        if len(w) != a * b or len(bias) != b:
            raise CheckpointError(f"{path}: layer {k} parameter count does not match sizes")
        weights.append(np.array(w, dtype=np.float64).reshape(a, b))
        biases.append(np.array(bias, dtype=np.float64))
    return MicroNetwork(sizes, weights, biases)
