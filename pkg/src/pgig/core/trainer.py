# -*- coding: utf-8 -*-
"""
Synthetic image task and classifier training for pgig.

Images are side x side grids in [-1, 1]. Each class draws a shape
template (see templates.py) on a dark background; a structured
distractor is added on top:

    image = clip(template + eps * D + noise, -1, 1)

with one shared eps ~ N(0, shared_sigma^2) per image along a fixed
horizontal ramp D, and i.i.d. per-pixel noise. This module provides:
- Task generation with class-balanced, seeded splits
- Glorot-initialised dense softmax classifiers
- Minibatch SGD on cross-entropy (best validation network is kept)
- Pattern fitting on the training split
- CSV persistence of the splits (label, flattened pixels)
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from pgig.core.network import (
    Activation,
    Layer,
    Network,
    OutputMode,
    forward,
    parameter_gradients,
)
from pgig.core.patterns import (
    ExpectationScope,
    PatternSet,
    attach_patterns,
    collect_batch,
    estimate_patterns,
)
from pgig.core.templates import load_templates, render_template
from pgig.core.tensor import RandomSource, Tensor, gaussian
from pgig.utils.errors import ArgumentError, ConfigError, DimensionError, TrainingError
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_CLASSES = ("horizontal_bar", "vertical_bar", "cross", "diagonal")
SPLIT_NAMES = ("train", "val", "test")

Labels = npt.NDArray[np.int64]


@dataclass
class SyntheticImageTask:
    """Settings of the synthetic image classification task."""

    side: int = 16
    classes: Tuple[str, ...] = DEFAULT_CLASSES
    signal_level: float = 0.6  # template pixels
    background: float = -0.4
    shared_sigma: float = 0.4  # distractor amplitude along the ramp
    pixel_sigma: float = 0.2
    train_size: int = 2000
    val_size: int = 500
    test_size: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.side < 2:
            raise ArgumentError(f"side must be >= 2, got {self.side}")
        self.classes = tuple(self.classes)
        if len(self.classes) < 2:
            raise ArgumentError("the task needs at least two classes")
        if self.shared_sigma < 0 or self.pixel_sigma < 0:
            raise ArgumentError("noise levels must be >= 0")
        for name in ("train_size", "val_size", "test_size"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")
        for level in (self.signal_level, self.background):
            if not -1.0 <= level <= 1.0:
                raise ArgumentError(f"pixel levels must lie in [-1, 1], got {level}")

    @property
    def input_dim(self) -> int:
        """Length of a flattened image."""
        return self.side * self.side

    @property
    def num_classes(self) -> int:
        """Number of classes."""
        return len(self.classes)


@dataclass(eq=False)
class LabeledImages:
    """Flattened images (N x side^2) with integer labels."""

    images: Tensor
    labels: Labels

    def __post_init__(self) -> None:
        if self.images.ndim != 2 or self.labels.shape != (self.images.shape[0],):
            raise DimensionError("images and labels do not match",
                                 self.images.shape, self.labels.shape)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(eq=False)
class TaskSplits:
    """Train / validation / test splits of one task."""

    task: SyntheticImageTask
    train: LabeledImages
    val: LabeledImages
    test: LabeledImages

    def split(self, name: str) -> LabeledImages:
        """Look up a split by name."""
        if name not in SPLIT_NAMES:
            raise ArgumentError(f"unknown split '{name}'; valid splits: {', '.join(SPLIT_NAMES)}")
        result: LabeledImages = getattr(self, name)
        return result


@dataclass
class TrainConfig:
    """Classifier shape and SGD hyperparameters."""

    hidden_sizes: List[int] = field(default_factory=lambda: [64, 32])
    learning_rate: float = 0.05
    epochs: int = 15
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        self.hidden_sizes = [int(h) for h in self.hidden_sizes]
        if any(h < 1 for h in self.hidden_sizes):
            raise ArgumentError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if self.learning_rate < 0:
            raise ArgumentError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(eq=False)
class TrainResult:
    """Outcome of a training run."""

    network: Network
    best_epoch: int  # 0 means the initial network was never beaten
    val_accuracy: float
    history: List[Dict[str, float]] = field(default_factory=list)


@dataclass(eq=False)
class FitReport:
    """Patterns fitted to a trained network."""

    network: Network
    pattern_set: PatternSet
    examples: int

    @property
    def invalid_count(self) -> int:
        """Neurons without a usable pattern."""
        return self.pattern_set.invalid_count

    def invalid_per_layer(self) -> List[int]:
        """Invalid neuron count for every layer."""
        return self.pattern_set.invalid_per_layer()


# ---------------------------------------------------------------------------
# Task generation
# ---------------------------------------------------------------------------


def distractor_direction(side: int) -> Tensor:
    """Horizontal ramp from -1 (left column) to +1 (right column), flattened."""
    ramp = np.linspace(-1.0, 1.0, side, dtype=np.float64)
    result: Tensor = np.tile(ramp, (side, 1)).reshape(-1)
    return result


def class_templates(task: SyntheticImageTask) -> Tensor:
    """
    Noise-free image of every class (num_classes x side^2).

    Raises:
        ArgumentError: If a class names an unknown template
    """
    templates = load_templates()
    rows = []
    for name in task.classes:
        if name not in templates:
            raise ArgumentError(
                f"unknown class template '{name}'; available: {', '.join(templates)}"
            )
        mask = render_template(templates[name], task.side).reshape(-1)
        rows.append(np.where(mask, task.signal_level, task.background))
    return np.stack(rows).astype(np.float64)


def _balanced_labels(n: int, num_classes: int, rng: RandomSource) -> Labels:
    labels = np.arange(n, dtype=np.int64) % num_classes
    return labels[rng.permutation(n)]


def _generate_split(
    task: SyntheticImageTask, size: int, prototypes: Tensor, ramp: Tensor, rng: RandomSource
) -> LabeledImages:
    labels = _balanced_labels(size, task.num_classes, rng)
    eps = gaussian(rng, 0.0, task.shared_sigma, size)
    noise = gaussian(rng, 0.0, task.pixel_sigma, size * task.input_dim).reshape(size, -1)
    images = prototypes[labels] + eps[:, None] * ramp[None, :] + noise
    return LabeledImages(np.clip(images, -1.0, 1.0), labels)


def generate_task(task: SyntheticImageTask, rng: Optional[RandomSource] = None) -> TaskSplits:
    """
    Generate the train/val/test splits.

    Every split draws from its own child stream of rng, so a split does
    not depend on the sizes of the others.

    Args:
        task: Task settings
        rng: Random stream (default: RandomSource(task.seed))

    Returns:
        TaskSplits: Class-balanced labeled images

    Example:
        >>> splits = generate_task(SyntheticImageTask(shared_sigma=0, pixel_sigma=0))
        >>> first = class_templates(splits.task)[splits.train.labels[0]]
        >>> bool((splits.train.images[0] == first).all())
        True
    """
    rng = rng or RandomSource(task.seed)
    prototypes = class_templates(task)
    ramp = distractor_direction(task.side)
    sizes = {"train": task.train_size, "val": task.val_size, "test": task.test_size}

    splits = {
        name: _generate_split(task, sizes[name], prototypes, ramp, rng.spawn(index))
        for index, name in enumerate(SPLIT_NAMES)
    }
    logger.info("generated task: %s", ", ".join(f"{k}={len(v)}" for k, v in splits.items()))
    return TaskSplits(task=task, **splits)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def glorot_layer(fan_in: int, fan_out: int, activation: Activation, rng: RandomSource) -> Layer:
    """Weights uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out)); zero bias."""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    weights = rng.uniform(fan_out * fan_in, -r, r).reshape(fan_out, fan_in)
    return Layer(weights, np.zeros(fan_out), activation)


def init_network(input_dim: int, num_classes: int, cfg: TrainConfig) -> Network:
    """ReLU hidden layers, a linear output layer and a softmax."""
    rng = RandomSource(cfg.seed)
    sizes = [input_dim] + cfg.hidden_sizes
    layers = [glorot_layer(sizes[k], sizes[k + 1], Activation.RELU, rng.spawn(k))
              for k in range(len(cfg.hidden_sizes))]
    layers.append(glorot_layer(sizes[-1], num_classes, Activation.LINEAR,
                               rng.spawn(len(cfg.hidden_sizes))))
    return Network(layers, OutputMode.SOFTMAX)


def _copy_network(net: Network) -> Network:
    return Network([Layer(layer.weights.copy(), layer.bias.copy(), layer.activation)
                    for layer in net.layers], net.output_mode)


def cross_entropy(logits: Tensor, label: int) -> float:
    """-log softmax(logits)[label], computed through log-sum-exp."""
    shift = float(np.max(logits))
    log_norm = shift + float(np.log(np.sum(np.exp(logits - shift))))
    return log_norm - float(logits[label])


def accuracy(net: Network, data: LabeledImages) -> float:
    """Fraction of correctly classified examples."""
    hits = sum(int(np.argmax(forward(net, x).output)) == int(y)
               for x, y in zip(data.images, data.labels))
    return hits / len(data)


def batch_gradients(
    net: Network, data: LabeledImages, indices: Sequence[int]
) -> Tuple[float, List[Tuple[Tensor, Tensor]]]:
    """
    Summed cross-entropy and its parameter gradients over a minibatch.

    Args:
        net: Softmax classifier
        data: Examples the indices refer to
        indices: Minibatch rows, accumulated in this order

    Returns:
        Tuple[float, List[Tuple[Tensor, Tensor]]]: Loss sum and one
            (d_weights, d_bias) pair per layer
    """
    d_weights = [np.zeros_like(layer.weights) for layer in net.layers]
    d_bias = [np.zeros_like(layer.bias) for layer in net.layers]
    loss_sum = 0.0

    for i in indices:
        trace = forward(net, data.images[i])
        label = int(data.labels[i])
        loss_sum += cross_entropy(trace.logits, label)

        logit_grad = trace.output.copy()
        logit_grad[label] -= 1.0
        for k, (g_w, g_b) in enumerate(parameter_gradients(net, trace, logit_grad)):
            d_weights[k] += g_w
            d_bias[k] += g_b

    return loss_sum, list(zip(d_weights, d_bias))


def train_with_history(
    task: TaskSplits, cfg: TrainConfig, net: Optional[Network] = None
) -> TrainResult:
    """
    Minibatch SGD on the mean cross-entropy of each batch.

    Examples are visited in a per-epoch permutation; batch gradients are
    accumulated in that fixed order, so a seed reproduces the weights
    bit-exactly. The network with the best validation accuracy is
    returned (earliest epoch on ties; epoch 0 is the initialisation).

    Args:
        task: Generated splits
        cfg: Training settings
        net: Starting network (default: init_network from cfg)

    Returns:
        TrainResult: Best network, its epoch and the per-epoch history

    Raises:
        TrainingError: If the loss becomes NaN or infinite
    """
    train_set = task.train
    net = _copy_network(net) if net is not None else \
        init_network(task.task.input_dim, task.task.num_classes, cfg)
    if net.output_mode is not OutputMode.SOFTMAX:
        raise ArgumentError("training needs a network with softmax output")

    rng = RandomSource(cfg.seed).spawn(1000)
    best = _copy_network(net)
    best_acc = accuracy(net, task.val)
    best_epoch = 0
    history: List[Dict[str, float]] = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        total_loss = 0.0

        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, sums = batch_gradients(net, train_set, batch)
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch)
            total_loss += loss

            scale = cfg.learning_rate / len(batch)
            for layer, (d_w, d_b) in zip(net.layers, sums):
                layer.weights -= scale * d_w
                layer.bias -= scale * d_b

        mean_loss = total_loss / len(train_set)
        if not np.isfinite(mean_loss):
            raise TrainingError("loss is not finite", epoch)
        val_acc = accuracy(net, task.val)
        history.append({"epoch": float(epoch), "loss": mean_loss, "val_accuracy": val_acc})
        logger.info("epoch %d: loss %.4f, val accuracy %.3f", epoch, mean_loss, val_acc)

        if val_acc > best_acc:
            best, best_acc, best_epoch = _copy_network(net), val_acc, epoch

    logger.info("best validation accuracy %.3f at epoch %d", best_acc, best_epoch)
    return TrainResult(best, best_epoch, best_acc, history)


def train(task: TaskSplits, cfg: TrainConfig, net: Optional[Network] = None) -> Network:
    """Train a classifier and return the best-validation network."""
    return train_with_history(task, cfg, net).network


def fit_patterns(
    net: Network,
    data: Union[LabeledImages, Tensor],
    scope: ExpectationScope = ExpectationScope.POSITIVE_REGIME,
) -> FitReport:
    """
    Estimate patterns over a dataset (usually the training split) and attach them.

    Returns:
        FitReport: Network with patterns, the PatternSet and the example count
    """
    images = data.images if isinstance(data, LabeledImages) else data
    batch = collect_batch(net, images)
    pattern_set = estimate_patterns(batch, net, scope)
    if pattern_set.invalid_count:
        logger.warning("%d neuron(s) without a valid pattern (per layer: %s)",
                       pattern_set.invalid_count, pattern_set.invalid_per_layer())
    return FitReport(attach_patterns(net, pattern_set), pattern_set, batch.size)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_split_csv(data: LabeledImages, path: Union[str, Path]) -> str:
    """Write a split as CSV: label, p0, p1, ... (LF line endings)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label"] + [f"p{i}" for i in range(data.images.shape[1])])
        for image, label in zip(data.images, data.labels):
            writer.writerow([int(label)] + [repr(float(v)) for v in image])
    return str(path)


def load_split_csv(path: Union[str, Path]) -> LabeledImages:
    """
    Read a split written by save_split_csv.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: On malformed rows (with line number)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")

    images: List[List[float]] = []
    labels: List[int] = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "label":
            raise ConfigError("missing 'label' header", str(path), 1)
        width = len(header) - 1
        for row in reader:
            if not row:
                continue
            if len(row) != width + 1:
                raise ConfigError(f"expected {width + 1} fields, got {len(row)}",
                                  str(path), reader.line_num)
            try:
                labels.append(int(row[0]))
                images.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise ConfigError(str(e), str(path), reader.line_num) from e

    if not labels:
        raise ConfigError("dataset has no rows", str(path))
    return LabeledImages(np.array(images, dtype=np.float64), np.array(labels, dtype=np.int64))


def save_task(splits: TaskSplits, out_dir: Union[str, Path]) -> List[str]:
    """Write train.csv, val.csv and test.csv."""
    out = Path(out_dir)
    return [save_split_csv(splits.split(name), out / f"{name}.csv") for name in SPLIT_NAMES]


if __name__ == "__main__":
    splits = generate_task(SyntheticImageTask(train_size=400, val_size=100, test_size=100))
    result = train_with_history(splits, TrainConfig(epochs=3))
    print("=== pgig trainer ===\n")
    print(f"  best epoch: {result.best_epoch}, val accuracy: {result.val_accuracy:.3f}")
