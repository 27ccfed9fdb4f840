# -*- coding: utf-8 -*-
"""
Feedforward dense networks for pgig.

This module provides:
- Layer / Network containers (weights, biases, activation tags, patterns)
- Recorded forward passes (ForwardTrace)
- Three backward modes: standard gradient, guided, pattern-modified
- Parameter gradients for the trainer (same hand-written sweep)
- A versioned plain-text file format
"""

import dataclasses
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pgig.core.tensor import Tensor, as_tensor, matvec
from pgig.utils.errors import (
    ArgumentError,
    ConfigError,
    ConfigurationError,
    DimensionError,
    NumericError,
)
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

FORMAT_NAME = "pgig-network"
FORMAT_VERSION = 1


class Activation(Enum):
    """Activation applied after a dense layer."""

    LINEAR = "linear"
    RELU = "relu"


class OutputMode(Enum):
    """Transformation applied to the last layer's output."""

    RAW = "raw"
    SOFTMAX = "softmax"


class BackwardMode(Enum):
    """How gradients are propagated through the network."""

    STANDARD = "standard"
    GUIDED = "guided"
    PATTERN = "pattern"


@dataclass(eq=False)
class Layer:
    """A dense layer: activation(weights @ x + bias)."""

    weights: Tensor  # out x in
    bias: Tensor  # out
    activation: Activation = Activation.RELU
    pattern: Optional[Tensor] = None  # out x in, same shape as weights

    def __post_init__(self) -> None:
        self.weights = as_tensor(self.weights, "weights")
        if self.weights.ndim != 2:
            raise DimensionError("weights must be a matrix", self.weights.shape)
        self.bias = as_tensor(self.bias, "bias")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError("bias length must equal weights out-dimension",
                                 self.bias.shape, self.weights.shape)
        if not isinstance(self.activation, Activation):
            self.activation = Activation(self.activation)
        if self.pattern is not None:
            self.pattern = as_tensor(self.pattern, "pattern")
            if self.pattern.shape != self.weights.shape:
                raise DimensionError("pattern shape must equal weights shape",
                                     self.pattern.shape, self.weights.shape)

    @property
    def in_dim(self) -> int:
        """Input dimension."""
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        """Output dimension."""
        return int(self.weights.shape[0])


@dataclass(eq=False)
class Network:
    """An ordered stack of dense layers with an optional final softmax."""

    layers: List[Layer]
    output_mode: OutputMode = OutputMode.RAW

    def __post_init__(self) -> None:
        if not self.layers:
            raise ArgumentError("a network needs at least one layer")
        if not isinstance(self.output_mode, OutputMode):
            self.output_mode = OutputMode(self.output_mode)
        for k in range(1, len(self.layers)):
            previous, current = self.layers[k - 1], self.layers[k]
            if previous.out_dim != current.in_dim:
                raise DimensionError(f"layer {k} does not chain onto layer {k - 1}",
                                     previous.weights.shape, current.weights.shape)
        if self.output_mode is OutputMode.SOFTMAX and self.out_dim < 2:
            raise ArgumentError("softmax output needs at least two output units")

    @property
    def in_dim(self) -> int:
        """Input dimension of the first layer."""
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        """Output dimension of the last layer."""
        return self.layers[-1].out_dim

    @property
    def has_patterns(self) -> bool:
        """True if every layer carries a pattern."""
        return all(layer.pattern is not None for layer in self.layers)

    def with_patterns(self, patterns: Sequence[Optional[Tensor]]) -> "Network":
        """Return a copy with one pattern (or None) per layer."""
        if len(patterns) != len(self.layers):
            raise ArgumentError(f"expected {len(self.layers)} patterns, got {len(patterns)}")
        layers = [dataclasses.replace(layer, pattern=pattern)
                  for layer, pattern in zip(self.layers, patterns)]
        return Network(layers, self.output_mode)

    def without_patterns(self) -> "Network":
        """Return a copy with all patterns removed."""
        return self.with_patterns([None] * len(self.layers))


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Per-layer values recorded during one forward pass."""

    inputs: Tuple[Tensor, ...]
    pre_activations: Tuple[Tensor, ...]
    outputs: Tuple[Tensor, ...]
    output: Tensor  # after softmax when the network has softmax output

    @property
    def logits(self) -> Tensor:
        """Output of the last layer before any softmax."""
        return self.outputs[-1]


def softmax(logits: Tensor) -> Tensor:
    """Numerically stable softmax."""
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    result: Tensor = exp / np.sum(exp)
    return result


def forward(net: Network, x: Tensor) -> ForwardTrace:
    """
    Run a forward pass and record every layer.

    Args:
        net: Network to evaluate
        x: Input vector (length net.in_dim)

    Returns:
        ForwardTrace: Recorded inputs, pre-activations, outputs

    Raises:
        DimensionError: If x does not match the input dimension

    Example:
        >>> from pgig.core.stress import build_stress_model
        >>> forward(build_stress_model(), as_tensor([2.0, 0.0])).output
        array([1.])
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.in_dim,):
        raise DimensionError("input does not match the network", x.shape, (net.in_dim,))

    inputs: List[Tensor] = []
    pres: List[Tensor] = []
    outs: List[Tensor] = []

    current = x
    for layer in net.layers:
        inputs.append(current)
        pre = matvec(layer.weights, current) + layer.bias
        if layer.activation is Activation.RELU:
            post = np.maximum(pre, 0.0)
        else:
            post = pre
        pres.append(pre)
        outs.append(post)
        current = post

    output = softmax(current) if net.output_mode is OutputMode.SOFTMAX else current
    return ForwardTrace(tuple(inputs), tuple(pres), tuple(outs), output)


def predict(net: Network, x: Tensor) -> Tensor:
    """Network output for a single input."""
    return forward(net, x).output


def output_grad_seed(
    net: Network, trace: ForwardTrace, target: Optional[int], mode: BackwardMode
) -> Tensor:
    """
    Build the output gradient a backward pass starts from.

    Standard and guided passes start from a one-hot 1.0 at the target;
    pattern passes start from the target's output value (y-hat).

    Args:
        net: The network
        trace: Forward trace of the explained input
        target: Output index (optional for scalar outputs)
        mode: Backward mode the seed is for

    Returns:
        Tensor: Seed vector of length net.out_dim

    Raises:
        ArgumentError: If target is missing for a multi-output network or out of range
    """
    if target is None:
        if net.out_dim > 1:
            raise ArgumentError("a target class is required for multi-output networks")
        target = 0
    if not 0 <= target < net.out_dim:
        raise ArgumentError(f"target {target} out of range for {net.out_dim} outputs")

    seed = np.zeros(net.out_dim, dtype=np.float64)
    seed[target] = trace.output[target] if mode is BackwardMode.PATTERN else 1.0
    return seed


def _effective_weights(layer: Layer, index: int, mode: BackwardMode) -> Tensor:
    if mode is not BackwardMode.PATTERN:
        return layer.weights
    if layer.pattern is None:
        raise ConfigurationError(
            f"layer {index} has no pattern; pattern backward needs one per layer"
        )
    return layer.weights * layer.pattern


def _gate(layer: Layer, pre: Tensor, upstream: Tensor, mode: BackwardMode) -> Tensor:
    """Gradient w.r.t. the pre-activation given the gradient w.r.t. the output."""
    if layer.activation is Activation.LINEAR:
        return upstream
    if mode is BackwardMode.GUIDED:
        return np.where((pre > 0.0) & (upstream > 0.0), upstream, 0.0)
    # ReLU subgradient at exactly 0 is 0
    return np.where(pre > 0.0, upstream, 0.0)


def _softmax_vjp(probs: Tensor, seed: Tensor) -> Tensor:
    result: Tensor = probs * (seed - np.dot(probs, seed))
    return result


def backward(net: Network, trace: ForwardTrace, seed: Tensor, mode: BackwardMode) -> Tensor:
    """
    Propagate seed . output back to the input.

    Pattern mode swaps each layer's weights for weights * pattern during
    this sweep only; forward values in the trace are untouched. Biases
    never contribute to the input gradient. A softmax output is always
    differentiated with its true Jacobian.

    Args:
        net: The network the trace was recorded on
        trace: Forward trace
        seed: Output gradient (length net.out_dim)
        mode: Standard, guided or pattern

    Returns:
        Tensor: Gradient with respect to the input

    Raises:
        DimensionError: If seed length is wrong
        ConfigurationError: Pattern mode on a layer without pattern
    """
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != (net.out_dim,):
        raise DimensionError("seed does not match the output", seed.shape, (net.out_dim,))

    # Fail before doing any work
    weights = [_effective_weights(layer, k, mode) for k, layer in enumerate(net.layers)]

    grad = seed
    if net.output_mode is OutputMode.SOFTMAX:
        grad = _softmax_vjp(trace.output, grad)

    for k in reversed(range(len(net.layers))):
        grad = _gate(net.layers[k], trace.pre_activations[k], grad, mode)
        grad = matvec(weights[k].T, grad)

    return grad


def parameter_gradients(
    net: Network, trace: ForwardTrace, logit_grad: Tensor
) -> List[Tuple[Tensor, Tensor]]:
    """
    Gradients of a loss w.r.t. every weight matrix and bias vector.

    Args:
        net: The network
        trace: Forward trace of one example
        logit_grad: Gradient of the loss w.r.t. the last layer's output
            (before softmax)

    Returns:
        List of (d_weights, d_bias) per layer, in layer order
    """
    grads: List[Tuple[Tensor, Tensor]] = []
    grad = np.asarray(logit_grad, dtype=np.float64)
    for k in reversed(range(len(net.layers))):
        layer = net.layers[k]
        grad = _gate(layer, trace.pre_activations[k], grad, BackwardMode.STANDARD)
        grads.append((np.outer(grad, trace.inputs[k]), grad.copy()))
        if k > 0:
            grad = matvec(layer.weights.T, grad)
    grads.reverse()
    return grads


def describe(net: Network) -> str:
    """
    One line per layer summary.

    Example:
        >>> print(describe(build_stress_model()))
        layer 0: 2 -> 1 relu (pattern: no)
        layer 1: 1 -> 1 linear (pattern: no)
        output: raw
    """
    lines = [
        f"layer {k}: {layer.in_dim} -> {layer.out_dim} {layer.activation.value} "
        f"(pattern: {'yes' if layer.pattern is not None else 'no'})"
        for k, layer in enumerate(net.layers)
    ]
    lines.append(f"output: {net.output_mode.value}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Text format
#
#   pgig-network v1 layers=<L> output=<raw|softmax>
#   layer <k> in=<n> out=<m> activation=<relu|linear> pattern=<yes|no>
#   weights
#   <m rows of n values>
#   bias
#   <m values>
#   pattern            (only with pattern=yes)
#   <m rows of n values>
#
# Values are written with 17 significant digits so that reading them back
# gives the identical float64. Lines starting with '#' are comments.
# ---------------------------------------------------------------------------


def _fmt(values: Tensor) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def _generate_network_content(net: Network) -> str:
    lines = [f"{FORMAT_NAME} v{FORMAT_VERSION} layers={len(net.layers)} "
             f"output={net.output_mode.value}"]
    for k, layer in enumerate(net.layers):
        pattern = "yes" if layer.pattern is not None else "no"
        lines.append(f"layer {k} in={layer.in_dim} out={layer.out_dim} "
                     f"activation={layer.activation.value} pattern={pattern}")
        lines.append("weights")
        lines.extend(_fmt(row) for row in layer.weights)
        lines.append("bias")
        lines.append(_fmt(layer.bias))
        if layer.pattern is not None:
            lines.append("pattern")
            lines.extend(_fmt(row) for row in layer.pattern)
    return "\n".join(lines) + "\n"


def save_network(net: Network, path: Union[str, Path]) -> str:
    """
    Write a network (with patterns, if present) to a text file.

    Args:
        net: Network to save
        path: Destination file

    Returns:
        str: Path written

    Example:
        >>> save_network(build_stress_model(), "/tmp/stress.net")
        '/tmp/stress.net'
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_generate_network_content(net))
    logger.info("saved network to %s", path)
    return str(path)


class _LineReader:
    """Iterates non-comment lines while tracking line numbers for errors."""

    def __init__(self, text: str, path: str):
        self.path = path
        self._lines = [
            (number, line.strip())
            for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.strip().startswith("#")
        ]
        self._pos = 0
        self.line = 0

    def next(self, what: str) -> str:
        if self._pos >= len(self._lines):
            raise ConfigError(f"unexpected end of file, expected {what}", self.path, self.line)
        self.line, text = self._lines[self._pos]
        self._pos += 1
        return text

    def error(self, message: str) -> ConfigError:
        return ConfigError(message, self.path, self.line)

    def floats(self, count: int, what: str) -> List[float]:
        parts = self.next(what).split()
        if len(parts) != count:
            raise self.error(f"expected {count} values for {what}, found {len(parts)}")
        try:
            return [float(p) for p in parts]
        except ValueError as e:
            raise self.error(f"invalid number in {what}: {e}") from e

    def keyword(self, word: str) -> None:
        if self.next(word) != word:
            raise self.error(f"expected '{word}'")


def _parse_fields(reader: _LineReader, text: str, prefix: str) -> dict:
    parts = text.split()
    if not parts or parts[0] != prefix:
        raise reader.error(f"expected '{prefix}' line")
    fields = {}
    for part in parts[1:]:
        if "=" in part:
            key, value = part.split("=", 1)
            fields[key] = value
    return fields


def parse_network(text: str, path: str = "<string>") -> Network:
    """
    Parse the text format produced by save_network.

    Raises:
        ConfigError: With line number on any malformed content
    """
    reader = _LineReader(text, path)
    header = reader.next("header")
    parts = header.split()
    if len(parts) < 2 or parts[0] != FORMAT_NAME:
        raise reader.error(f"not a {FORMAT_NAME} file")
    if parts[1] != f"v{FORMAT_VERSION}":
        raise reader.error(f"unsupported format version {parts[1]}")
    fields = _parse_fields(reader, header, FORMAT_NAME)

    try:
        layer_count = int(fields["layers"])
        output_mode = OutputMode(fields.get("output", "raw"))
    except (KeyError, ValueError) as e:
        raise reader.error(f"invalid header: {e}") from e

    layers: List[Layer] = []
    for k in range(layer_count):
        meta = _parse_fields(reader, reader.next(f"layer {k}"), "layer")
        try:
            n_in, n_out = int(meta["in"]), int(meta["out"])
            activation = Activation(meta["activation"])
            has_pattern = meta.get("pattern", "no") == "yes"
        except (KeyError, ValueError) as e:
            raise reader.error(f"invalid layer header: {e}") from e

        reader.keyword("weights")
        weights = [reader.floats(n_in, f"layer {k} weights") for _ in range(n_out)]
        reader.keyword("bias")
        bias = reader.floats(n_out, f"layer {k} bias")
        pattern = None
        if has_pattern:
            reader.keyword("pattern")
            pattern = [reader.floats(n_in, f"layer {k} pattern") for _ in range(n_out)]

        try:
            layers.append(Layer(np.array(weights).reshape(n_out, n_in), np.array(bias),
                                activation, None if pattern is None
                                else np.array(pattern).reshape(n_out, n_in)))
        except (DimensionError, NumericError, ValueError) as e:
            raise reader.error(str(e)) from e

    try:
        return Network(layers, output_mode)
    except (ArgumentError, DimensionError) as e:
        raise reader.error(str(e)) from e


def load_network(path: Union[str, Path]) -> Network:
    """
    Load a network saved with save_network.

    Args:
        path: File to read

    Returns:
        Network: The network, patterns included

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the file is malformed
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"network file not found: {path}")
    net = parse_network(path.read_text(encoding="utf-8"), str(path))
    logger.debug("loaded network from %s:\n%s", path, describe(net))
    return net
