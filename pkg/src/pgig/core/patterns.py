# -*- coding: utf-8 -*-
"""
Pattern estimation for pgig.

A pattern row p_j for neuron j with weight row w_j is

    a   = E+[x * y_j] - E+[x] * E[y_j]
    p_j = a / (w_j . a)

where x is the layer input, y_j the neuron's pre-activation and E+ the
mean over the examples for which w_j . x + b_j > 0. A linear layer has
no gate, so its regime is every example and E+ is the plain mean.
This module provides:
- Recording layer inputs/pre-activations over a dataset (collect_batch)
- Estimating per-layer patterns with validity flags (estimate_patterns)
- Attaching a PatternSet to a network
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from pgig.core.network import Activation, Network, forward
from pgig.core.tensor import Tensor
from pgig.utils.errors import ArgumentError, DimensionError
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

# Denominators below this are treated as zero
DENOMINATOR_TOLERANCE = 1e-12
# w_j and a_j closer to orthogonal than this leave the direction undefined
ORTHOGONALITY_TOLERANCE = 1e-6


class ExpectationScope(Enum):
    """Set of examples the output mean E[y] is taken over."""

    POSITIVE_REGIME = "positive"
    FULL_BATCH = "full"


@dataclass(eq=False)
class LayerBatch:
    """Recorded inputs and pre-activations of one layer."""

    inputs: Tensor  # N x in
    pre_activations: Tensor  # N x out


@dataclass(eq=False)
class PatternBatch:
    """Per-layer recordings over a dataset."""

    layers: List[LayerBatch]

    @property
    def size(self) -> int:
        """Number of recorded examples."""
        return int(self.layers[0].inputs.shape[0]) if self.layers else 0


@dataclass(eq=False)
class PatternSet:
    """Estimated patterns, one matrix per layer, with per-neuron validity."""

    patterns: List[Tensor]  # out x in per layer; invalid rows are zero
    valid: List[npt.NDArray[np.bool_]]  # out per layer

    @property
    def invalid_count(self) -> int:
        """Number of neurons without a usable pattern."""
        return int(sum(np.count_nonzero(~v) for v in self.valid))

    def invalid_per_layer(self) -> List[int]:
        """Invalid neuron count for every layer."""
        return [int(np.count_nonzero(~v)) for v in self.valid]


def _stack_dataset(dataset: Union[Tensor, Sequence[Tensor]]) -> Tensor:
    if isinstance(dataset, np.ndarray):
        data = np.asarray(dataset, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(1, -1)
        return data
    if len(dataset) == 0:
        raise ArgumentError("dataset is empty")
    return np.stack([np.asarray(x, dtype=np.float64) for x in dataset])


def collect_batch(net: Network, dataset: Union[Tensor, Sequence[Tensor]]) -> PatternBatch:
    """
    Record every layer's input and pre-activation over a dataset.

    Examples are processed in index order.

    Args:
        net: Network to run
        dataset: Inputs, either a list of vectors or an (N x in) array

    Returns:
        PatternBatch: One LayerBatch per layer

    Raises:
        ArgumentError: If the dataset is empty
        DimensionError: If inputs do not match the network

    Example:
        >>> batch = collect_batch(net, [np.array([1.0, 2.0]), np.array([3.0, 4.0])])
        >>> batch.size
        2
    """
    data = _stack_dataset(dataset)
    if data.shape[0] == 0:
        raise ArgumentError("dataset is empty")
    if data.shape[1] != net.in_dim:
        raise DimensionError("dataset does not match the network input", data.shape, (net.in_dim,))

    inputs: List[List[Tensor]] = [[] for _ in net.layers]
    pres: List[List[Tensor]] = [[] for _ in net.layers]

    for x in data:
        trace = forward(net, x)
        for k in range(len(net.layers)):
            inputs[k].append(trace.inputs[k])
            pres[k].append(trace.pre_activations[k])

    return PatternBatch([LayerBatch(np.stack(i), np.stack(p)) for i, p in zip(inputs, pres)])


def _output_mean(
    y: Tensor, mask: npt.NDArray[np.bool_], counts: Tensor, scope: ExpectationScope
) -> Tensor:
    """E[y] per neuron; the one place the expectation set for y is chosen."""
    if scope is ExpectationScope.FULL_BATCH:
        result: Tensor = y.mean(axis=0)
        return result
    safe = np.where(counts > 0, counts, 1.0)
    return (y * mask).sum(axis=0) / safe


def estimate_layer(
    weights: Tensor,
    layer_batch: LayerBatch,
    scope: ExpectationScope = ExpectationScope.POSITIVE_REGIME,
    activation: Activation = Activation.RELU,
) -> Tuple[Tensor, npt.NDArray[np.bool_]]:
    """
    Estimate the pattern matrix of one layer.

    Args:
        weights: Layer weights (out x in)
        layer_batch: Recorded inputs (N x in) and pre-activations (N x out)
        scope: Example set for E[y]
        activation: RELU gates on y > 0; LINEAR uses every example

    Returns:
        (patterns, valid): out x in matrix and out-length validity mask
    """
    x = layer_batch.inputs
    y = layer_batch.pre_activations
    if activation is Activation.RELU:
        mask = y > 0.0  # N x out, regime includes the bias
    else:
        mask = np.ones_like(y, dtype=np.bool_)
    counts = mask.sum(axis=0).astype(np.float64)
    safe = np.where(counts > 0, counts, 1.0)

    masked_y = y * mask
    e_xy = (x.T @ masked_y) / safe  # in x out
    e_x = (x.T @ mask.astype(np.float64)) / safe  # in x out
    e_y = _output_mean(y, mask, counts, scope)  # out

    numerator = (e_xy - e_x * e_y).T  # out x in
    denominator = np.sum(weights * numerator, axis=1)  # out
    scale = np.linalg.norm(weights, axis=1) * np.linalg.norm(numerator, axis=1)

    valid = (
        (counts > 0)
        & (np.abs(denominator) >= DENOMINATOR_TOLERANCE)
        & (np.abs(denominator) >= ORTHOGONALITY_TOLERANCE * scale)
    )

    patterns = np.zeros_like(weights)
    patterns[valid] = numerator[valid] / denominator[valid][:, None]
    return patterns, valid


def estimate_patterns(
    batch: PatternBatch,
    net: Network,
    scope: ExpectationScope = ExpectationScope.POSITIVE_REGIME,
) -> PatternSet:
    """
    Estimate patterns for every layer of a network.

    Neurons whose positive regime is empty, or whose denominator vanishes,
    are flagged invalid and get a zero pattern row.

    Args:
        batch: Recordings from collect_batch
        net: The network the batch was recorded on
        scope: Example set for E[y] (positive regime by default)

    Returns:
        PatternSet: Patterns and validity flags

    Raises:
        ArgumentError: If fewer than two examples were recorded
        DimensionError: If the batch does not match the network
    """
    if batch.size < 2:
        raise ArgumentError(f"pattern estimation needs at least 2 examples, got {batch.size}")
    if len(batch.layers) != len(net.layers):
        raise DimensionError("batch and network have different layer counts",
                             (len(batch.layers),), (len(net.layers),))

    patterns: List[Tensor] = []
    valid: List[npt.NDArray[np.bool_]] = []

    for k, (layer, layer_batch) in enumerate(zip(net.layers, batch.layers)):
        if layer_batch.inputs.shape[1] != layer.in_dim or \
                layer_batch.pre_activations.shape[1] != layer.out_dim:
            raise DimensionError(f"batch for layer {k} does not match its weights",
                                 layer_batch.inputs.shape, layer.weights.shape)
        p, v = estimate_layer(layer.weights, layer_batch, scope, layer.activation)
        patterns.append(p)
        valid.append(v)
        if not v.all():
            logger.warning("layer %d: %d of %d neurons have no valid pattern",
                           k, int(np.count_nonzero(~v)), v.size)

    return PatternSet(patterns, valid)


def attach_patterns(net: Network, pattern_set: PatternSet) -> Network:
    """Return a copy of the network carrying the estimated patterns."""
    return net.with_patterns(pattern_set.patterns)
