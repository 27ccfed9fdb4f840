# -*- coding: utf-8 -*-
"""
Shared fixtures for the pgig tests.
"""

from typing import List, Optional

import numpy as np
import pytest

from pgig.core.network import Activation, Layer, Network, OutputMode
from pgig.core.stress import build_stress_model, build_stress_model_with_patterns
from pgig.core.trainer import SyntheticImageTask


def random_network(
    rng: np.random.Generator,
    sizes: List[int],
    activation: Activation = Activation.RELU,
    output_mode: OutputMode = OutputMode.RAW,
    patterns: bool = False,
) -> Network:
    """Dense network with N(0, 1) weights; hidden layers use activation, the last is linear."""
    layers = []
    for k in range(len(sizes) - 1):
        act = activation if k < len(sizes) - 2 else Activation.LINEAR
        weights = rng.normal(size=(sizes[k + 1], sizes[k]))
        pattern: Optional[np.ndarray] = rng.normal(size=weights.shape) if patterns else None
        layers.append(Layer(weights, rng.normal(scale=0.5, size=sizes[k + 1]), act, pattern))
    return Network(layers, output_mode)


@pytest.fixture
def stress_net():
    """The distractor-cancelling stress model without patterns."""
    return build_stress_model()


@pytest.fixture
def stress_net_with_patterns():
    """The stress model carrying its closed-form patterns."""
    return build_stress_model_with_patterns()


@pytest.fixture
def small_task():
    """A quick-to-generate version of the image task."""
    return SyntheticImageTask(train_size=80, val_size=40, test_size=20)
