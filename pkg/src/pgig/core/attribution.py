# -*- coding: utf-8 -*-
"""
Attribution methods for pgig.

Every method has the signature

    method(net, x, target, cfg) -> AttributionMap

and is registered in METHODS under its command-line name. Methods:
- vanilla_gradient, gradient_times_input, guided_backprop
- integrated_gradients, smoothgrad_squared, vargrad, smoothgrad_ig,
  expected_gradients
- pattern_attribution, pgig (need a network with patterns)
- random_baseline (reference ordering for the degradation benchmark)

Networks with a softmax output are explained after the softmax with a
one-hot seed; scalar networks are explained on the raw output with seed
1.0. Path and sample averages use anchored_mean, so averaging identical
gradients returns them unchanged and results do not depend on the order
samples are evaluated in.
"""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from pgig.core.network import BackwardMode, Network, backward, forward, output_grad_seed
from pgig.core.tensor import (
    RandomSource,
    Tensor,
    anchored_mean,
    anchored_variance,
    check_finite,
    gaussian,
)
from pgig.utils.errors import ArgumentError, ConfigError, ConfigurationError, DimensionError

# sigma^2 = 0.15 is a variance
DEFAULT_NOISE_SIGMA = math.sqrt(0.15)


class SeedConvention(Enum):
    """What pattern-guided path points are seeded with."""

    ONE = "one"  # 1.0 / one-hot, keeps pgig == p * ig on linear layers
    OUTPUT = "output"  # the output value at each path point, as for pattern_attribution


@dataclass(eq=False)
class MethodConfig:
    """Hyperparameters shared by all attribution methods."""

    baseline: Optional[Tensor] = None  # None: all-zero baseline
    steps: int = 25
    samples: int = 25
    noise_mu: float = 0.0
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    baseline_draws: int = 49
    random_seed: int = 0
    reference: Optional[Tensor] = None  # N x D data for expected_gradients
    pgig_seed: SeedConvention = SeedConvention.ONE

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ArgumentError(f"steps must be >= 1, got {self.steps}")
        if self.samples < 1:
            raise ArgumentError(f"samples must be >= 1, got {self.samples}")
        if self.noise_sigma < 0:
            raise ArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.baseline_draws < 1:
            raise ArgumentError(f"baseline_draws must be >= 1, got {self.baseline_draws}")
        if not isinstance(self.pgig_seed, SeedConvention):
            self.pgig_seed = SeedConvention(self.pgig_seed)
        if self.baseline is not None:
            self.baseline = np.asarray(self.baseline, dtype=np.float64)
        if self.reference is not None:
            self.reference = np.atleast_2d(np.asarray(self.reference, dtype=np.float64))

    def baseline_for(self, x: Tensor) -> Tensor:
        """Baseline matching x (zeros unless one was given)."""
        if self.baseline is None:
            return np.zeros_like(x)
        if self.baseline.shape != x.shape:
            raise DimensionError("baseline does not match the input", self.baseline.shape, x.shape)
        return self.baseline

    @property
    def effective_samples(self) -> int:
        """Noise samples actually drawn; with zero noise every sample is identical."""
        return 1 if self.noise_sigma == 0.0 else self.samples

    def describe(self) -> Dict[str, Any]:
        """Plain-value view for metadata and manifests."""
        return {
            "baseline": "zero" if self.baseline is None else self.baseline.tolist(),
            "steps": self.steps,
            "samples": self.samples,
            "noise_mu": self.noise_mu,
            "noise_sigma": self.noise_sigma,
            "baseline_draws": self.baseline_draws,
            "random_seed": self.random_seed,
            "pgig_seed": self.pgig_seed.value,
        }


@dataclass(eq=False)
class AttributionMap:
    """Per-feature importance scores for one explained output."""

    values: Tensor
    method: str
    target: Optional[int]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the attribution values."""
        return tuple(self.values.shape)


Method = Callable[[Network, Tensor, Optional[int], MethodConfig], AttributionMap]


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _check_input(net: Network, x: Tensor) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.in_dim,):
        raise DimensionError("input does not match the network", x.shape, (net.in_dim,))
    check_finite(x, "input")
    return x


def _require_patterns(net: Network, method: str) -> None:
    if not net.has_patterns:
        missing = [k for k, layer in enumerate(net.layers) if layer.pattern is None]
        raise ConfigurationError(
            f"{method} needs a network with patterns; layer(s) {missing} have none"
        )


def _gradient(
    net: Network,
    point: Tensor,
    target: Optional[int],
    mode: BackwardMode,
    step: str,
    seed_mode: Optional[BackwardMode] = None,
) -> Tensor:
    """Input gradient at one point; seed_mode picks the seeding convention."""
    trace = forward(net, point)
    seed = output_grad_seed(net, trace, target, seed_mode or mode)
    grad = backward(net, trace, seed, mode)
    check_finite(grad, step)
    return grad


def _path_point(baseline: Tensor, x: Tensor, k: int, m: int) -> Tensor:
    result: Tensor = baseline + (k / m) * (x - baseline)
    return result


def _path_average(
    net: Network,
    x: Tensor,
    baseline: Tensor,
    target: Optional[int],
    steps: int,
    mode: BackwardMode,
    method: str,
    seed_mode: Optional[BackwardMode] = None,
) -> Tensor:
    """Mean gradient over the m equidistant points k/m, k = 1..m."""
    grads = np.stack([
        _gradient(net, _path_point(baseline, x, k, steps), target, mode,
                  f"{method} path point {k}/{steps}", seed_mode)
        for k in range(1, steps + 1)
    ])
    return anchored_mean(grads)


def _noisy_gradients(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig, method: str
) -> Tensor:
    rng = RandomSource(cfg.random_seed)
    grads: List[Tensor] = []
    for s in range(cfg.effective_samples):
        noisy = x + gaussian(rng, cfg.noise_mu, cfg.noise_sigma, x.size)
        grads.append(_gradient(net, noisy, target, BackwardMode.STANDARD,
                               f"{method} sample {s}"))
    return np.stack(grads)


def _result(values: Tensor, method: str, target: Optional[int], net: Network,
            **metadata: Any) -> AttributionMap:
    check_finite(values, method)
    metadata["output"] = net.output_mode.value
    return AttributionMap(values=values, method=method, target=target, metadata=metadata)


# ---------------------------------------------------------------------------
# Gradient modifications
# ---------------------------------------------------------------------------


def vanilla_gradient(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Plain input gradient."""
    x = _check_input(net, x)
    grad = _gradient(net, x, target, BackwardMode.STANDARD, "vanilla_gradient")
    return _result(grad, "vanilla_gradient", target, net)


def gradient_times_input(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Input gradient multiplied elementwise by the input."""
    x = _check_input(net, x)
    grad = _gradient(net, x, target, BackwardMode.STANDARD, "gradient_times_input")
    return _result(grad * x, "gradient_times_input", target, net)


def guided_backprop(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Gradient with negative signals blocked at every ReLU."""
    x = _check_input(net, x)
    grad = _gradient(net, x, target, BackwardMode.GUIDED, "guided_backprop")
    return _result(grad, "guided_backprop", target, net)


def pattern_attribution(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """
    Pattern-modified backward pass seeded with the output value.

    Raises:
        ConfigurationError: If the network carries no patterns
    """
    _require_patterns(net, "pattern_attribution")
    x = _check_input(net, x)
    grad = _gradient(net, x, target, BackwardMode.PATTERN, "pattern_attribution")
    return _result(grad, "pattern_attribution", target, net)


# ---------------------------------------------------------------------------
# Gradient aggregation
# ---------------------------------------------------------------------------


def integrated_gradients(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """
    Riemann approximation of the path integral from the baseline to x.

    phi_i = (x_i - b_i) * mean_k dF(b + k/m (x - b))/dx_i,  k = 1..m
    """
    x = _check_input(net, x)
    baseline = cfg.baseline_for(x)
    mean_grad = _path_average(net, x, baseline, target, cfg.steps, BackwardMode.STANDARD,
                              "integrated_gradients")
    return _result((x - baseline) * mean_grad, "integrated_gradients", target, net,
                   steps=cfg.steps, baseline=cfg.describe()["baseline"])


def smoothgrad_squared(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Mean of squared gradients at Gaussian-perturbed copies of x."""
    x = _check_input(net, x)
    grads = _noisy_gradients(net, x, target, cfg, "smoothgrad_squared")
    return _result(anchored_mean(grads ** 2), "smoothgrad_squared", target, net,
                   samples=cfg.effective_samples, noise_mu=cfg.noise_mu,
                   noise_sigma=cfg.noise_sigma, seed=cfg.random_seed)


def vargrad(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Per-feature sample variance of gradients at Gaussian-perturbed copies of x."""
    x = _check_input(net, x)
    grads = _noisy_gradients(net, x, target, cfg, "vargrad")
    return _result(anchored_variance(grads, ddof=1), "vargrad", target, net,
                   samples=cfg.effective_samples, noise_mu=cfg.noise_mu,
                   noise_sigma=cfg.noise_sigma, seed=cfg.random_seed)


def smoothgrad_ig(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """
    Integrated gradients with noisy end points.

    At every path step k a fresh noisy input x' = x + N(mu, sigma^2) is
    drawn for each of the n samples; the gradient at b + k/m (x' - b) is
    averaged over samples, then over steps, and scaled by (x - b).
    """
    x = _check_input(net, x)
    baseline = cfg.baseline_for(x)
    rng = RandomSource(cfg.random_seed)
    n = cfg.effective_samples

    step_means: List[Tensor] = []
    for k in range(1, cfg.steps + 1):
        grads = []
        for s in range(n):
            noisy = x + gaussian(rng, cfg.noise_mu, cfg.noise_sigma, x.size)
            grads.append(_gradient(net, _path_point(baseline, noisy, k, cfg.steps), target,
                                   BackwardMode.STANDARD,
                                   f"smoothgrad_ig path point {k}/{cfg.steps} sample {s}"))
        step_means.append(anchored_mean(np.stack(grads)))

    values = (x - baseline) * anchored_mean(np.stack(step_means))
    return _result(values, "smoothgrad_ig", target, net, steps=cfg.steps, samples=n,
                   noise_mu=cfg.noise_mu, noise_sigma=cfg.noise_sigma, seed=cfg.random_seed)


def expected_gradients(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """
    Monte-Carlo expected gradients.

    Each draw picks a baseline from cfg.reference and alpha ~ U(0, 1) and
    contributes (x - b) * dF(b + alpha (x - b))/dx.

    Raises:
        ConfigurationError: If no reference data is configured
    """
    x = _check_input(net, x)
    if cfg.reference is None or cfg.reference.shape[0] == 0:
        raise ConfigurationError("expected_gradients needs reference data (cfg.reference)")
    if cfg.reference.shape[1] != x.size:
        raise DimensionError("reference data does not match the input",
                             cfg.reference.shape, x.shape)

    rng = RandomSource(cfg.random_seed)
    terms: List[Tensor] = []
    for d in range(cfg.baseline_draws):
        b = cfg.reference[int(rng.integers(cfg.reference.shape[0], 1)[0])]
        alpha = float(rng.uniform(1)[0])
        grad = _gradient(net, b + alpha * (x - b), target, BackwardMode.STANDARD,
                         f"expected_gradients draw {d}")
        terms.append((x - b) * grad)

    return _result(anchored_mean(np.stack(terms)), "expected_gradients", target, net,
                   baseline_draws=cfg.baseline_draws, seed=cfg.random_seed)


def pgig(net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig) -> AttributionMap:
    """
    Pattern-guided integrated gradients.

    The integrated-gradients path sum with the pattern-modified backward
    pass at every path point. Path points are seeded with 1.0 (one-hot)
    unless cfg.pgig_seed asks for the output value.

    Raises:
        ConfigurationError: If the network carries no patterns
    """
    _require_patterns(net, "pgig")
    x = _check_input(net, x)
    baseline = cfg.baseline_for(x)
    seed_mode = (BackwardMode.STANDARD if cfg.pgig_seed is SeedConvention.ONE
                 else BackwardMode.PATTERN)
    mean_grad = _path_average(net, x, baseline, target, cfg.steps, BackwardMode.PATTERN,
                              "pgig", seed_mode=seed_mode)
    return _result((x - baseline) * mean_grad, "pgig", target, net, steps=cfg.steps,
                   baseline=cfg.describe()["baseline"], pgig_seed=cfg.pgig_seed.value)


def random_baseline(
    net: Network, x: Tensor, target: Optional[int], cfg: MethodConfig
) -> AttributionMap:
    """Uniform noise on [0, 1): a method-shaped random ordering."""
    x = _check_input(net, x)
    values = RandomSource(cfg.random_seed).uniform(x.size).reshape(x.shape)
    return _result(values, "random_baseline", target, net, seed=cfg.random_seed)


METHODS: Dict[str, Method] = {
    "vanilla_gradient": vanilla_gradient,
    "gradient_times_input": gradient_times_input,
    "integrated_gradients": integrated_gradients,
    "smoothgrad_squared": smoothgrad_squared,
    "vargrad": vargrad,
    "smoothgrad_ig": smoothgrad_ig,
    "expected_gradients": expected_gradients,
    "guided_backprop": guided_backprop,
    "pattern_attribution": pattern_attribution,
    "pgig": pgig,
    "random_baseline": random_baseline,
}

METHOD_NAMES: Tuple[str, ...] = tuple(METHODS)
PATTERN_METHODS = frozenset({"pattern_attribution", "pgig"})


def get_method(name: str) -> Method:
    """
    Look up a method by name.

    Raises:
        ArgumentError: Listing the valid names if the name is unknown
    """
    try:
        return METHODS[name]
    except KeyError:
        raise ArgumentError(
            f"unknown method '{name}'; valid methods: {', '.join(METHOD_NAMES)}"
        ) from None


def explain(
    name: str, net: Network, x: Tensor, target: Optional[int], cfg: Optional[MethodConfig] = None
) -> AttributionMap:
    """
    Run an attribution method by name.

    Example:
        >>> amap = explain("pgig", net, x, target=None)
        >>> amap.values.shape == x.shape
        True
    """
    return get_method(name)(net, x, target, cfg or MethodConfig())


def save_attribution_csv(amap: AttributionMap, path: Union[str, Path]) -> str:
    """Write a map as CSV with columns index, value (LF line endings)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", "value"])
        for i, value in enumerate(amap.values.reshape(-1)):
            writer.writerow([i, repr(float(value))])
    return str(path)


def load_attribution_csv(path: Union[str, Path], method: str = "unknown") -> AttributionMap:
    """
    Read a map written by save_attribution_csv.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: On a malformed file (with line number)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"attribution map not found: {path}")

    values: List[float] = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        if next(reader, None) != ["index", "value"]:
            raise ConfigError("expected header 'index,value'", str(path), 1)
        for row in reader:
            if not row:
                continue
            try:
                index, value = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise ConfigError("malformed row", str(path), reader.line_num) from None
            if index != len(values):
                raise ConfigError(f"expected index {len(values)}, got {index}",
                                  str(path), reader.line_num)
            values.append(value)

    if not values:
        raise ConfigError("attribution map is empty", str(path))
    return AttributionMap(np.array(values, dtype=np.float64), method, None,
                          {"source": str(path)})
