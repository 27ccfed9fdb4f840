# -*- coding: utf-8 -*-
"""
Image degradation benchmark for pgig.

Every image is explained once, on the clean input. Its patches (a
non-overlapping grid) are ranked by accumulated saliency and replaced
one after the other by the image mean; the model's softmax confidence in
the explained class is tracked after each replacement. Steeper decay
(smaller normalised area under the curve) means the ranking found the
evidence the model actually uses.

This module provides:
- Patch ranking with signed or absolute aggregation
- Mean-value patch replacement
- The benchmark over a dataset and all selected methods
- CSV output (curves and AUC table)
"""

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from pgig.core.attribution import (
    METHOD_NAMES,
    PATTERN_METHODS,
    AttributionMap,
    MethodConfig,
    explain,
    get_method,
)
from pgig.core.network import Network, OutputMode, predict
from pgig.core.tensor import RandomSource, Tensor, anchored_mean
from pgig.core.trainer import LabeledImages
from pgig.utils.errors import ArgumentError, ConfigurationError
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

Ranking = npt.NDArray[np.int64]


class Aggregation(Enum):
    """How pixel saliencies are accumulated per patch."""

    SUM_SIGNED = "sum_signed"
    SUM_ABSOLUTE = "sum_absolute"


class ExplainedClass(Enum):
    """Which class is explained and tracked."""

    PREDICTED = "predicted"
    LABEL = "label"


class FillScope(Enum):
    """Where the replacement value comes from."""

    IMAGE = "image"  # mean of the unperturbed image itself
    DATASET = "dataset"  # mean over all benchmark images


@dataclass
class DegradationConfig:
    """Benchmark settings."""

    patch: int = 4
    max_patches: Optional[int] = None  # None: the whole grid
    aggregation: Aggregation = Aggregation.SUM_SIGNED
    methods: Tuple[str, ...] = METHOD_NAMES
    split: str = "test"
    explained_class: ExplainedClass = ExplainedClass.PREDICTED
    fill: FillScope = FillScope.IMAGE
    method_config: MethodConfig = field(default_factory=MethodConfig)

    def __post_init__(self) -> None:
        if self.patch < 1:
            raise ArgumentError(f"patch must be >= 1, got {self.patch}")
        if self.max_patches is not None and self.max_patches < 1:
            raise ArgumentError(f"max_patches must be >= 1, got {self.max_patches}")
        self.aggregation = Aggregation(self.aggregation)
        self.explained_class = ExplainedClass(self.explained_class)
        self.fill = FillScope(self.fill)
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ArgumentError("at least one method is required")
        for name in self.methods:
            get_method(name)

    def grid(self, side: int) -> int:
        """
        Patches per image for a side x side image.

        Raises:
            ConfigurationError: If the patch does not tile the image
        """
        if side % self.patch != 0:
            raise ConfigurationError(
                f"patch size {self.patch} does not tile a {side}x{side} image"
            )
        return (side // self.patch) ** 2

    def budget(self, side: int) -> int:
        """Largest number of patches replaced."""
        grid = self.grid(side)
        if self.max_patches is None:
            return grid
        if self.max_patches > grid:
            raise ConfigurationError(
                f"max_patches {self.max_patches} exceeds the {grid}-patch grid"
            )
        return self.max_patches


@dataclass(eq=False)
class DegradationCurve:
    """Mean confidence after k = 0..max replaced patches."""

    method: str
    confidence: Tensor  # index k

    @property
    def patches(self) -> List[int]:
        """Patch counts k of the curve points."""
        return list(range(self.confidence.shape[0]))

    @property
    def auc(self) -> float:
        """Trapezoidal area divided by max_k * confidence at k = 0."""
        c = self.confidence
        max_k = c.shape[0] - 1
        area = math.fsum(0.5 * (c[k] + c[k + 1]) for k in range(max_k))
        return area / (max_k * float(c[0]))


def image_side(length: int) -> int:
    """
    Side of a square image with the given pixel count.

    Raises:
        ConfigurationError: If length is not a perfect square
    """
    side = math.isqrt(length)
    if side * side != length:
        raise ConfigurationError(f"a map of length {length} is not a square image")
    return side


def patch_scores(values: Tensor, patch: int, aggregation: Aggregation) -> Tensor:
    """Accumulated saliency per patch, patches numbered row-major."""
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    side = image_side(flat.size)
    if side % patch != 0:
        raise ConfigurationError(f"patch size {patch} does not tile a {side}x{side} image")
    g = side // patch
    if aggregation is Aggregation.SUM_ABSOLUTE:
        flat = np.abs(flat)
    blocks = flat.reshape(g, patch, g, patch).transpose(0, 2, 1, 3).reshape(g * g, -1)
    return np.array([math.fsum(block) for block in blocks], dtype=np.float64)


def rank_patches(amap: Union[AttributionMap, Tensor], cfg: DegradationConfig) -> Ranking:
    """
    Order patches by accumulated saliency, highest first.

    Ties are broken by ascending patch index.

    Raises:
        ConfigurationError: If the map cannot be tiled with cfg.patch

    Example:
        >>> rank_patches(np.ones(16), DegradationConfig(patch=2)).tolist()
        [0, 1, 2, 3]
    """
    values = amap.values if isinstance(amap, AttributionMap) else amap
    scores = patch_scores(values, cfg.patch, cfg.aggregation)
    return np.array(sorted(range(scores.size), key=lambda i: (-scores[i], i)), dtype=np.int64)


def image_mean(image: Tensor) -> float:
    """Mean pixel value; exact for constant images."""
    return float(anchored_mean(np.asarray(image, dtype=np.float64).reshape(-1, 1))[0])


def perturb(
    image: Tensor,
    order: Sequence[int],
    k: int,
    patch: int,
    fill: Optional[float] = None,
) -> Tensor:
    """
    Replace the first k ranked patches of a flattened square image.

    Args:
        image: Unperturbed image (flattened)
        order: Patch ranking from rank_patches
        k: Number of patches to replace
        patch: Patch side length
        fill: Replacement value (default: the image mean)

    Returns:
        Tensor: Perturbed copy; the input is not modified

    Raises:
        ArgumentError: If k is negative or exceeds the ranking
    """
    if not 0 <= k <= len(order):
        raise ArgumentError(f"k must lie in [0, {len(order)}], got {k}")
    image = np.asarray(image, dtype=np.float64)
    side = image_side(image.size)
    value = image_mean(image) if fill is None else fill

    result = image.reshape(side, side).copy()
    per_row = side // patch
    for index in order[:k]:
        row, col = divmod(int(index), per_row)
        result[row * patch:(row + 1) * patch, col * patch:(col + 1) * patch] = value
    out: Tensor = result.reshape(image.shape)
    return out


def _explained_class(net: Network, image: Tensor, label: int, cfg: DegradationConfig) -> int:
    if cfg.explained_class is ExplainedClass.LABEL:
        return int(label)
    return int(np.argmax(predict(net, image)))


def run_benchmark(
    net: Network, data: LabeledImages, cfg: DegradationConfig
) -> List[DegradationCurve]:
    """
    Degradation curves for every configured method.

    Each image is explained once on the clean input for its explained
    class; the ranking stays fixed for all k. Image i uses the random
    seed of child stream i of cfg.method_config.random_seed, so noisy
    methods and random_baseline draw fresh values per image.

    Args:
        net: Softmax classifier (with patterns if PA/PGIG are selected)
        data: Images to degrade
        cfg: Benchmark settings

    Returns:
        List[DegradationCurve]: One curve per method, in cfg.methods order

    Raises:
        ConfigurationError: Pattern methods on a network without patterns,
            expected_gradients without reference data, or a patch size
            that does not tile the images
    """
    if net.output_mode is not OutputMode.SOFTMAX:
        raise ConfigurationError("the degradation benchmark needs a softmax classifier")
    needs_patterns = [m for m in cfg.methods if m in PATTERN_METHODS]
    if needs_patterns and not net.has_patterns:
        raise ConfigurationError(
            f"method(s) {', '.join(needs_patterns)} need a network with patterns"
        )
    reference = cfg.method_config.reference
    if "expected_gradients" in cfg.methods and (reference is None or reference.shape[0] == 0):
        raise ConfigurationError(
            "expected_gradients needs reference data (method_config.reference)"
        )
    if len(data) == 0:
        raise ArgumentError("no images to degrade")

    side = image_side(data.images.shape[1])
    max_k = cfg.budget(side)
    dataset_fill = image_mean(data.images) if cfg.fill is FillScope.DATASET else None
    seeds = RandomSource(cfg.method_config.random_seed)

    tables: Dict[str, Tensor] = {
        m: np.zeros((len(data), max_k + 1), dtype=np.float64) for m in cfg.methods
    }

    for i, (image, label) in enumerate(zip(data.images, data.labels)):
        target = _explained_class(net, image, int(label), cfg)
        method_cfg = dataclasses.replace(cfg.method_config, random_seed=seeds.spawn(i).seed)
        for method in cfg.methods:
            amap = explain(method, net, image, target, method_cfg)
            order = rank_patches(amap, cfg)
            for k in range(max_k + 1):
                perturbed = perturb(image, order, k, cfg.patch, dataset_fill)
                tables[method][i, k] = predict(net, perturbed)[target]
        if (i + 1) % 100 == 0:
            logger.info("degraded %d/%d images", i + 1, len(data))

    curves = [DegradationCurve(m, anchored_mean(tables[m])) for m in cfg.methods]
    for curve in curves:
        logger.info("%s: AUC %.4f", curve.method, curve.auc)
    return curves


def write_curves_csv(curves: Sequence[DegradationCurve], path: Union[str, Path]) -> str:
    """One row per k: patches, then one confidence column per method."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["patches"] + [c.method for c in curves])
        for k in curves[0].patches:
            writer.writerow([k] + [repr(float(c.confidence[k])) for c in curves])
    return str(path)


def write_auc_csv(curves: Sequence[DegradationCurve], path: Union[str, Path]) -> str:
    """AUC summary: method, auc."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["method", "auc"])
        for curve in curves:
            writer.writerow([curve.method, repr(curve.auc)])
    return str(path)
