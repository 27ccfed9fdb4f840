# -*- coding: utf-8 -*-
"""
Combined saturation/distractor stress test for pgig.

The target is y = 1 - ReLU(1 - z) on an equidistant z grid. Inputs are
x = s + d with signal s = (z, 0) and distractor d = (eps, eps). The
hand-built model

    layer A: weights (-1, 1), bias 1, ReLU
    layer B: weight -1,       bias 1, linear

cancels the distractor exactly, so f(x) = 1 - ReLU(1 - z). This module
provides:
- Model, dataset and closed-form patterns
- The integrated gradients / pattern attribution / pgig comparison
- Property checks and CSV panels for the comparison
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from pgig.core.attribution import (
    MethodConfig,
    integrated_gradients,
    pattern_attribution,
    pgig,
)
from pgig.core.network import Activation, Layer, Network, OutputMode
from pgig.core.patterns import PatternSet
from pgig.core.tensor import RandomSource, Tensor, gaussian
from pgig.utils.errors import ArgumentError
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

COMPARED_METHODS = ("IG", "PA", "PGIG")
FEATURE_NAMES = ("signal", "distractor")

# Plateau assertions keep clear of the kink at z = 1
PLATEAU_START = 1.05


@dataclass
class StressConfig:
    """Grid and noise settings for the stress test."""

    z_start: float = -2.0
    z_end: float = 2.0
    z_step: float = 0.01
    noise_mu: float = 0.0
    noise_sigma: float = 0.25
    random_seed: int = 0
    steps: int = 25  # path steps for IG / PGIG

    def __post_init__(self) -> None:
        if self.z_step <= 0:
            raise ArgumentError(f"z_step must be > 0, got {self.z_step}")
        if self.noise_sigma < 0:
            raise ArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.z_end < self.z_start:
            raise ArgumentError("z_end must not be smaller than z_start")
        if self.steps < 1:
            raise ArgumentError(f"steps must be >= 1, got {self.steps}")

    @property
    def size(self) -> int:
        """Number of grid points (end point included)."""
        return int(round((self.z_end - self.z_start) / self.z_step)) + 1


@dataclass(eq=False)
class StressDataset:
    """One row per grid point."""

    z: Tensor  # N
    y: Tensor  # N
    signal: Tensor  # N x 2
    distractor: Tensor  # N x 2
    x: Tensor  # N x 2

    def __len__(self) -> int:
        return int(self.z.shape[0])


@dataclass(eq=False)
class StressComparison:
    """Attributions of the three compared methods at every grid point."""

    dataset: StressDataset
    attributions: Dict[str, Tensor]  # method -> N x 2
    config: StressConfig
    properties: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True if every checked property holds."""
        return all(self.properties.values())


def target_function(z: Tensor) -> Tensor:
    """y = 1 - ReLU(1 - z)."""
    result: Tensor = 1.0 - np.maximum(1.0 - np.asarray(z, dtype=np.float64), 0.0)
    return result


def build_stress_model() -> Network:
    """
    Construct the distractor-cancelling two-layer model.

    Returns:
        Network: Raw-output network with f(s + d) = 1 - ReLU(1 - z)

    Example:
        >>> from pgig.core.network import predict
        >>> predict(build_stress_model(), np.array([0.6, 0.1]))
        array([0.5])
    """
    layer_a = Layer(np.array([[-1.0, 1.0]]), np.array([1.0]), Activation.RELU)
    layer_b = Layer(np.array([[-1.0]]), np.array([1.0]), Activation.LINEAR)
    return Network([layer_a, layer_b], OutputMode.RAW)


def z_grid(cfg: StressConfig) -> Tensor:
    """Equidistant grid z_start, z_start + z_step, ..., z_end (inclusive)."""
    return cfg.z_start + cfg.z_step * np.arange(cfg.size, dtype=np.float64)


def generate_dataset(cfg: StressConfig, rng: Optional[RandomSource] = None) -> StressDataset:
    """
    Sample the signal/distractor dataset.

    One distractor value eps ~ N(mu, sigma^2) is drawn per grid point and
    added to both input dimensions.

    Args:
        cfg: Grid and noise settings
        rng: Random stream (default: RandomSource(cfg.random_seed))

    Returns:
        StressDataset: z, y, s, d and x = s + d
    """
    rng = rng or RandomSource(cfg.random_seed)
    z = z_grid(cfg)
    n = z.shape[0]

    eps = gaussian(rng, cfg.noise_mu, cfg.noise_sigma, n)
    signal = np.column_stack([z, np.zeros(n)])
    distractor = np.column_stack([eps, eps])

    return StressDataset(
        z=z,
        y=target_function(z),
        signal=signal,
        distractor=distractor,
        x=signal + distractor,
    )


def analytic_patterns() -> PatternSet:
    """
    Closed-form patterns of the stress model.

    Layer A's pattern (-1, 0) points along the signal direction only and
    layer B's pattern is -1; both satisfy w . p = 1.
    """
    return PatternSet(
        patterns=[np.array([[-1.0, 0.0]]), np.array([[-1.0]])],
        valid=[np.array([True]), np.array([True])],
    )


def build_stress_model_with_patterns(pattern_set: Optional[PatternSet] = None) -> Network:
    """Stress model carrying analytic (or given) patterns."""
    pattern_set = pattern_set or analytic_patterns()
    return build_stress_model().with_patterns(pattern_set.patterns)


def run_stress_comparison(
    cfg: StressConfig, pattern_set: Optional[PatternSet] = None
) -> StressComparison:
    """
    Explain every grid point with IG, PA and PGIG.

    IG and PGIG integrate from the zero baseline; IG and PGIG seed the
    backward pass with 1.0, PA with the output value.

    Args:
        cfg: Stress settings
        pattern_set: Patterns for PA/PGIG (default: analytic patterns)

    Returns:
        StressComparison: N x 2 attribution tables plus property checks
    """
    dataset = generate_dataset(cfg)
    net = build_stress_model_with_patterns(pattern_set)
    method_cfg = MethodConfig(steps=cfg.steps)

    methods = {"IG": integrated_gradients, "PA": pattern_attribution, "PGIG": pgig}
    tables: Dict[str, List[Tensor]] = {name: [] for name in methods}
    for point in dataset.x:
        for name, method in methods.items():
            tables[name].append(method(net, point, None, method_cfg).values)

    comparison = StressComparison(
        dataset=dataset,
        attributions={name: np.stack(rows) for name, rows in tables.items()},
        config=cfg,
    )
    comparison.properties = check_properties(comparison)
    logger.info("stress comparison: %d points, properties %s", len(dataset),
                "passed" if comparison.passed else "FAILED")
    return comparison


def check_properties(comparison: StressComparison) -> Dict[str, bool]:
    """
    Evaluate the qualitative outcomes the comparison should show.

    - pa_plateau_zero: PA gives zero signal attribution on the plateau
    - pgig_plateau_positive: PGIG keeps positive signal attribution there
    - pgig_distractor_zero: PGIG gives exactly zero to the distractor
    - ig_distractor_leak: IG's distractor attribution exceeds 10x PGIG's
      (only checked when there is noise)
    - pa_noise_rejection: PA distractor attribution below 5% of its signal
      attribution on -1 < z < 1
    """
    z = comparison.dataset.z
    ig = comparison.attributions["IG"]
    pa = comparison.attributions["PA"]
    pg = comparison.attributions["PGIG"]
    plateau = z > PLATEAU_START
    centre = (z > -1.0) & (z < 1.0)

    props: Dict[str, bool] = {
        "pa_plateau_zero": bool(np.all(np.abs(pa[plateau, 0]) < 1e-9)),
        "pgig_plateau_positive": bool(np.all(pg[plateau, 0] > 0.0)),
        "pgig_distractor_zero": bool(np.all(pg[:, 1] == 0.0)),
    }
    if comparison.config.noise_sigma > 0:
        props["ig_distractor_leak"] = bool(
            np.mean(np.abs(ig[:, 1])) > 10.0 * np.mean(np.abs(pg[:, 1]))
        )
    if np.any(centre):
        props["pa_noise_rejection"] = bool(
            np.mean(np.abs(pa[centre, 1])) < 0.05 * np.mean(np.abs(pa[centre, 0]))
        )
    return props


def _write_series(path: Path, header: List[str], columns: List[Tensor]) -> str:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])
    return str(path)


def write_stress_csvs(comparison: StressComparison, out_dir: Union[str, Path]) -> List[str]:
    """
    Write one CSV per figure panel.

    Files: z, y (against the point index); signal, distractor, X (first
    input dimension against the second); <METHOD>_signal and
    <METHOD>_distractor (attribution against z).

    Returns:
        List[str]: Paths written, in a fixed order
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = comparison.dataset
    index = np.arange(len(data), dtype=np.float64)

    written = [
        _write_series(out / "z.csv", ["index", "z"], [index, data.z]),
        _write_series(out / "y.csv", ["index", "y"], [index, data.y]),
        _write_series(out / "signal.csv", ["x1", "x2"], [data.signal[:, 0], data.signal[:, 1]]),
        _write_series(out / "distractor.csv", ["x1", "x2"],
                      [data.distractor[:, 0], data.distractor[:, 1]]),
        _write_series(out / "X.csv", ["x1", "x2"], [data.x[:, 0], data.x[:, 1]]),
    ]
    for method in COMPARED_METHODS:
        values = comparison.attributions[method]
        for i, feature in enumerate(FEATURE_NAMES):
            written.append(_write_series(out / f"{method}_{feature}.csv", ["z", "value"],
                                         [data.z, values[:, i]]))
    return written


def write_report(comparison: StressComparison, path: Union[str, Path]) -> str:
    """Write the pass/fail property report as JSON."""
    report = {
        "passed": comparison.passed,
        "properties": comparison.properties,
        "points": len(comparison.dataset),
        "config": asdict(comparison.config),
    }
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(path)


if __name__ == "__main__":
    result = run_stress_comparison(StressConfig())
    print("=== pgig stress test ===\n")
    for name, ok in result.properties.items():
        print(f"  {'✓' if ok else '✗'} {name}")
