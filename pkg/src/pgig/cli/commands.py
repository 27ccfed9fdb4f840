# -*- coding: utf-8 -*-
"""
Command implementations for the pgig command line.

Each command takes the resolved Settings plus its named arguments, writes
its outputs and a manifest.json into the output directory, and returns a
CommandResult. Commands never call sys.exit; main.py maps results to exit
codes. A manifest's command and arguments are exactly what cmd_rerun
passes back in.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from pgig.cli.heatmap import HeatmapImage, write_png, write_ppm
from pgig.core.attribution import (
    PATTERN_METHODS,
    explain,
    load_attribution_csv,
    save_attribution_csv,
)
from pgig.core.degradation import run_benchmark, write_auc_csv, write_curves_csv
from pgig.core.network import Network, describe, load_network, predict, save_network
from pgig.core.stress import run_stress_comparison, write_report, write_stress_csvs
from pgig.core.trainer import (
    LabeledImages,
    fit_patterns,
    generate_task,
    load_split_csv,
    save_task,
    train_with_history,
)
from pgig.core.tensor import Tensor
from pgig.utils.config import Settings
from pgig.utils.errors import ArgumentError, ConfigError, ConfigurationError, PgigError
from pgig.utils.logger import get_logger
from pgig.utils.manifest import RunManifest

logger = get_logger(__name__)

NETWORK_FILE = "network.txt"
PATTERN_NETWORK_FILE = "network_patterns.txt"


@dataclass
class CommandResult:
    """Result of a command."""

    success: bool
    message: str
    exit_code: int = 0
    outputs: List[str] = field(default_factory=list)
    manifest: Optional[str] = None

    @classmethod
    def failure(cls, error: Exception) -> "CommandResult":
        """Result for an error raised by a command."""
        code = error.exit_code if isinstance(error, PgigError) else 3
        return cls(False, str(error), code)


def _finish(
    command: str,
    settings: Settings,
    arguments: Dict[str, Any],
    inputs: List[str],
    outputs: List[str],
    started: float,
    message: str,
) -> CommandResult:
    out_dir = Path(arguments["out"])
    if out_dir.suffix:
        out_dir = out_dir.parent
    manifest = RunManifest(command, arguments, settings.as_dict(), settings.seed,
                           inputs=inputs, outputs=outputs)
    manifest.time("total", started)
    path = manifest.save(out_dir)
    for output in outputs:
        logger.info("wrote %s", output)
    return CommandResult(True, message, 0, outputs, path)


def _heatmaps(values: Tensor, stem: Path, png: bool, scale: int) -> List[str]:
    image = HeatmapImage.from_values(values).scaled(scale)
    written = [write_ppm(image, stem.with_suffix(".ppm"))]
    if png:
        written.append(write_png(image, stem.with_suffix(".png")))
    return written


def _reference(data: Optional[str], reference: Optional[str]) -> Optional[Tensor]:
    """Reference images for expected_gradients: explicit file, else train.csv next to data."""
    if reference:
        return load_split_csv(reference).images
    if data:
        candidate = Path(data)
        candidate = (candidate if candidate.is_dir() else candidate.parent) / "train.csv"
        if candidate.exists():
            return load_split_csv(candidate).images
    return None


def _split_file(data: str, split: str) -> Path:
    path = Path(data)
    return path / f"{split}.csv" if path.is_dir() else path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_stress(settings: Settings, out: str) -> CommandResult:
    """Run the stress comparison and write panel CSVs plus report.json."""
    started = time.perf_counter()
    comparison = run_stress_comparison(settings.stress_config())
    outputs = write_stress_csvs(comparison, out)
    outputs.append(write_report(comparison, Path(out) / "report.json"))

    failed = [name for name, ok in comparison.properties.items() if not ok]
    message = (f"stress test: {len(comparison.dataset)} points, all properties hold"
               if not failed else f"stress test: properties FAILED: {', '.join(failed)}")
    return _finish("stress", settings, {"out": out}, [], outputs, started, message)


def cmd_train(settings: Settings, out: str) -> CommandResult:
    """Generate the synthetic task, train a classifier and save both."""
    started = time.perf_counter()
    splits = generate_task(settings.task_config())
    outputs = save_task(splits, Path(out) / "data")

    result = train_with_history(splits, settings.train_config())
    outputs.append(save_network(result.network, Path(out) / NETWORK_FILE))

    history_path = Path(out) / "history.csv"
    with open(history_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "loss", "val_accuracy"])
        for row in result.history:
            writer.writerow([int(row["epoch"]), repr(row["loss"]), repr(row["val_accuracy"])])
    outputs.append(str(history_path))

    logger.info("trained network:\n%s", describe(result.network))
    message = (f"trained {len(splits.train)} examples, best validation accuracy "
               f"{result.val_accuracy:.3f} (epoch {result.best_epoch})")
    return _finish("train", settings, {"out": out}, [], outputs, started, message)


def cmd_patterns(settings: Settings, out: str, network: str, data: str) -> CommandResult:
    """Fit patterns on the training split and save the network with patterns."""
    started = time.perf_counter()
    net = load_network(network)
    train_file = _split_file(data, "train")
    report = fit_patterns(net, load_split_csv(train_file), settings.pattern_scope())

    outputs = [save_network(report.network, Path(out) / PATTERN_NETWORK_FILE)]
    report_path = Path(out) / "patterns.json"
    report_path.write_text(json.dumps({
        "examples": report.examples,
        "invalid_count": report.invalid_count,
        "invalid_per_layer": report.invalid_per_layer(),
        "scope": settings.pattern_scope().value,
    }, indent=2) + "\n", encoding="utf-8")
    outputs.append(str(report_path))

    logger.info("network with patterns:\n%s", describe(report.network))
    message = (f"fitted patterns on {report.examples} examples, "
               f"{report.invalid_count} invalid neuron(s)")
    return _finish("patterns", settings,
                   {"out": out, "network": network, "data": data},
                   [network, str(train_file)], outputs, started, message)


def _read_input(input_file: Optional[str], data: Optional[str], index: Optional[int],
                split: str) -> Tensor:
    if input_file:
        with open(input_file, "r", newline="", encoding="utf-8") as f:
            rows = [row for row in csv.reader(f) if row]
        for number, row in enumerate(rows, start=1):
            try:
                return np.array([float(v) for v in row], dtype=np.float64)
            except ValueError:
                if number > 1:
                    raise ConfigError("input row is not numeric", input_file, number) from None
        raise ConfigError("input file has no numeric row", input_file)
    if data is None or index is None:
        raise ArgumentError("give either --input or --data with --index")
    images: LabeledImages = load_split_csv(_split_file(data, split))
    if not 0 <= index < len(images):
        raise ArgumentError(f"index {index} out of range for {len(images)} examples")
    result: Tensor = images.images[index]
    return result


def _default_target(net: Network, x: Tensor) -> Optional[int]:
    """Predicted class; scalar networks need no target."""
    if net.out_dim == 1:
        return None
    return int(np.argmax(predict(net, x)))


def cmd_explain(
    settings: Settings,
    out: str,
    network: str,
    input_file: Optional[str] = None,
    data: Optional[str] = None,
    index: Optional[int] = None,
    target: Optional[int] = None,
    reference: Optional[str] = None,
    png: bool = False,
    scale: int = 1,
) -> CommandResult:
    """Explain one input with the configured method; write the map and a heatmap."""
    started = time.perf_counter()
    net = load_network(network)
    method = settings.method
    if method in PATTERN_METHODS and not net.has_patterns:
        raise ConfigurationError(
            f"{method} needs a network with patterns; run 'pgig patterns' first"
        )

    split = settings.get("degradation", "split")
    x = _read_input(input_file, data, index, split)
    target = target if target is not None else _default_target(net, x)
    ref = _reference(data, reference) if method == "expected_gradients" else None
    amap = explain(method, net, x, target, settings.method_config(x.size, ref))

    stem = Path(out) / f"{method}_attribution"
    outputs = [save_attribution_csv(amap, stem.with_suffix(".csv"))]
    side = math.isqrt(x.size)
    if side * side == x.size:
        outputs += _heatmaps(amap.values, stem, png, scale)

    arguments = {"out": out, "network": network, "input_file": input_file, "data": data,
                 "index": index, "target": target, "reference": reference,
                 "png": png, "scale": scale}
    inputs = [p for p in (network, input_file, data, reference) if p]
    message = f"{method}: target {target}, sum {float(np.sum(amap.values)):.6g}"
    return _finish("explain", settings, arguments, inputs, outputs, started, message)


def cmd_degrade(
    settings: Settings,
    out: str,
    network: str,
    data: str,
    reference: Optional[str] = None,
    limit: Optional[int] = None,
) -> CommandResult:
    """Run the degradation benchmark; write curve and AUC CSVs."""
    started = time.perf_counter()
    net = load_network(network)
    split = settings.get("degradation", "split")
    images = load_split_csv(_split_file(data, split))
    if limit is not None:
        images = LabeledImages(images.images[:limit], images.labels[:limit])

    degradation_methods = settings.get("degradation", "methods")
    ref = _reference(data, reference) if "expected_gradients" in degradation_methods else None
    cfg = settings.degradation_config(settings.method_config(images.images.shape[1], ref))
    curves = run_benchmark(net, images, cfg)

    outputs = [
        write_curves_csv(curves, Path(out) / "degradation.csv"),
        write_auc_csv(curves, Path(out) / "auc.csv"),
    ]
    ranking = sorted(curves, key=lambda c: c.auc)
    message = "AUC: " + ", ".join(f"{c.method} {c.auc:.4f}" for c in ranking)
    arguments = {"out": out, "network": network, "data": data,
                 "reference": reference, "limit": limit}
    inputs = [p for p in (network, data, reference) if p]
    return _finish("degrade", settings, arguments, inputs, outputs, started, message)


def cmd_render(
    settings: Settings, out: str, map_file: str, png: bool = False, scale: int = 1
) -> CommandResult:
    """Render an attribution map CSV of square length as PPM (and PNG)."""
    started = time.perf_counter()
    amap = load_attribution_csv(map_file)
    out_path = Path(out)
    stem = out_path.with_suffix("") if out_path.suffix else out_path / Path(map_file).stem
    outputs = _heatmaps(amap.values, stem, png, scale)
    message = f"rendered {len(amap.values)} values (bound {float(np.max(np.abs(amap.values))):.6g})"
    arguments = {"out": out, "map_file": map_file, "png": png, "scale": scale}
    return _finish("render", settings, arguments, [map_file], outputs, started, message)


COMMANDS: Dict[str, Callable[..., CommandResult]] = {
    "stress": cmd_stress,
    "train": cmd_train,
    "patterns": cmd_patterns,
    "explain": cmd_explain,
    "degrade": cmd_degrade,
    "render": cmd_render,
}


def cmd_rerun(manifest: Union[str, Path], out: Optional[str] = None) -> CommandResult:
    """
    Re-execute a command from its manifest.

    Args:
        manifest: manifest.json (or the directory holding it)
        out: Output location (default: the recorded one)
    """
    recorded = RunManifest.load(manifest)
    if recorded.command not in COMMANDS:
        raise ConfigError(f"unknown command '{recorded.command}' in manifest", str(manifest))
    settings = Settings.from_dict(recorded.config, source=str(manifest))
    arguments = dict(recorded.arguments)
    if out is not None:
        arguments["out"] = out
    logger.info("rerunning '%s' from %s", recorded.command, manifest)
    return COMMANDS[recorded.command](settings, **arguments)


def run_command(command: Callable[..., CommandResult], *args: Any, **kwargs: Any) -> CommandResult:
    """Call a command and turn toolkit errors into failed results."""
    try:
        return command(*args, **kwargs)
    except (PgigError, FileNotFoundError) as e:
        logger.debug("command failed", exc_info=True)
        return CommandResult.failure(e)
