# -*- coding: utf-8 -*-
"""
Heatmap rendering for attribution maps.

Values are mapped onto a diverging colormap with a symmetric bound
max|value|: zero is white, +bound full red, -bound full blue. Images are
written as binary PPM (P6) and, when Pillow is installed, as PNG.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from pgig.core.tensor import Tensor
from pgig.utils.errors import ConfigError, ConfigurationError, DimensionError

Pixels = npt.NDArray[np.uint8]


def diverging_colors(values: Tensor, bound: float) -> Pixels:
    """
    RGB colors (... x 3, uint8) for values within [-bound, bound].

    Example:
        >>> diverging_colors(np.array([-1.0, 0.0, 1.0]), 1.0).tolist()
        [[0, 0, 255], [255, 255, 255], [255, 0, 0]]
    """
    values = np.asarray(values, dtype=np.float64)
    if bound <= 0.0:
        t = np.zeros_like(values)
    else:
        t = np.clip(values / bound, -1.0, 1.0)
    fade = np.rint(255.0 * (1.0 - np.abs(t)))  # channel value away from the hue
    full = np.full_like(t, 255.0)
    red = np.where(t >= 0.0, full, fade)
    blue = np.where(t <= 0.0, full, fade)
    return np.stack([red, fade, blue], axis=-1).astype(np.uint8)


@dataclass(eq=False)
class HeatmapImage:
    """A rendered heatmap (height x width x RGB)."""

    width: int
    height: int
    pixels: Pixels
    bound: float

    @classmethod
    def from_values(cls, values: Tensor, width: Optional[int] = None) -> "HeatmapImage":
        """
        Render flattened or 2-D values.

        A flat map without width must have square length.

        Raises:
            DimensionError: If the values cannot be laid out as an image
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            if width is None:
                width = math.isqrt(values.size)
                if width * width != values.size:
                    raise DimensionError("map length is not a square", values.shape)
            if width < 1 or values.size % width != 0:
                raise DimensionError(f"map length does not divide into rows of {width}",
                                     values.shape)
            values = values.reshape(-1, width)
        elif values.ndim != 2:
            raise DimensionError("heatmaps need a flat or 2-D map", values.shape)

        bound = float(np.max(np.abs(values))) if values.size else 0.0
        return cls(
            width=int(values.shape[1]),
            height=int(values.shape[0]),
            pixels=diverging_colors(values, bound),
            bound=bound,
        )

    def scaled(self, factor: int) -> "HeatmapImage":
        """Nearest-neighbour enlargement by an integer factor."""
        if factor < 1:
            raise ValueError(f"scale factor must be >= 1, got {factor}")
        pixels = np.repeat(np.repeat(self.pixels, factor, axis=0), factor, axis=1)
        return HeatmapImage(self.width * factor, self.height * factor, pixels, self.bound)


def write_ppm(image: HeatmapImage, path: Union[str, Path]) -> str:
    """Write a binary PPM (P6, max value 255)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    path.write_bytes(header + np.ascontiguousarray(image.pixels).tobytes())
    return str(path)


def read_ppm(path: Union[str, Path]) -> Pixels:
    """
    Read a binary PPM written by write_ppm.

    Raises:
        ConfigError: If the file is not a P6 image with max value 255
    """
    data = Path(path).read_bytes()
    fields = data.split(maxsplit=4)
    if len(fields) < 5 or fields[0] != b"P6" or fields[3] != b"255":
        raise ConfigError("not a P6 image with max value 255", str(path))
    width, height = int(fields[1]), int(fields[2])
    body = data[len(data) - width * height * 3:]
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)


def write_png(image: HeatmapImage, path: Union[str, Path]) -> str:
    """
    Write a PNG through Pillow.

    Raises:
        ConfigurationError: If Pillow is not installed
    """
    try:
        from PIL import Image
    except ImportError:
        raise ConfigurationError(
            "PNG output needs Pillow; install it with: pip install 'pgig[png]'"
        ) from None

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image.pixels).save(path, format="PNG")
    return str(path)
