# -*- coding: utf-8 -*-
"""
Class template management for pgig.

This module loads the shape templates of the synthetic image task
(horizontal bar, vertical bar, cross, diagonal) from shape_templates.json
and renders them as boolean pixel masks.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from pgig.utils.errors import ConfigError

Mask = npt.NDArray[np.bool_]


@dataclass
class ShapeTemplate:
    """A class template: rectangles and/or a diagonal stroke on a square grid."""

    id: str  # Template ID (e.g., "cross")
    name: str  # Display name
    description: str
    rectangles: List[Tuple[int, int, int, int]] = field(default_factory=list)  # row, col, h, w
    diagonal: Optional[Dict[str, object]] = None  # {"anti": bool, "width": int}


def get_templates_path() -> Path:
    """
    Get path to shape_templates.json file.

    Returns:
        Path: Path to templates file

    Raises:
        FileNotFoundError: If templates file not found
    """
    # Try multiple locations
    locations = [
        # Relative to this file (development)
        Path(__file__).parent.parent.parent.parent / "data" / "shape_templates.json",
        # Current working directory
        Path.cwd() / "data" / "shape_templates.json",
        # Installed package
        Path(__file__).parent.parent / "data" / "shape_templates.json",
    ]

    for path in locations:
        if path.exists():
            return path

    raise FileNotFoundError(
        f"shape_templates.json not found. Tried: {', '.join(str(p) for p in locations)}"
    )


def load_templates() -> Dict[str, ShapeTemplate]:
    """
    Load all shape templates, in file order.

    Returns:
        Dict[str, ShapeTemplate]: Dictionary of template_id -> ShapeTemplate

    Raises:
        FileNotFoundError: If templates file not found
        ConfigError: If an entry is malformed

    Example:
        >>> templates = load_templates()
        >>> list(templates)
        ['horizontal_bar', 'vertical_bar', 'cross', 'diagonal']
    """
    templates_path = get_templates_path()

    with open(templates_path, "r", encoding="utf-8") as f:
        data = json.load(f)

    templates: Dict[str, ShapeTemplate] = {}

    for template_id, template_data in data.items():
        try:
            template = ShapeTemplate(
                id=template_id,
                name=template_data["name"],
                description=template_data["description"],
                rectangles=[tuple(r) for r in template_data.get("rectangles", [])],
                diagonal=template_data.get("diagonal"),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"invalid template '{template_id}': {e}", str(templates_path)) from e
        templates[template_id] = template

    return templates


def get_template(template_id: str) -> Optional[ShapeTemplate]:
    """
    Get a specific template by ID.

    Returns:
        ShapeTemplate or None if not found
    """
    return load_templates().get(template_id)


def list_templates() -> List[ShapeTemplate]:
    """Get list of all available templates in file order."""
    return list(load_templates().values())


def render_template(template: ShapeTemplate, side: int) -> Mask:
    """
    Render a template as a side x side boolean mask.

    Rectangles are clipped to the grid. A diagonal of width w covers the
    pixels with 0 <= row - col < w (or, for the anti-diagonal,
    0 <= (side - 1) - (row + col) < w).

    Example:
        >>> render_template(get_template("horizontal_bar"), 16).sum()
        24
    """
    mask = np.zeros((side, side), dtype=bool)

    for row, col, height, width in template.rectangles:
        mask[max(row, 0):min(row + height, side), max(col, 0):min(col + width, side)] = True

    if template.diagonal:
        width = int(template.diagonal.get("width", 1))  # type: ignore[call-overload]
        rows, cols = np.indices((side, side))
        offset = (side - 1) - (rows + cols) if template.diagonal.get("anti") else rows - cols
        mask |= (offset >= 0) & (offset < width)

    return mask


def template_overlap(a: Mask, b: Mask) -> float:
    """Shared active pixels relative to the smaller template."""
    smaller = min(int(a.sum()), int(b.sum()))
    if smaller == 0:
        return 0.0
    return float(np.count_nonzero(a & b)) / smaller


if __name__ == "__main__":
    print("=== pgig shape templates ===\n")
    for t in list_templates():
        print(f"  - {t.name} ({t.id}): {int(render_template(t, 16).sum())} pixels")
