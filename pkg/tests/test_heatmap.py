# -*- coding: utf-8 -*-
"""
Tests for heatmap.py

Tests the diverging colormap and the PPM/PNG writers.
"""

from pathlib import Path

import numpy as np
import pytest

from pgig.cli.heatmap import HeatmapImage, diverging_colors, read_ppm, write_png, write_ppm
from pgig.utils.errors import ConfigError, ConfigurationError, DimensionError


class TestColormap:
    """Tests for the red/white/blue colormap."""

    def test_anchors(self):
        """Test white at zero, red at +bound and blue at -bound."""
        colors = diverging_colors(np.array([-2.0, 0.0, 2.0]), 2.0)
        assert colors.tolist() == [[0, 0, 255], [255, 255, 255], [255, 0, 0]]

    def test_symmetric(self):
        """Test that +v and -v get mirrored colors."""
        values = np.linspace(0.0, 1.0, 11)
        pos = diverging_colors(values, 1.0)
        neg = diverging_colors(-values, 1.0)
        assert np.array_equal(pos[:, 0], neg[:, 2])
        assert np.array_equal(pos[:, 1], neg[:, 1])

    def test_half_value(self):
        """Test that half the bound fades the other channels halfway."""
        assert diverging_colors(np.array([0.5]), 1.0).tolist() == [[255, 128, 128]]

    def test_zero_bound_is_white(self):
        """Test that an all-zero map renders all white."""
        assert np.all(diverging_colors(np.zeros(4), 0.0) == 255)


class TestHeatmapImage:
    """Tests for laying out maps as images."""

    def test_square_map(self):
        """Test that a flat square map becomes side x side."""
        image = HeatmapImage.from_values(np.arange(16, dtype=np.float64) - 8.0)
        assert (image.width, image.height, image.bound) == (4, 4, 8.0)
        assert image.pixels.shape == (4, 4, 3)

    def test_non_square_map(self):
        """Test that a flat non-square map needs a width."""
        with pytest.raises(DimensionError):
            HeatmapImage.from_values(np.ones(6))
        assert HeatmapImage.from_values(np.ones(6), width=3).height == 2

    def test_scaled(self):
        """Test nearest-neighbour enlargement."""
        image = HeatmapImage.from_values(np.array([1.0, -1.0, 0.0, 0.0])).scaled(3)
        assert (image.width, image.height) == (6, 6)
        assert image.pixels[0:3, 0:3].reshape(-1, 3).tolist() == [[255, 0, 0]] * 9


class TestWriters:
    """Tests for PPM and PNG output."""

    def test_ppm_bytes(self, tmp_path):
        """Test the P6 header and raw RGB body."""
        image = HeatmapImage.from_values(np.array([1.0, 0.0, 0.0, -1.0]))
        path = write_ppm(image, tmp_path / "map.ppm")
        data = Path(path).read_bytes()
        assert data.startswith(b"P6\n2 2\n255\n")
        assert data[len(b"P6\n2 2\n255\n"):] == bytes(
            [255, 0, 0, 255, 255, 255, 255, 255, 255, 0, 0, 255])

    def test_ppm_read_back(self, tmp_path):
        """Test that read_ppm returns the written pixels."""
        image = HeatmapImage.from_values(np.random.default_rng(0).normal(size=25))
        path = write_ppm(image, tmp_path / "map.ppm")
        assert np.array_equal(read_ppm(path), image.pixels)

    def test_read_foreign_file(self, tmp_path):
        """Test that non-P6 files are rejected."""
        path = tmp_path / "text.ppm"
        path.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        with pytest.raises(ConfigError):
            read_ppm(path)

    def test_png(self, tmp_path):
        """Test PNG output through Pillow."""
        Image = pytest.importorskip("PIL.Image")
        image = HeatmapImage.from_values(np.array([1.0, 0.0, 0.0, -1.0]))
        path = write_png(image, tmp_path / "map.png")
        with Image.open(path) as png:
            assert png.size == (2, 2)
            assert png.getpixel((0, 0)) == (255, 0, 0)
            assert png.getpixel((1, 1)) == (0, 0, 255)

    def test_png_without_pillow(self, tmp_path, mocker):
        """Test the error when Pillow is missing."""
        mocker.patch.dict("sys.modules", {"PIL": None})
        image = HeatmapImage.from_values(np.zeros(4))
        with pytest.raises(ConfigurationError, match="Pillow"):
            write_png(image, tmp_path / "map.png")
