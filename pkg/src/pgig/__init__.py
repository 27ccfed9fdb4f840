# -*- coding: utf-8 -*-
"""
pgig - Pattern-guided integrated gradients toolkit.

A small dense-network engine with gradient attribution methods, the
saturation/distractor stress test and an image degradation benchmark.
"""

__version__ = "0.1.0"
__author__ = "pgig contributors"
