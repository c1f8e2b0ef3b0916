"""Deterministic synthetic test images.

The default desk-scale suite is 64x64: piecewise-constant shapes, a smooth
gradient and a checkerboard texture, all generated from fixed parameters or
a caller-supplied seed so every run sees identical data.
"""

from __future__ import annotations

import numpy as np


def blocks(size: int = 64, levels=(0.2, 0.5, 0.8), count: int = 6,
           seed: int = 0) -> np.ndarray:
    """Random axis-aligned rectangles at the given intensity levels."""
    rng = np.random.default_rng(seed)
    img = np.full((size, size), levels[0], dtype=np.float64)
    for _ in range(count):
        level = levels[int(rng.integers(1, len(levels)))]
        h = int(rng.integers(size // 8, size // 2))
        w = int(rng.integers(size // 8, size // 2))
        top = int(rng.integers(0, size - h))
        left = int(rng.integers(0, size - w))
        img[top:top + h, left:left + w] = level
    return img


def disk(size: int = 64, background: float = 0.25, foreground: float = 0.85,
         radius_fraction: float = 0.3) -> np.ndarray:
    """A filled disk on a constant background."""
    img = np.full((size, size), background, dtype=np.float64)
    yy, xx = np.mgrid[0:size, 0:size]
    centre = (size - 1) / 2.0
    mask = (yy - centre) ** 2 + (xx - centre) ** 2 <= (radius_fraction * size) ** 2
    img[mask] = foreground
    return img


def ramp(size: int = 64) -> np.ndarray:
    """Horizontal linear gradient from 0 to 1."""
    row = np.linspace(0.0, 1.0, size)
    return np.tile(row, (size, 1))


def checkerboard(size: int = 64, cell: int = 8, low: float = 0.15,
                 high: float = 0.85) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return low + (high - low) * board


def default_suite(size: int = 64) -> list:
    """The standard named test set: (name, image) pairs."""
    return [
        ("blocks", blocks(size)),
        ("disk", disk(size)),
        ("ramp", ramp(size)),
        ("checker", checkerboard(size)),
    ]


def piecewise_suite(size: int = 64, levels=(0.2, 0.5, 0.8), count: int = 3,
                    seed: int = 7) -> list:
    """Several piecewise-constant images whose values lie on ``levels``."""
    return [(f"piecewise{i}", blocks(size, levels=levels, seed=seed + i))
            for i in range(count)]
