"""Procedural three-class image corpus for pipeline validation.

Each class gets a distinct texture family and color cast, plus seeded
per-pixel noise, so a working pipeline separates them while a broken one
does not: smooth bald patches on a wavy base (class 0), oriented scaly
stripes (class 1), and scattered dark pustule dots (class 2). Image sizes
vary per sample to exercise resizing.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import CLASS_NAMES
from .image import ImageTensor, encode_png
from .seeding import seed_stream

DEFAULT_COUNTS = (65, 45, 40)
# Base colors are chosen for wide chroma separation: equalization rewrites
# local luminance, so class identity must survive in Cb/Cr.
_BASE_COLORS = (
    (0.80, 0.55, 0.45),  # warm pale scalp tones
    (0.45, 0.70, 0.45),  # green-gray plaque cast
    (0.45, 0.50, 0.75),  # bluish inflamed skin
)
NOISE_SIGMA = 0.04
COLOR_JITTER = 0.02


def _coords(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    y, x = np.mgrid[0:h, 0:w]
    return y / max(h - 1, 1), x / max(w - 1, 1)


def _smooth_patches(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    # Low-frequency field with a few bright circular patches.
    y, x = _coords(h, w)
    field = 0.15 * np.sin(2 * np.pi * (rng.uniform(0.5, 1.5) * x + rng.uniform(0.5, 1.5) * y))
    for _ in range(rng.integers(2, 5)):
        cy, cx = rng.uniform(0.2, 0.8, 2)
        r = rng.uniform(0.12, 0.3)
        field += 0.35 * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * r * r))
    return field


def _stripes(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    # Mid-frequency oriented stripes with a plaque-like square-wave edge.
    y, x = _coords(h, w)
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(9.0, 14.0)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * freq * (np.cos(theta) * x + np.sin(theta) * y) + phase)
    return 0.28 * np.sign(wave) * np.abs(wave) ** 0.5


def _dots(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    # Scattered small dark spots on a gentle gradient.
    y, x = _coords(h, w)
    field = 0.1 * (x - 0.5) + 0.1 * (y - 0.5)
    for _ in range(rng.integers(18, 30)):
        cy, cx = rng.uniform(0.05, 0.95, 2)
        r = rng.uniform(0.02, 0.045)
        field -= 0.5 * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * r * r))
    return field


_TEXTURES = (_smooth_patches, _stripes, _dots)


def synthetic_image(label: int, rng: np.random.Generator, height: int, width: int) -> ImageTensor:
    """One procedural sample of the given class."""
    texture = _TEXTURES[label](height, width, rng)
    base = np.array(_BASE_COLORS[label]) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, 3)
    img = base[None, None, :] + texture[:, :, None]
    img = img + rng.normal(0.0, NOISE_SIGMA, img.shape)
    return ImageTensor(np.clip(img, 0.0, 1.0).astype(np.float32))


def write_synthetic_corpus(
    root: str | Path,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    seed: int = 0,
    size_range: tuple[int, int] = (112, 160),
) -> Path:
    """Materialize a corpus as PNGs under `<root>/<class_name>/`."""
    root = Path(root)
    rng = seed_stream(seed, "synthetic")
    for label, (name, count) in enumerate(zip(CLASS_NAMES, counts)):
        class_dir = root / name
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            h = int(rng.integers(size_range[0], size_range[1] + 1))
            w = int(rng.integers(size_range[0], size_range[1] + 1))
            img = synthetic_image(label, rng, h, w)
            (class_dir / f"{name}_{i:03d}.png").write_bytes(encode_png(img))
    return root
