from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from follicle.image import ImageTensor

sys.path.insert(0, str(Path(__file__).parent))  # makes `reference` importable

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def random_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> ImageTensor:
    return ImageTensor.from_array(rng.random((h, w, c), dtype=np.float32))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xF0111C13)
