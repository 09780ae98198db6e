import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from albp.image_core import GrayImage, save_image


def make_toy_dataset(root: Path, classes=("cyst", "normal", "stone", "tumor"),
                     per_class=10, size=24, seed=7) -> Path:
    """Directory-per-class tree of small seeded random PGM images.

    Each class gets a distinct mean intensity so descriptors carry signal.
    """
    rng = np.random.default_rng(seed)
    for ci, name in enumerate(classes):
        d = root / name
        d.mkdir(parents=True)
        for i in range(per_class):
            base = 40 + 50 * ci
            px = np.clip(rng.normal(base, 25, size=(size, size)), 0, 255).astype(np.uint8)
            save_image(GrayImage(px), d / f"img{i:03d}.pgm")
    return root


@pytest.fixture
def toy_dataset(tmp_path):
    return make_toy_dataset(tmp_path / "data")
