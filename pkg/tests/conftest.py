"""Shared fixtures: a small synthetic SOCOFing-style dataset."""
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

IMAGE_SIZE = 40

REAL_NAMES = [
    "1__M_Left_index_finger.BMP",
    "1__M_Right_thumb_finger.BMP",
    "2__F_Left_index_finger.BMP",
    "2__F_Right_thumb_finger.BMP",
]

# Altered directory -> method tags applied to every real print
ALTERED_TAGS = {
    "Easy": ["Obl", "CR"],
    "Medium": ["Zcut"],
    "Hard": ["Obl"],
}

EXPECTED_COUNTS = {"Real": 4, "Easy": 8, "Medium": 4, "Hard": 4, "total": 20}


def ridge_pattern(angle: float, period: float, seed: int, size: int = IMAGE_SIZE) -> np.ndarray:
    """Oriented sinusoidal ridges with a little noise, as uint8."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    phase = (x * np.cos(angle) + y * np.sin(angle)) * 2 * np.pi / period
    noise = np.random.default_rng(seed).normal(0, 6, size=(size, size))
    return np.clip(np.rint(128 + 100 * np.sin(phase) + noise), 0, 255).astype(np.uint8)


def _write_bmp(pixels: np.ndarray, path: Path) -> None:
    Image.fromarray(pixels).save(path, format="BMP")


def build_socofing_tree(root: Path) -> Path:
    """Write Real/Easy/Medium/Hard directories of synthetic BMP prints under root."""
    real_dir = root / "Real"
    real_dir.mkdir(parents=True)
    for index, name in enumerate(REAL_NAMES):
        angle = 0.4 + 0.7 * index
        _write_bmp(ridge_pattern(angle, 6 + index, seed=index), real_dir / name)

    for level_index, (level, tags) in enumerate(ALTERED_TAGS.items()):
        level_dir = root / level
        level_dir.mkdir()
        for index, name in enumerate(REAL_NAMES):
            angle = 0.4 + 0.7 * index
            for tag_index, tag in enumerate(tags):
                pixels = ridge_pattern(angle + 0.05 * (level_index + 1), 6 + index, seed=100 + 10 * index + tag_index)
                # Obliterate a patch, larger for harder levels
                patch = 4 * (level_index + 1)
                pixels[2:2 + patch, 2:2 + patch] = 255
                _write_bmp(pixels, level_dir / name.replace(".BMP", f"_{tag}.BMP"))
    return root


@pytest.fixture
def socofing_root(tmp_path):
    """Synthetic dataset root with 4 real and 16 altered prints."""
    return build_socofing_tree(tmp_path / "socofing")


@pytest.fixture
def fixtures_dir():
    """Repository fixtures directory (published reference tables)."""
    return Path(__file__).resolve().parent.parent / "fixtures"
