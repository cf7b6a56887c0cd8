import numpy as np
import pytest
from PIL import Image


def _write_images(directory, count, seed, size=(48, 40)):
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        pixels = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        Image.fromarray(pixels, "RGB").save(directory / f"img_{i:03d}.png")


@pytest.fixture
def fixture_dirs(tmp_path):
    """Two labeled directories with 10 images total (6 real, 4 generated)."""
    real = tmp_path / "real"
    fake = tmp_path / "progan"
    _write_images(real, 6, seed=1)
    _write_images(fake, 4, seed=2)
    return real, fake
