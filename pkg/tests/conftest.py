import numpy as np
import pytest

from uwqa import ImageBuffer, MetricConfig


def buf(arr) -> ImageBuffer:
    return ImageBuffer(pixels=np.asarray(arr, dtype=np.uint8))


def solid(w, h, rgb) -> ImageBuffer:
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[:, :] = rgb
    return ImageBuffer(pixels=arr)


def checkerboard(w, h, a, b, tile=8) -> ImageBuffer:
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    mask = ((yy // tile) + (xx // tile)) % 2 == 0
    arr[mask] = a
    arr[~mask] = b
    return ImageBuffer(pixels=arr)


def random_image(rng, w, h) -> ImageBuffer:
    return ImageBuffer(pixels=rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def synthetic_corpus(n=20, seed=7):
    """Mixed corpus: noise, gradients, checkers, low-contrast, color casts."""
    rng = np.random.default_rng(seed)
    images = []
    for k in range(n):
        w, h = int(rng.integers(24, 49)), int(rng.integers(24, 49))
        kind = k % 5
        if kind == 0:
            img = random_image(rng, w, h)
        elif kind == 1:
            ramp = np.linspace(0, 255, w, dtype=np.uint8)
            arr = np.stack([np.tile(ramp, (h, 1))] * 3, axis=-1)
            arr[:, :, 2] = 255 - arr[:, :, 2]
            img = buf(arr)
        elif kind == 2:
            img = checkerboard(w, h, (200, 40, 40), (30, 30, 200), tile=5)
        elif kind == 3:
            base = rng.integers(90, 140, (h, w, 3))
            img = buf(np.clip(base + rng.integers(-8, 9, (h, w, 3)), 0, 255))
        else:
            arr = rng.integers(0, 256, (h, w, 3))
            arr[:, :, 0] = arr[:, :, 0] // 3  # heavy blue-green cast
            img = buf(arr)
        images.append(img)
    return images


@pytest.fixture(scope="session")
def cfg():
    return MetricConfig()


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus()
