"""Shared test fixtures: random images and models, planted-square datasets,
and the hand-crafted ring weight template used by the end-to-end tests."""

from __future__ import annotations

import numpy as np

from streamprop import BoundingBox, RgbImage, SvmModel, write_ppm

BG = np.array([96, 96, 96], dtype=np.uint8)
FG = np.array([220, 60, 40], dtype=np.uint8)

# square sizes straddle the 16 and 32 base scales, skipping the sizes
# between them that neither window shape covers at IoU 0.5
SQUARE_SIZES = list(range(14, 21)) + list(range(26, 37))


def make_image(arr) -> RgbImage:
    arr = np.asarray(arr, dtype=np.uint8)
    return RgbImage(arr.shape[1], arr.shape[0], arr)


def random_image(rng, width=None, height=None, lo=8, hi=64) -> RgbImage:
    w = int(rng.integers(lo, hi + 1)) if width is None else width
    h = int(rng.integers(lo, hi + 1)) if height is None else height
    return make_image(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def random_int_model(rng, span=50) -> SvmModel:
    return SvmModel(rng.integers(-span, span + 1, size=64).astype(np.float64), {})


def random_float_model(rng) -> SvmModel:
    return SvmModel(rng.standard_normal(64), {})


def ring_weights() -> np.ndarray:
    """Center-surround template: positive double ring, negative interior.
    Windows that frame a high-contrast square score high; windows inside
    flat regions score zero and windows straddling an edge score low."""
    w = np.zeros((8, 8))
    w[0, :] = w[7, :] = w[:, 0] = w[:, 7] = 2.0
    w[1, 1:7] = w[6, 1:7] = 1.0
    w[1:7, 1] = w[1:7, 6] = 1.0
    w[2:6, 2:6] = -2.0
    return w.reshape(64)


def ring_model() -> SvmModel:
    return SvmModel(ring_weights(), {})


def square_image(x0: int, y0: int, size: int, dim: int = 64) -> RgbImage:
    arr = np.tile(BG, (dim, dim, 1)).astype(np.uint8)
    arr[y0 : y0 + size, x0 : x0 + size] = FG
    return make_image(arr)


def random_square_case(rng, dim: int = 64) -> tuple[RgbImage, BoundingBox]:
    size = int(rng.choice(SQUARE_SIZES))
    x0 = int(rng.integers(2, dim - size - 2))
    y0 = int(rng.integers(2, dim - size - 2))
    return square_image(x0, y0, size, dim), BoundingBox(x0, y0, x0 + size - 1, y0 + size - 1)


def write_square_dataset(rng, n: int, image_dir, ann_path) -> list[tuple[str, BoundingBox]]:
    """Write n planted-square images plus an annotation CSV; returns the
    (image_id, box) pairs."""
    image_dir.mkdir(parents=True, exist_ok=True)
    cases = []
    lines = []
    for i in range(n):
        img, box = random_square_case(rng)
        image_id = f"sq{i:03d}"
        write_ppm(img, image_dir / f"{image_id}.ppm")
        lines.append(f"{image_id},square,{box.x0},{box.y0},{box.x1},{box.y1}")
        cases.append((image_id, box))
    ann_path.write_text("\n".join(lines) + "\n")
    return cases


def batches_equal(a, b) -> bool:
    a, b = list(a), list(b)
    if len(a) != len(b):
        return False
    return all(
        p.x == q.x and p.band == q.band and p.valid == q.valid
        and np.array_equal(p.pixels, q.pixels)
        for p, q in zip(a, b)
    )


def write_model_file(model: SvmModel, path) -> None:
    lines = [repr(float(w)) for w in model.weights]
    for scale_id in sorted(model.calib):
        v, t = model.calib[scale_id]
        lines.append(f"{scale_id} {v!r} {t!r}")
    path.write_text("\n".join(lines) + "\n")
