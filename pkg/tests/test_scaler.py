"""Scale generation, bilinear resizing, batch streaming, and the Ping-Pong
scheduler."""

from itertools import groupby

import numpy as np
import pytest

from streamprop import (
    RgbImage,
    generate_scales,
    pingpong_stream,
    resize_bilinear,
    stream_batches,
)
from streamprop.scaler import ScaleSpec, band_count, round_half_up_ratio

from helpers import batches_equal, make_image, random_image


def test_round_half_up_ratio():
    assert round_half_up_ratio(200, 16) == 13  # 12.5 rounds up
    assert round_half_up_ratio(7, 2) == 4  # 3.5 rounds up
    assert round_half_up_ratio(6, 4) == 2  # 1.5 rounds up
    assert round_half_up_ratio(5, 4) == 1
    assert round_half_up_ratio(240, 16) == 15


def test_generate_scales_default_cross_product():
    specs = generate_scales(640, 480, [16, 32, 64, 128, 256])
    assert len(specs) == 25
    assert [s.scale_id for s in specs] == list(range(25))
    pairs = [(s.base_w, s.base_h) for s in specs]
    assert pairs == sorted(pairs)
    first = specs[0]
    assert (first.base_w, first.base_h) == (16, 16)
    assert (first.target_w, first.target_h) == (320, 240)


def test_generate_scales_rounds_and_floors():
    (spec,) = generate_scales(25, 100, [16])
    assert spec.target_w == 13  # 25*8/16 = 12.5 rounds half-up
    assert spec.target_h == 50
    (tiny,) = generate_scales(13, 100, [256])
    assert tiny.target_w == 8  # 13*8/256 < 8 floors at the window size
    assert tiny.target_h == 8  # 100*8/256 = 3.125 floors as well
    (tall,) = generate_scales(13, 400, [256])
    assert tall.target_h == 13  # 400*8/256 = 12.5 rounds half-up


def test_generate_scales_dedupes_base_sizes():
    specs = generate_scales(64, 64, [32, 16, 16])
    assert [(s.base_w, s.base_h) for s in specs] == [
        (16, 16),
        (16, 32),
        (32, 16),
        (32, 32),
    ]


@pytest.mark.parametrize(
    "w, h, bases",
    [(7, 64, [16]), (64, 7, [16]), (64, 64, []), (64, 64, [16, 4])],
)
def test_generate_scales_rejects_bad_inputs(w, h, bases):
    with pytest.raises(ValueError):
        generate_scales(w, h, bases)


def test_scale_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(50):
        w = int(rng.integers(8, 500))
        h = int(rng.integers(8, 500))
        specs = generate_scales(w, h, [16, 32, 64, 128, 256])
        by_h = {}
        for s in specs:
            by_h.setdefault(s.base_h, []).append((s.base_w, s.target_w))
        for entries in by_h.values():
            widths = [tw for _, tw in sorted(entries)]
            assert widths == sorted(widths, reverse=True)


def test_resize_identity_is_byte_exact():
    rng = np.random.default_rng(6)
    img = random_image(rng, width=19, height=11)
    spec = ScaleSpec(0, 8, 8, 19, 11)
    out = resize_bilinear(img, spec)
    assert np.array_equal(out.data, img.data)


def test_resize_average_rounds_half_up():
    img = make_image(np.array([[[10, 10, 10], [11, 11, 11]]]))
    out = resize_bilinear(img, ScaleSpec(0, 8, 8, 1, 1))
    assert out.data.tolist() == [[[11, 11, 11]]]  # 10.5 rounds up


def test_resize_downscale_two_by_two():
    grid = np.array(
        [[[0, 0, 0], [10, 10, 10]], [[20, 20, 20], [30, 30, 30]]], dtype=np.uint8
    )
    out = resize_bilinear(make_image(grid), ScaleSpec(0, 8, 8, 1, 1))
    assert out.data.tolist() == [[[15, 15, 15]]]


def test_resize_constant_image_stays_constant():
    img = make_image(np.full((10, 14, 3), 77, dtype=np.uint8))
    out = resize_bilinear(img, ScaleSpec(0, 8, 8, 9, 33))
    assert (out.width, out.height) == (9, 33)
    assert np.all(out.data == 77)


def test_resize_stays_within_channel_range():
    rng = np.random.default_rng(7)
    for _ in range(20):
        img = random_image(rng, lo=8, hi=40)
        tw = int(rng.integers(8, 80))
        th = int(rng.integers(8, 80))
        out = resize_bilinear(img, ScaleSpec(0, 8, 8, tw, th))
        for c in range(3):
            src = img.data[:, :, c]
            dst = out.data[:, :, c]
            assert dst.min() >= src.min()
            assert dst.max() <= src.max()


def test_band_count():
    assert band_count(4) == 1
    assert band_count(5) == 2
    assert band_count(8) == 2
    assert band_count(6) == 2


def test_stream_batches_square_image():
    rng = np.random.default_rng(8)
    img = random_image(rng, width=4, height=4)
    batches = list(stream_batches(img))
    assert len(batches) == 4
    for k, batch in enumerate(batches):
        assert (batch.x, batch.band, batch.valid) == (k, 0, 4)
        assert np.array_equal(batch.pixels, img.data[0:4, k])


def test_stream_batches_pads_last_band():
    rng = np.random.default_rng(9)
    img = random_image(rng, width=1, height=6)
    batches = list(stream_batches(img))
    assert len(batches) == 2
    assert batches[0].valid == 4
    assert batches[1].valid == 2
    assert np.array_equal(batches[1].pixels[:2], img.data[4:6, 0])
    assert np.array_equal(batches[1].pixels[2], img.data[5, 0])
    assert np.array_equal(batches[1].pixels[3], img.data[5, 0])


def test_stream_batches_reassembles_image():
    rng = np.random.default_rng(10)
    for _ in range(20):
        img = random_image(rng, lo=1, hi=33)
        rebuilt = np.zeros_like(img.data)
        count = 0
        for batch in stream_batches(img):
            top = batch.band * 4
            rebuilt[top : top + batch.valid, batch.x] = batch.pixels[: batch.valid]
            count += batch.valid
        assert count == img.width * img.height
        assert np.array_equal(rebuilt, img.data)
        assert len(list(stream_batches(img))) == band_count(img.height) * img.width


def test_pingpong_equals_plain_stream():
    rng = np.random.default_rng(11)
    for _ in range(10):
        img = random_image(rng, lo=8, hi=48)
        out, _ = pingpong_stream(img)
        assert batches_equal(out, stream_batches(img))


def test_pingpong_trace_alternates_lanes():
    rng = np.random.default_rng(12)
    img = random_image(rng, width=16, height=16)
    _, trace = pingpong_stream(img)
    groups = [lane for lane, _ in groupby(lane for lane, _ in trace.emissions)]
    assert groups[:4] == [0, 1, 0, 1]
    assert trace.fills == [(0, 0), (1, 1), (2, 0), (3, 1)]
    assert trace.warmup_steps == 16


def test_pingpong_runs_gap_free():
    rng = np.random.default_rng(13)
    for _ in range(10):
        img = random_image(rng, lo=32, hi=64)
        _, trace = pingpong_stream(img)
        assert trace.gap_count == 0


def test_pingpong_fetch_workers_rotate():
    rng = np.random.default_rng(14)
    img = random_image(rng, width=9, height=32)
    _, trace = pingpong_stream(img)
    flat = [w for band in trace.fetch_workers for w in band]
    assert flat == sorted(flat)
    assert set(flat) == {0, 1, 2, 3}
