"""Multi-scale resizing and batch streaming.

Each scale resizes the image so that an 8x8 window stands for a
base_w x base_h region of the original. The resized image is then cut
into 4-pixel-tall vertical batches, streamed band-major then
left-to-right. `pingpong_stream` produces the identical sequence through
a two-lane rotation-fill scheduler and records a trace of it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .imageio import RgbImage

BATCH_ROWS = 4
MIN_TARGET = 8


@dataclass(frozen=True)
class ScaleSpec:
    """One resize target: 8x8 windows in the (target_w, target_h) image
    represent base_w x base_h regions of the original."""

    scale_id: int
    base_w: int
    base_h: int
    target_w: int
    target_h: int


@dataclass(eq=False)
class PixelBatch:
    """Four vertically adjacent pixels of one column.

    `pixels` is (4, 3) uint8, top to bottom. In the last band of an image
    whose height is not a multiple of 4, `valid` < 4 and the trailing rows
    replicate the last valid pixel.
    """

    x: int
    band: int
    pixels: np.ndarray
    valid: int = BATCH_ROWS


@dataclass
class StreamTrace:
    """Scheduler log from `pingpong_stream`.

    emissions holds (lane_id, batch index) per emitted batch; fills holds
    (band, lane_id) per lane load; fetch_workers records, per band, which
    block-fetch worker supplied each of the band's four rows. gap_count is
    the number of post-warm-up scheduler steps that emitted nothing.
    """

    emissions: list[tuple[int, int]] = field(default_factory=list)
    gap_count: int = 0
    warmup_steps: int = 0
    fills: list[tuple[int, int]] = field(default_factory=list)
    fetch_workers: list[tuple[int, ...]] = field(default_factory=list)


def round_half_up_ratio(num: int, den: int) -> int:
    # round-half-up of num/den using exact integer arithmetic
    return (2 * num + den) // (2 * den)


def generate_scales(orig_w: int, orig_h: int, base_sizes: list[int]) -> list[ScaleSpec]:
    """Build the scale set: one spec per (base_w, base_h) in the cross
    product of base_sizes, ids assigned densely in lexicographic order."""
    if orig_w < MIN_TARGET or orig_h < MIN_TARGET:
        raise ValueError(f"image {orig_w}x{orig_h} is smaller than {MIN_TARGET} in a dimension")
    if not base_sizes:
        raise ValueError("base_sizes must be non-empty")
    for b in base_sizes:
        if b < MIN_TARGET:
            raise ValueError(f"base size {b} is smaller than {MIN_TARGET}")
    specs = []
    for base_w in sorted(set(base_sizes)):
        for base_h in sorted(set(base_sizes)):
            tw = max(MIN_TARGET, round_half_up_ratio(orig_w * 8, base_w))
            th = max(MIN_TARGET, round_half_up_ratio(orig_h * 8, base_h))
            specs.append(ScaleSpec(len(specs), base_w, base_h, tw, th))
    return specs


def resize_bilinear(img: RgbImage, spec: ScaleSpec) -> RgbImage:
    """Resize with center-aligned bilinear interpolation.

    Destination pixel centers map to src = (dst + 0.5) * orig/target - 0.5,
    clamped to the image; channel results round half-up to 8 bits. When the
    target equals the source size the output is byte-identical.
    """
    tw, th = spec.target_w, spec.target_h
    if tw == img.width and th == img.height:
        return RgbImage(tw, th, img.data.copy())

    src = img.data.astype(np.float64)

    def axis_coords(target, source):
        s = (np.arange(target) + 0.5) * (source / target) - 0.5
        s = np.clip(s, 0.0, source - 1.0)
        lo = np.floor(s).astype(np.int64)
        hi = np.minimum(lo + 1, source - 1)
        return lo, hi, s - lo

    x0, x1, fx = axis_coords(tw, img.width)
    y0, y1, fy = axis_coords(th, img.height)

    fx = fx[np.newaxis, :, np.newaxis]
    fy = fy[:, np.newaxis, np.newaxis]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    blended = top * (1.0 - fy) + bot * fy
    out = np.floor(blended + 0.5).astype(np.uint8)
    return RgbImage(tw, th, out)


def band_count(height: int) -> int:
    return (height + BATCH_ROWS - 1) // BATCH_ROWS


def stream_batches(img: RgbImage) -> Iterator[PixelBatch]:
    """Yield the image as batches, band-major then left-to-right.

    Valid rows of the batches reassemble the image exactly; the batch count
    is ceil(height/4) * width.
    """
    h = img.height
    for band in range(band_count(h)):
        top = band * BATCH_ROWS
        valid = min(BATCH_ROWS, h - top)
        rows = img.data[top : top + valid]
        if valid < BATCH_ROWS:
            pad = np.repeat(rows[-1:], BATCH_ROWS - valid, axis=0)
            rows = np.concatenate([rows, pad], axis=0)
        for x in range(img.width):
            yield PixelBatch(x=x, band=band, pixels=rows[:, x].copy(), valid=valid)


def _block_of_row(row: int, height: int) -> int:
    # four uniform vertical blocks; the last absorbs the remainder rows
    bh = height // 4
    if bh == 0:
        return 3
    return min(row // bh, 3)


def pingpong_stream(img: RgbImage) -> tuple[list[PixelBatch], StreamTrace]:
    """Run the two-lane Ping-Pong scheduler over the batch stream.

    Four block-fetch workers load one band per lane while the other lane
    drains, alternating lanes per band. The emitted sequence is element-wise
    identical to `stream_batches`; the returned trace records emissions,
    lane fills, the per-band fetch workers, and the gap count (scheduler
    steps after warm-up that emitted nothing).
    """
    batches = list(stream_batches(img))
    w, h = img.width, img.height
    nbands = band_count(h)
    trace = StreamTrace(warmup_steps=w)
    for band in range(nbands):
        trace.fetch_workers.append(
            tuple(_block_of_row(min(band * BATCH_ROWS + i, h - 1), h) for i in range(BATCH_ROWS))
        )

    def band_slice(b):
        return batches[b * w : (b + 1) * w]

    lanes: tuple[deque, deque] = (deque(), deque())
    # warm-up: the first lane is filled completely before any batch is emitted
    lanes[0].extend(band_slice(0))
    trace.fills.append((0, 0))

    pending_fill: deque[tuple[int, PixelBatch]] = deque()
    for b in range(1, nbands):
        trace.fills.append((b, b % 2))
        for batch in band_slice(b):
            pending_fill.append((b % 2, batch))

    # step clock: every step moves one batch into its filling lane and
    # attempts one emission from the draining lane; a starved drain counts
    # as a gap. One-band-ahead filling keeps the two in lockstep.
    out: list[PixelBatch] = []
    drain_band = 0
    emitted_in_band = 0
    while len(out) < len(batches):
        if pending_fill:
            lane_id, batch = pending_fill.popleft()
            lanes[lane_id].append(batch)
        lane = lanes[drain_band % 2]
        if lane:
            trace.emissions.append((drain_band % 2, len(out)))
            out.append(lane.popleft())
            emitted_in_band += 1
            if emitted_in_band == w:
                drain_band += 1
                emitted_in_band = 0
        else:
            trace.gap_count += 1
    return out, trace
