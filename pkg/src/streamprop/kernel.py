"""Computation core: normed gradients, 8x8 window SVM scores, and 5x5 tiled NMS.

Every stage exists twice: a dense whole-image reference (calc_gradients_dense,
svm_score_dense, nms_select_dense) and a streaming counterpart inside
KernelStream that consumes a pixel-batch stream through bounded line buffers.
The two are equal by contract, candidate for candidate, in the same order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .imageio import RgbImage, SvmModel
from .scaler import BATCH_ROWS, PixelBatch

WINDOW = 8
NMS_TILE = 5
DEFAULT_FIFO_CAPACITY = 64


class StreamOrderError(RuntimeError):
    """The batch stream violated band-major, left-to-right order."""


@dataclass(eq=False)
class GradientMap:
    """Per-pixel saturated gradients, (height, width) uint8, dims equal to
    the source image's."""

    width: int
    height: int
    values: np.ndarray


@dataclass(eq=False)
class ScoreMap:
    """One signed score per 8x8 window anchor (anchor = top-left pixel),
    (win_h, win_w) with win_w = width-7, win_h = height-7."""

    win_w: int
    win_h: int
    values: np.ndarray


@dataclass(frozen=True)
class Candidate:
    """An NMS survivor: window anchor in resized coordinates plus its
    stage-I score."""

    scale_id: int
    x: int
    y: int
    score: float


@dataclass
class StageIo:
    """Item and buffer accounting for one streaming stage.

    Items are the stage's natural unit: batches into the gradient stage,
    gradient values out of it and into the SVM stage, window scores out of
    the SVM stage and into NMS, candidates out of NMS. peak_rows is the
    largest number of input rows the stage's line buffer held at once.
    """

    items_in: int = 0
    items_out: int = 0
    peak_rows: int = 0


@dataclass
class StageStats:
    """Statistics record for one KernelStream run."""

    scale_id: int = -1
    fifo_capacity: int = DEFAULT_FIFO_CAPACITY
    gradient: StageIo = field(default_factory=StageIo)
    svm: StageIo = field(default_factory=StageIo)
    nms: StageIo = field(default_factory=StageIo)
    staging_peak_rows: int = 0
    fifo_peak: int = 0


def rgb_distance(a, b) -> int:
    """Chebyshev distance in RGB space: the largest per-channel absolute
    difference, in [0, 255]."""
    return max(abs(int(a[0]) - int(b[0])), abs(int(a[1]) - int(b[1])), abs(int(a[2]) - int(b[2])))


def _chebyshev_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # per-pixel channel-max absolute difference; int16 holds the range
    return np.max(np.abs(a.astype(np.int16) - b.astype(np.int16)), axis=-1)


def _gradient_row(above: np.ndarray, row: np.ndarray, below: np.ndarray) -> np.ndarray:
    """Saturated gradient of one pixel row given its vertical neighbors
    (border rows pass themselves). Horizontal neighbors clamp at the edges."""
    vert = _chebyshev_rows(above, below)
    left = np.concatenate([row[:1], row[:-1]], axis=0)
    right = np.concatenate([row[1:], row[-1:]], axis=0)
    horiz = _chebyshev_rows(left, right)
    return np.minimum(horiz + vert, 255).astype(np.uint8)


def calc_gradients_dense(img: RgbImage) -> GradientMap:
    """Per-pixel saturated gradient map: G = min(Ix + Iy, 255) where Ix/Iy
    are the RGB distances between the horizontal/vertical neighbor pairs,
    with out-of-range neighbors clamped to the border pixel."""
    p = img.data
    padded = np.pad(p, ((1, 1), (1, 1), (0, 0)), mode="edge")
    horiz = _chebyshev_rows(padded[1:-1, :-2], padded[1:-1, 2:])
    vert = _chebyshev_rows(padded[:-2, 1:-1], padded[2:, 1:-1])
    g = np.minimum(horiz + vert, 255).astype(np.uint8)
    return GradientMap(img.width, img.height, g)


def _score_dtype(model: SvmModel):
    # integer weights score exactly in int64; anything else runs in float64
    return np.int64 if model.is_integral else np.float64


def window_row_sums(rows: np.ndarray, wrow: np.ndarray) -> np.ndarray:
    """Sliding 8-wide dot products along the last axis.

    The multiply-adds run in a fixed left-to-right order so the dense and
    streaming paths round identically for non-integral weights.
    """
    n = rows.shape[-1] - (WINDOW - 1)
    acc = wrow[0] * rows[..., 0:n]
    for c in range(1, WINDOW):
        acc = acc + wrow[c] * rows[..., c : c + n]
    return acc


def svm_score_dense(grad: GradientMap, model: SvmModel) -> ScoreMap:
    """Score every 8x8 window: the row-major reshape of its gradients dotted
    with the 64 weights, anchors dense with stride 1.

    Computed as eight per-row partial sums combined top to bottom, which is
    also how the streaming stage accumulates them.
    """
    if grad.width < WINDOW or grad.height < WINDOW:
        raise ValueError(f"gradient map {grad.width}x{grad.height} is smaller than 8x8")
    dtype = _score_dtype(model)
    g = grad.values.astype(dtype)
    w = model.weights.astype(dtype)
    win_w = grad.width - (WINDOW - 1)
    win_h = grad.height - (WINDOW - 1)
    scores = None
    for r in range(WINDOW):
        partial = window_row_sums(g, w[WINDOW * r : WINDOW * (r + 1)])
        strip = partial[r : r + win_h]
        scores = strip if scores is None else scores + strip
    return ScoreMap(win_w, win_h, scores)


def _strip_candidates(rows: np.ndarray, y0: int, scale_id: int) -> list[Candidate]:
    """Candidates of one horizontal tile strip (rows: at most 5 score rows
    starting at window row y0), in tile order left to right."""
    out = []
    win_w = rows.shape[1]
    for tx in range(0, win_w, NMS_TILE):
        block = rows[:, tx : tx + NMS_TILE]
        flat = int(np.argmax(block))  # first max in row-major order = smallest (y, x)
        ly, lx = divmod(flat, block.shape[1])
        out.append(Candidate(scale_id, tx + lx, y0 + ly, block[ly, lx].item()))
    return out


def nms_select_dense(scores: ScoreMap, scale_id: int) -> list[Candidate]:
    """One candidate per non-overlapping 5x5 score tile (anchored at (0,0),
    edge tiles partial): the tile maximum, ties to the smallest (y, x).
    Output is tile-row-major."""
    out = []
    for ty in range(0, scores.win_h, NMS_TILE):
        out.extend(_strip_candidates(scores.values[ty : ty + NMS_TILE], ty, scale_id))
    return out


def dense_candidates(img: RgbImage, model: SvmModel, scale_id: int) -> list[Candidate]:
    """The dense composition: gradients -> window scores -> tiled NMS."""
    return nms_select_dense(svm_score_dense(calc_gradients_dense(img), model), scale_id)


class _RowAssembler:
    """Collects batches into complete pixel rows, validating stream order.

    Rows complete a band at a time; the staging buffer holds the four rows
    of the in-flight band and nothing else.
    """

    def __init__(self, stats: StageStats):
        self.stats = stats
        self.width: int | None = None
        self.band = 0
        self.next_x = 0
        self.valid = BATCH_ROWS
        self.columns: list[np.ndarray] = []  # band 0, width still unknown
        self.buf: np.ndarray | None = None  # later bands, (4, width, 3)
        self.total_rows = 0

    def _fix_width(self) -> None:
        self.width = self.next_x
        if self.width < WINDOW:
            raise ValueError(f"batch stream is {self.width} columns wide, need at least {WINDOW}")

    def _close_band(self) -> list[tuple[int, np.ndarray]]:
        if self.buf is None:
            band_pixels = np.stack(self.columns, axis=1)
            self.columns = []
        else:
            band_pixels = self.buf
        top = self.band * BATCH_ROWS
        rows = [(top + i, band_pixels[i].copy()) for i in range(self.valid)]
        self.total_rows += self.valid
        return rows

    def push(self, batch: PixelBatch) -> list[tuple[int, np.ndarray]]:
        if not 1 <= batch.valid <= BATCH_ROWS:
            raise StreamOrderError(f"batch valid count {batch.valid} outside 1..{BATCH_ROWS}")
        done: list[tuple[int, np.ndarray]] = []
        if batch.band == self.band + 1:
            if self.width is None:
                self._fix_width()
            elif self.next_x != self.width:
                raise StreamOrderError(
                    f"band {self.band} ended after {self.next_x} columns, expected {self.width}"
                )
            if self.valid < BATCH_ROWS:
                raise StreamOrderError(f"batches continue after short band {self.band}")
            done = self._close_band()
            self.band += 1
            self.next_x = 0
            self.valid = BATCH_ROWS
            self.buf = np.empty((BATCH_ROWS, self.width, 3), dtype=np.uint8)
        elif batch.band != self.band:
            raise StreamOrderError(f"band jumped from {self.band} to {batch.band}")
        if batch.x != self.next_x:
            raise StreamOrderError(
                f"column jumped to {batch.x}, expected {self.next_x} in band {batch.band}"
            )
        if self.next_x == 0:
            self.valid = batch.valid
        elif batch.valid != self.valid:
            raise StreamOrderError(
                f"inconsistent valid count {batch.valid} at column {batch.x} of band {batch.band}"
            )
        if self.buf is None:
            self.columns.append(np.asarray(batch.pixels, dtype=np.uint8))
        else:
            self.buf[:, self.next_x] = batch.pixels
        self.next_x += 1
        self.stats.gradient.items_in += 1
        self.stats.staging_peak_rows = max(self.stats.staging_peak_rows, BATCH_ROWS)
        return done

    def finish(self) -> list[tuple[int, np.ndarray]]:
        if self.width is None:
            self._fix_width()
        elif self.next_x != self.width:
            raise StreamOrderError(
                f"final band {self.band} ended after {self.next_x} columns, expected {self.width}"
            )
        done = self._close_band()
        if self.total_rows < WINDOW:
            raise ValueError(
                f"batch stream is {self.total_rows} rows tall, need at least {WINDOW}"
            )
        return done


class _GradientStage:
    """3-row line buffer turning pixel rows into gradient rows."""

    def __init__(self, io: StageIo):
        self.io = io
        self.rows: deque[tuple[int, np.ndarray]] = deque()

    def _emit(self, y: int) -> tuple[int, np.ndarray]:
        held = {idx: row for idx, row in self.rows}
        above = held[max(y - 1, 0)]
        below = held[y + 1] if y + 1 in held else held[y]
        grad = _gradient_row(above, held[y], below)
        self.io.items_out += grad.shape[0]
        return y, grad

    def push(self, idx: int, row: np.ndarray) -> list[tuple[int, np.ndarray]]:
        # items_in is counted at the assembler, in batches
        self.rows.append((idx, row))
        self.io.peak_rows = max(self.io.peak_rows, len(self.rows))
        out = []
        if idx >= 1:
            out.append(self._emit(idx - 1))
            while self.rows and self.rows[0][0] < idx - 1:
                self.rows.popleft()
        return out

    def finish(self) -> list[tuple[int, np.ndarray]]:
        if not self.rows:
            return []
        last_idx = self.rows[-1][0]
        out = [self._emit(last_idx)]  # bottom row, vertical neighbor clamps
        self.rows.clear()
        return out


class _SvmStage:
    """8-row line buffer combining per-row window sums into window scores.

    Each buffered entry caches, for one gradient row, its sliding dot
    product with each of the eight weight rows; a window score is the
    top-to-bottom sum of eight such cached partials.
    """

    def __init__(self, model: SvmModel, io: StageIo):
        self.io = io
        dtype = _score_dtype(model)
        w = model.weights.astype(dtype)
        self.wrows = [w[WINDOW * r : WINDOW * (r + 1)] for r in range(WINDOW)]
        self.dtype = dtype
        self.rows: deque[tuple[int, np.ndarray]] = deque()  # (row idx, (8, win_w) partials)

    def push(self, idx: int, grad_row: np.ndarray) -> list[tuple[int, np.ndarray]]:
        self.io.items_in += grad_row.shape[0]
        if grad_row.shape[0] < WINDOW:
            raise ValueError(f"gradient row narrower than {WINDOW} pixels")
        g = grad_row.astype(self.dtype)
        partials = np.stack([window_row_sums(g, wrow) for wrow in self.wrows])
        self.rows.append((idx, partials))
        self.io.peak_rows = max(self.io.peak_rows, len(self.rows))
        out = []
        if idx >= WINDOW - 1:
            y = idx - (WINDOW - 1)
            score = self.rows[0][1][0]
            for r in range(1, WINDOW):
                score = score + self.rows[r][1][r]
            self.io.items_out += score.shape[0]
            out.append((y, score))
            self.rows.popleft()
        return out


class _NmsStage:
    """5-row score buffer emitting one candidate per 5x5 tile, strip by strip."""

    def __init__(self, scale_id: int, io: StageIo):
        self.scale_id = scale_id
        self.io = io
        self.rows: list[np.ndarray] = []
        self.y0 = 0

    def _flush_strip(self) -> list[Candidate]:
        strip = _strip_candidates(np.stack(self.rows), self.y0, self.scale_id)
        self.y0 += len(self.rows)
        self.rows.clear()
        self.io.items_out += len(strip)
        return strip

    def push(self, y: int, score_row: np.ndarray) -> list[Candidate]:
        self.io.items_in += score_row.shape[0]
        self.rows.append(score_row)
        self.io.peak_rows = max(self.io.peak_rows, len(self.rows))
        if len(self.rows) == NMS_TILE:
            return self._flush_strip()
        return []

    def finish(self) -> list[Candidate]:
        if self.rows:
            return self._flush_strip()
        return []


class KernelStream:
    """The three kernel stages chained over a pixel-batch stream.

    Iterating yields candidates exactly equal, in content and order, to
    `dense_candidates` on the reassembled image. Stages keep bounded line
    buffers (3 pixel rows, 8 gradient rows, 5 score rows); candidates leave
    through a bounded FIFO that blocks the producer when full. `stats` is
    complete once iteration finishes.
    """

    def __init__(
        self,
        batches: Iterable[PixelBatch],
        model: SvmModel,
        scale_id: int,
        fifo_capacity: int = DEFAULT_FIFO_CAPACITY,
    ):
        if fifo_capacity < 1:
            raise ValueError("fifo_capacity must be positive")
        self._batches = batches
        self._model = model
        self._scale_id = scale_id
        self._fifo_capacity = fifo_capacity
        self.stats = StageStats(scale_id=scale_id, fifo_capacity=fifo_capacity)

    def __iter__(self) -> Iterator[Candidate]:
        stats = self.stats
        assembler = _RowAssembler(stats)
        grad = _GradientStage(stats.gradient)
        svm = _SvmStage(self._model, stats.svm)
        nms = _NmsStage(self._scale_id, stats.nms)
        fifo: deque[Candidate] = deque()

        def offer(cands):
            # producer side of the FIFO: block (hand one to the consumer)
            # whenever capacity is reached, never drop
            for cand in cands:
                if len(fifo) >= self._fifo_capacity:
                    yield fifo.popleft()
                fifo.append(cand)
                stats.fifo_peak = max(stats.fifo_peak, len(fifo))

        def feed(pixel_rows):
            for idx, row in pixel_rows:
                for gy, grow in grad.push(idx, row):
                    for sy, srow in svm.push(gy, grow):
                        yield from offer(nms.push(sy, srow))

        for batch in self._batches:
            yield from feed(assembler.push(batch))
            while fifo:  # consumer drains between batches
                yield fifo.popleft()
        yield from feed(assembler.finish())
        for gy, grow in grad.finish():
            for sy, srow in svm.push(gy, grow):
                yield from offer(nms.push(sy, srow))
        yield from offer(nms.finish())
        while fifo:
            yield fifo.popleft()


def kernel_stream(
    batches: Iterable[PixelBatch],
    model: SvmModel,
    scale_id: int,
    fifo_capacity: int = DEFAULT_FIFO_CAPACITY,
) -> KernelStream:
    """Streaming kernel over `batches`; iterate the result for candidates
    and read `.stats` afterwards."""
    return KernelStream(batches, model, scale_id, fifo_capacity)
