"""File ingestion and output: PPM images, annotation CSVs, SVM model files,
and the proposal/curve CSV writers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import BoundingBox


class LoadError(ValueError):
    """An input file is malformed."""


@dataclass(eq=False)
class RgbImage:
    """8-bit RGB raster, row-major with top-left origin.

    `data` has shape (height, width, 3) and dtype uint8; its C-order flat
    view is the byte sequence of (R, G, B) triplets.
    """

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {self.data.shape} does not match "
                f"{self.height}x{self.width}x3"
            )


@dataclass
class GroundTruth:
    """All annotated objects of one image: (class_label, box) pairs in file order."""

    image_id: str
    objects: list[tuple[str, BoundingBox]] = field(default_factory=list)


@dataclass
class SvmModel:
    """Stage-I window weights plus per-scale stage-II calibration.

    `weights` holds the 64 window weights in row-major order over the 8x8
    window. `calib` maps scale_id to (slope, offset); scales without an
    entry calibrate with the identity (1, 0).
    """

    weights: np.ndarray
    calib: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.shape != (64,):
            raise ValueError(f"expected 64 weights, got {self.weights.size}")

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.weights == np.rint(self.weights)))

    def calib_for(self, scale_id: int) -> tuple[float, float]:
        return self.calib.get(scale_id, (1.0, 0.0))


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next whitespace-delimited header token, skipping '#' comments;
    returns (token, token start, position after token)."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise LoadError(f"unexpected end of header at byte {start}")
    return buf[start:pos], start, pos


def load_ppm(path) -> RgbImage:
    """Read a binary PPM ("P6", maxval 255) into an RgbImage."""
    buf = Path(path).read_bytes()
    magic, magic_start, pos = _next_token(buf, 0)
    if magic != b"P6":
        raise LoadError(f"unsupported magic {magic!r} at byte {magic_start} (want P6)")
    dims = []
    for name in ("width", "height", "maxval"):
        tok, tok_start, pos = _next_token(buf, pos)
        try:
            dims.append(int(tok))
        except ValueError:
            raise LoadError(f"bad {name} {tok!r} at byte {tok_start}") from None
    width, height, maxval = dims
    if maxval != 255:
        raise LoadError(f"unsupported maxval {maxval} at byte {tok_start} (want 255)")
    pos += 1  # exactly one whitespace byte separates the header from pixel data
    need = width * height * 3
    pixels = buf[pos : pos + need]
    if len(pixels) < need:
        raise LoadError(
            f"truncated pixel data at byte {pos + len(pixels)}: "
            f"need {need} bytes, have {len(pixels)}"
        )
    data = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(width, height, data.copy())


def write_ppm(img: RgbImage, path) -> None:
    """Write `img` as a canonical binary PPM."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.tobytes())


def load_annotations(path) -> list[GroundTruth]:
    """Parse a ground-truth CSV: `image_id,class_label,x0,y0,x1,y1` per line.

    Boxes of one image_id are grouped in file order regardless of how the
    lines interleave; corners are inclusive and must satisfy x1 > x0, y1 > y0.
    """
    grouped: dict[str, GroundTruth] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != 6:
                raise LoadError(f"line {lineno}: expected 6 fields, got {len(row)}")
            image_id, label = row[0], row[1]
            try:
                x0, y0, x1, y1 = (int(v) for v in row[2:])
            except ValueError:
                raise LoadError(f"line {lineno}: non-integer coordinates {row[2:]}") from None
            if x1 <= x0 or y1 <= y0:
                raise LoadError(f"line {lineno}: empty box ({x0},{y0},{x1},{y1})")
            gt = grouped.setdefault(image_id, GroundTruth(image_id))
            gt.objects.append((label, BoundingBox(x0, y0, x1, y1)))
    return list(grouped.values())


def load_svm_model(path) -> SvmModel:
    """Parse a model file: 64 one-weight lines, then optional calibration
    lines `scale_id slope offset`."""
    weights: list[float] = []
    calib: dict[int, tuple[float, float]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(weights) < 64:
                if len(parts) != 1:
                    raise LoadError(
                        f"line {lineno}: expected 64 weights, "
                        f"found only {len(weights)} before {line!r}"
                    )
                try:
                    weights.append(float(parts[0]))
                except ValueError:
                    raise LoadError(f"line {lineno}: bad weight {parts[0]!r}") from None
            else:
                if len(parts) != 3:
                    raise LoadError(
                        f"line {lineno}: expected calibration `scale_id slope offset`, "
                        f"got {line!r}"
                    )
                try:
                    scale_id = int(parts[0])
                    entry = (float(parts[1]), float(parts[2]))
                except ValueError:
                    raise LoadError(f"line {lineno}: bad calibration {line!r}") from None
                if scale_id in calib:
                    raise LoadError(f"line {lineno}: duplicate calibration for scale {scale_id}")
                calib[scale_id] = entry
    if len(weights) < 64:
        raise LoadError(f"expected 64 weights, found {len(weights)}")
    return SvmModel(np.array(weights, dtype=np.float64), calib)


def write_svm_model(model: SvmModel, path) -> None:
    """Serialize a model in the format load_svm_model reads (exact round-trip)."""
    lines = [repr(float(w)) for w in model.weights]
    for scale_id in sorted(model.calib):
        v, t = model.calib[scale_id]
        lines.append(f"{scale_id} {float(v)!r} {float(t)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_proposal_row(box: BoundingBox, score: float) -> str:
    return f"{box.x0},{box.y0},{box.x1},{box.y1},{score:.6f}"


def write_proposals(proposals, path) -> None:
    """Write proposals as CSV `x0,y0,x1,y1,score`, one row per proposal in
    input order; scores carry 6 decimals."""
    lines = ["x0,y0,x1,y1,score"]
    lines.extend(format_proposal_row(p.box, p.final_score) for p in proposals)
    Path(path).write_text("\n".join(lines) + "\n")


def write_curve(points, path) -> None:
    """Write metric curve points as CSV `nwin,value` in input order."""
    lines = ["nwin,value"]
    lines.extend(f"{p.nwin},{p.value:.6f}" for p in points)
    Path(path).write_text("\n".join(lines) + "\n")
