"""Orchestration and the command line: run the proposal pipeline on images,
evaluate against annotations, and benchmark throughput.

Subcommands: `propose` writes a proposal CSV for one image, `eval` writes
detection-rate and best-overlap curves for an annotated directory, `bench`
reports throughput and stage statistics. All three take `--config` (key =
value text) plus flag overrides; STREAMPROP_THREADS overrides the thread
budget. Exit code 0 on success, 2 on any input error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .eval import CurvePoint, detection_rate, mabo
from .imageio import (
    LoadError,
    RgbImage,
    SvmModel,
    format_proposal_row,
    load_annotations,
    load_ppm,
    load_svm_model,
    write_curve,
    write_proposals,
)
from .kernel import StageStats, kernel_stream
from .scaler import generate_scales, pingpong_stream, resize_bilinear, stream_batches
from .selector import (
    Proposal,
    TopKHeap,
    stage2_calibrate,
    topk_finalize,
    topk_push,
    topn_per_scale,
    window_to_bbox,
)

log = logging.getLogger(__name__)

SCHEDULERS = ("plain", "pingpong")
THREADS_ENV = "STREAMPROP_THREADS"


@dataclass(frozen=True)
class PipelineConfig:
    """Operating point of the whole pipeline; every field has a default and
    can come from a config file or a CLI flag."""

    base_sizes: tuple[int, ...] = (16, 32, 64, 128, 256)
    scheduler: str = "plain"
    top_n_per_scale: int = 150
    top_k: int = 1000
    iou_thresh: float = 0.4
    budgets: tuple[int, ...] = (1, 10, 100, 1000)
    model_path: str | None = None
    threads: int = 1

    def __post_init__(self):
        if not self.base_sizes or any(b < 1 for b in self.base_sizes):
            raise ValueError("base_sizes must be positive")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"scheduler must be one of {', '.join(SCHEDULERS)}")
        if self.top_n_per_scale < 1:
            raise ValueError("top_n_per_scale must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not 0.0 < self.iou_thresh < 1.0:
            raise ValueError("iou_thresh must be inside (0, 1)")
        if not self.budgets or any(m < 1 for m in self.budgets):
            raise ValueError("budgets must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")


@dataclass(frozen=True)
class TraceSummary:
    """Condensed Ping-Pong trace: enough to report continuity per scale."""

    scale_id: int
    gap_count: int
    warmup_steps: int
    emissions: int


@dataclass
class ImageStats:
    """Per-image pipeline accounting: wall time plus what each scale's
    kernel run observed."""

    image_id: str
    wall_time: float
    stage_stats: list[StageStats]
    candidate_counts: dict[int, int]
    traces: list[TraceSummary]


@dataclass
class RunReport:
    """Benchmark outcome: per-image stats for the last repeat, one fps
    sample per repeat, and per-image proposal digests per repeat."""

    images: list[ImageStats] = field(default_factory=list)
    fps_samples: list[float] = field(default_factory=list)
    digests: list[tuple[str, ...]] = field(default_factory=list)

    @property
    def fps(self) -> float:
        return statistics.median(self.fps_samples)


def proposals_digest(proposals: list[Proposal]) -> str:
    """Hash of the proposal rows exactly as they would be written to CSV."""
    h = hashlib.sha256()
    for p in proposals:
        h.update(format_proposal_row(p.box, p.final_score).encode())
        h.update(b"\n")
    return h.hexdigest()


def _parse_int_list(raw: str) -> tuple[int, ...]:
    items = raw.strip().strip("[]{}").split(",")
    return tuple(int(s.strip()) for s in items if s.strip())


def _parse_string(raw: str) -> str:
    return raw.strip().strip("\"'")


_CONFIG_PARSERS = {
    "base_sizes": _parse_int_list,
    "scheduler": _parse_string,
    "top_n_per_scale": int,
    "top_k": int,
    "iou_thresh": float,
    "budgets": _parse_int_list,
    "model_path": _parse_string,
    "threads": int,
}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` config text (comments with #, blank lines
    ignored) into typed overrides for PipelineConfig."""
    items = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key = value")
        key = key.strip()
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            items[key] = parser(value.strip())
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return items


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from defaults, then the config file at `path`
    (if given), then explicit overrides, then the thread env var."""
    items = {}
    if path is not None:
        items.update(parse_config_text(Path(path).read_text()))
    if overrides:
        items.update({k: v for k, v in overrides.items() if v is not None})
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads is not None:
        try:
            items["threads"] = int(env_threads)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer: {env_threads!r}") from exc
    return PipelineConfig(**items)


def run_pipeline(
    img: RgbImage, cfg: PipelineConfig, model: SvmModel, image_id: str = ""
) -> tuple[list[Proposal], ImageStats]:
    """Full pipeline on one image: per scale resize, stream, score, NMS and
    top-n; then calibrate, map to original coordinates, and keep the global
    top-k. Scales may run on worker threads; results merge in scale order,
    so output is identical for any thread budget."""
    start = time.perf_counter()
    scales = generate_scales(img.width, img.height, list(cfg.base_sizes))

    def one_scale(spec):
        resized = resize_bilinear(img, spec)
        if cfg.scheduler == "pingpong":
            batches, trace = pingpong_stream(resized)
        else:
            batches, trace = stream_batches(resized), None
        stream = kernel_stream(batches, model, spec.scale_id)
        top = topn_per_scale(stream, cfg.top_n_per_scale)
        return spec, top, stream.stats, trace

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one_scale, scales))
    else:
        results = [one_scale(spec) for spec in scales]

    heap = TopKHeap(cfg.top_k)
    stage_stats = []
    candidate_counts = {}
    traces = []
    for spec, top, stats, trace in results:
        stage_stats.append(stats)
        candidate_counts[spec.scale_id] = stats.nms.items_out
        if trace is not None:
            traces.append(
                TraceSummary(
                    spec.scale_id, trace.gap_count, trace.warmup_steps, len(trace.emissions)
                )
            )
        for cand in top:
            box = window_to_bbox(cand, spec, img.width, img.height)
            topk_push(heap, Proposal(box, stage2_calibrate(cand, model), spec.scale_id))
    proposals = topk_finalize(heap)
    istats = ImageStats(
        image_id=image_id,
        wall_time=time.perf_counter() - start,
        stage_stats=stage_stats,
        candidate_counts=candidate_counts,
        traces=traces,
    )
    return proposals, istats


def run_eval(
    image_dir, ann_path, cfg: PipelineConfig, model: SvmModel, out_dir
) -> tuple[list[CurvePoint], list[CurvePoint]]:
    """Evaluate the pipeline over an annotated image directory: DR and MABO
    curves over cfg.budgets, written to dr_curve.csv and mabo_curve.csv.

    Annotated images whose `<image_id>.ppm` file is absent are dropped with
    a warning, leaving both curve denominators untouched.
    """
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    gt = load_annotations(ann_path)
    present = []
    proposals = {}
    for g in gt:
        path = image_dir / f"{g.image_id}.ppm"
        if not path.exists():
            log.warning("image %s not found under %s, skipping", g.image_id, image_dir)
            continue
        img = load_ppm(path)
        props, _ = run_pipeline(img, cfg, model, image_id=g.image_id)
        proposals[g.image_id] = props
        present.append(g)
    dr = detection_rate(proposals, present, cfg.iou_thresh, cfg.budgets)
    mb = mabo(proposals, present, cfg.budgets)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_curve(dr, out_dir / "dr_curve.csv")
    write_curve(mb, out_dir / "mabo_curve.csv")
    return dr, mb


def run_bench(image_paths, cfg: PipelineConfig, model: SvmModel, repeats: int) -> RunReport:
    """Run the pipeline `repeats` times over the image list (loaded once,
    outside the timed region) and report a median-fps RunReport."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    paths = [Path(p) for p in image_paths]
    if not paths:
        raise ValueError("no images to benchmark")
    images = [(p.stem, load_ppm(p)) for p in paths]
    report = RunReport()
    for _ in range(repeats):
        start = time.perf_counter()
        image_stats = []
        digests = []
        for image_id, img in images:
            props, istats = run_pipeline(img, cfg, model, image_id=image_id)
            digests.append(proposals_digest(props))
            image_stats.append(istats)
        wall = time.perf_counter() - start
        report.fps_samples.append(len(images) / wall)
        report.digests.append(tuple(digests))
        report.images = image_stats
    return report


def _stage_total_lines(images: list[ImageStats]) -> list[str]:
    totals = {"gradient": [0, 0, 0], "svm": [0, 0, 0], "nms": [0, 0, 0]}
    fifo_peak = 0
    for istats in images:
        for st in istats.stage_stats:
            for name, io in (("gradient", st.gradient), ("svm", st.svm), ("nms", st.nms)):
                totals[name][0] += io.items_in
                totals[name][1] += io.items_out
                totals[name][2] = max(totals[name][2], io.peak_rows)
            fifo_peak = max(fifo_peak, st.fifo_peak)
    lines = [
        f"stage {name}: in={t[0]} out={t[1]} peak_rows={t[2]}"
        for name, t in totals.items()
    ]
    lines.append(f"fifo peak={fifo_peak}")
    return lines


def _resolve_model(args) -> tuple[PipelineConfig, SvmModel]:
    overrides = {
        key: getattr(args, key, None)
        for key in ("scheduler", "top_n_per_scale", "top_k", "iou_thresh", "threads")
    }
    if getattr(args, "base_sizes", None) is not None:
        overrides["base_sizes"] = _parse_int_list(args.base_sizes)
    if getattr(args, "budgets", None) is not None:
        overrides["budgets"] = _parse_int_list(args.budgets)
    if getattr(args, "model", None) is not None:
        overrides["model_path"] = str(args.model)
    cfg = load_config(args.config, overrides)
    if cfg.model_path is None:
        raise ValueError("no model file: pass --model or set model_path in the config")
    return cfg, load_svm_model(cfg.model_path)


def _cmd_propose(args) -> int:
    cfg, model = _resolve_model(args)
    img = load_ppm(args.image)
    proposals, _ = run_pipeline(img, cfg, model, image_id=Path(args.image).stem)
    write_proposals(proposals, args.out)
    print(f"proposals={len(proposals)} digest={proposals_digest(proposals)} out={args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg, model = _resolve_model(args)
    dr, mb = run_eval(args.images, args.ann, cfg, model, args.out_dir)
    for d, m in zip(dr, mb):
        print(f"nwin={d.nwin} dr={d.value:.4f} mabo={m.value:.4f}")
    return 0


def _cmd_bench(args) -> int:
    cfg, model = _resolve_model(args)
    paths = sorted(Path(args.images).glob("*.ppm"))
    report = run_bench(paths, cfg, model, args.repeats)
    stable = all(d == report.digests[0] for d in report.digests)
    print(f"bench: images={len(report.images)} repeats={args.repeats} fps={report.fps:.2f}")
    for line in _stage_total_lines(report.images):
        print(line)
    if cfg.scheduler == "pingpong":
        gaps = sum(t.gap_count for istats in report.images for t in istats.traces)
        print(f"pingpong gaps={gaps}")
    for istats, digest in zip(report.images, report.digests[0]):
        print(f"image {istats.image_id}: digest={digest}")
    print(f"deterministic={'yes' if stable else 'NO'}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="SVM model file (64 weights plus calibration lines)")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--base-sizes", help="comma-separated base sizes")
    parser.add_argument("--scheduler", choices=SCHEDULERS)
    parser.add_argument("--top-n", dest="top_n_per_scale", type=int, help="per-scale candidate budget")
    parser.add_argument("--top-k", dest="top_k", type=int, help="global proposal budget")
    parser.add_argument("--iou-thresh", dest="iou_thresh", type=float)
    parser.add_argument("--budgets", help="comma-separated proposal budgets")
    parser.add_argument("--threads", type=int, help="worker thread budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamprop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propose", help="write region proposals for one image")
    p.add_argument("--image", required=True, help="input PPM image")
    p.add_argument("--out", required=True, help="output proposal CSV")
    _add_common(p)
    p.set_defaults(func=_cmd_propose)

    p = sub.add_parser("eval", help="evaluate proposals against annotations")
    p.add_argument("--images", required=True, help="directory of <image_id>.ppm files")
    p.add_argument("--ann", required=True, help="annotation CSV")
    p.add_argument("--out-dir", required=True, help="directory for curve CSVs")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="benchmark pipeline throughput")
    p.add_argument("--images", required=True, help="directory of PPM images")
    p.add_argument("--repeats", type=int, default=3, help="timing repetitions")
    _add_common(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LoadError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
