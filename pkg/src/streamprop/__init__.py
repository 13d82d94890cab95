"""Streaming object region proposals from normed-gradient window scoring.

The pipeline resizes an image to a bank of scales, streams each scale
through gradient, window-scoring, and suppression stages with bounded line
buffers, and keeps the globally best-scoring windows as proposals in
original-image coordinates. Dense reference implementations back every
streaming stage, and an evaluation harness scores proposal quality against
box annotations.
"""

from .boxes import BoundingBox
from .cli import (
    ImageStats,
    PipelineConfig,
    RunReport,
    main,
    run_bench,
    run_eval,
    run_pipeline,
)
from .eval import CurvePoint, detection_rate, iou, mabo
from .imageio import (
    GroundTruth,
    LoadError,
    RgbImage,
    SvmModel,
    load_annotations,
    load_ppm,
    load_svm_model,
    write_ppm,
    write_proposals,
    write_svm_model,
)
from .kernel import (
    Candidate,
    GradientMap,
    KernelStream,
    ScoreMap,
    StageStats,
    StreamOrderError,
    calc_gradients_dense,
    dense_candidates,
    kernel_stream,
    nms_select_dense,
    rgb_distance,
    svm_score_dense,
)
from .scaler import (
    PixelBatch,
    ScaleSpec,
    StreamTrace,
    generate_scales,
    pingpong_stream,
    resize_bilinear,
    stream_batches,
)
from .selector import (
    Proposal,
    TopKHeap,
    stage2_calibrate,
    topk_finalize,
    topk_push,
    topn_per_scale,
    window_to_bbox,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Candidate",
    "CurvePoint",
    "GradientMap",
    "GroundTruth",
    "ImageStats",
    "KernelStream",
    "LoadError",
    "PipelineConfig",
    "PixelBatch",
    "Proposal",
    "RgbImage",
    "RunReport",
    "ScaleSpec",
    "ScoreMap",
    "StageStats",
    "StreamOrderError",
    "StreamTrace",
    "SvmModel",
    "TopKHeap",
    "calc_gradients_dense",
    "dense_candidates",
    "detection_rate",
    "generate_scales",
    "iou",
    "kernel_stream",
    "load_annotations",
    "load_ppm",
    "load_svm_model",
    "mabo",
    "main",
    "nms_select_dense",
    "pingpong_stream",
    "resize_bilinear",
    "rgb_distance",
    "run_bench",
    "run_eval",
    "run_pipeline",
    "stage2_calibrate",
    "stream_batches",
    "svm_score_dense",
    "topk_finalize",
    "topk_push",
    "topn_per_scale",
    "window_to_bbox",
    "write_ppm",
    "write_proposals",
    "write_svm_model",
]
