"""Metrics, ablations, feature-similarity analysis and introspection dumps."""
from .ablation import (
    ASYMMETRIC_EVAL,
    DEFAULT_SCALES,
    SYMMETRIC_EVAL,
    AblationResult,
    Variant,
    make_variants,
    run_ablation,
)
from .dumps import (
    default_scale_grid,
    dump_guidance,
    dump_routing,
    guidance_maps,
    guidance_to_u8,
    routing_rows,
)
from .metrics import (
    MetricReport,
    MetricRow,
    bicubic_upscale,
    border_for,
    crop_border,
    evaluate,
    model_upscale,
    psnr,
    score_pair,
    ssim,
    to_luminance,
)
from .similarity import cosine_map, feature_similarity, similarity_map, whiten
