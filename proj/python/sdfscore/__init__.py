"""Conditional score-based generative segmentation over signed distance fields."""

from sdfscore._core import (
    ConfigError,
    IoError,
    NumericError,
    ScoreModel,
    ShapeError,
    SigmaSchedule,
    __version__,
    boundary_pixels,
    brute_force_sdf,
    decode_mask,
    dsm_target,
    encode_sdf,
    ensemble_with_model,
    f1_iou,
    generate_synthetic,
    perturb,
    sample_with_analytic_score,
    sample_with_model,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericError",
    "ScoreModel",
    "ShapeError",
    "SigmaSchedule",
    "__version__",
    "boundary_pixels",
    "brute_force_sdf",
    "decode_mask",
    "dsm_target",
    "encode_sdf",
    "ensemble_with_model",
    "f1_iou",
    "generate_synthetic",
    "perturb",
    "sample_with_analytic_score",
    "sample_with_model",
]
