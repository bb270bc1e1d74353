# Copyright 2026 The ARSL Lab Authors
# SPDX-License-Identifier: Apache-2.0
"""Dense semi-supervised detection on synthetic shape scenes."""

from ._core import (
    Box,
    ConfigError,
    Detection,
    Error,
    FormatError,
    GeometryError,
    GtObject,
    ModelParams,
    NumericError,
    ParseError,
    UndefinedError,
    assign_tsa,
    average_precision,
    default_config,
    dynamic_positive_threshold,
    forward,
    generate_scene,
    giou,
    init_params,
    iou,
    iou_branch_loss,
    joint_confidence,
    nms,
    normalize_config,
    pearson_cc,
    predict,
    run_cli,
    sigmoid,
    tsa_partition,
    united_focal_loss,
    unlabeled_target,
    weighted_box,
)

__all__ = [
    "Box",
    "ConfigError",
    "Detection",
    "Error",
    "FormatError",
    "GeometryError",
    "GtObject",
    "ModelParams",
    "NumericError",
    "ParseError",
    "UndefinedError",
    "assign_tsa",
    "average_precision",
    "default_config",
    "dynamic_positive_threshold",
    "forward",
    "generate_scene",
    "giou",
    "init_params",
    "iou",
    "iou_branch_loss",
    "joint_confidence",
    "nms",
    "normalize_config",
    "pearson_cc",
    "predict",
    "run_cli",
    "sigmoid",
    "tsa_partition",
    "united_focal_loss",
    "unlabeled_target",
    "weighted_box",
]
