"""Learned prediction of grasp viability and holding effort from rendered
range images.

This package consumes grasp datasets (CSV or binary) and "GRIM" depth
rasters produced by the tgqm command-line tools. It reads those files
directly and has no dependency on the tgqm package itself.
"""

from .data import (DataTooSmall, HashMismatch, LearningSample, MissingImage,
                   Record, Splits, build_learning_set, depth_to_cloud,
                   read_dataset, read_grim)
from .models import train_classifier, train_regressor
from .evaluate import (EvalReport, comparison_accuracy, evaluate,
                       global_min_scores, pr_curve)

__all__ = [
    "DataTooSmall", "HashMismatch", "LearningSample", "MissingImage",
    "Record", "Splits", "build_learning_set", "depth_to_cloud",
    "read_dataset", "read_grim",
    "train_classifier", "train_regressor",
    "EvalReport", "comparison_accuracy", "evaluate", "global_min_scores",
    "pr_curve",
]
