"""Adaptive local binary pattern texture toolkit."""

from .classifiers import (
    LabeledDataset,
    Model,
    SoftVoteModel,
    TrainConfig,
    fit,
    fit_ensemble,
    load_model,
    save_model,
    soft_vote,
)
from .descriptors import AlbpConfig, CodeImage, albp_encode, extract, histogram_features, lbp_encode
from .evaluation import ClassMetrics, SplitConfig, class_metrics, confusion, evaluate, split
from .image_core import GrayImage, ImageManifest, load_image, save_image, scan_dataset
from .preprocess import ClaheConfig, PreprocessConfig, clahe, crop_foreground, preprocess, resize_bilinear

__all__ = [
    "AlbpConfig", "ClaheConfig", "ClassMetrics", "CodeImage", "GrayImage",
    "ImageManifest", "LabeledDataset", "Model", "PreprocessConfig",
    "SoftVoteModel", "SplitConfig", "TrainConfig", "albp_encode",
    "clahe", "class_metrics", "confusion", "crop_foreground", "evaluate",
    "extract", "fit", "fit_ensemble", "histogram_features", "lbp_encode",
    "load_image", "load_model", "preprocess", "resize_bilinear",
    "save_image", "save_model", "scan_dataset", "soft_vote", "split",
]

__version__ = "0.1.0"
