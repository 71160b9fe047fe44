"""Scalp-disease image classification: preprocessing filters, CLAHE,
dataset balancing, and a from-scratch convolutional classifier."""

from .config import PipelineConfig, TrainConfig
from .dataset import CLASS_NAMES, AugmentSpec, ClassLabel, DatasetManifest
from .denoise import NlmParams, bilateral_filter, gaussian_blur, median_filter, nlm_denoise
from .equalize import ClaheParams, clahe, hist_equalize
from .image import ImageTensor, decode_image, encode_jpeg, encode_png, resize_bilinear
from .metrics import ConfusionMatrix, MetricsReport, fractional_incorrect, metrics_from_confusion
from .model_io import load_model, save_model
from .nn import Adam, Model, build_model, cross_entropy, softmax
from .train import EpochRecord, evaluate, train

__all__ = [
    "Adam",
    "AugmentSpec",
    "CLASS_NAMES",
    "ClaheParams",
    "ClassLabel",
    "ConfusionMatrix",
    "DatasetManifest",
    "EpochRecord",
    "ImageTensor",
    "MetricsReport",
    "Model",
    "NlmParams",
    "PipelineConfig",
    "TrainConfig",
    "bilateral_filter",
    "build_model",
    "clahe",
    "cross_entropy",
    "decode_image",
    "encode_jpeg",
    "encode_png",
    "evaluate",
    "fractional_incorrect",
    "gaussian_blur",
    "hist_equalize",
    "load_model",
    "median_filter",
    "metrics_from_confusion",
    "nlm_denoise",
    "resize_bilinear",
    "save_model",
    "softmax",
    "train",
]

__version__ = "0.1.0"
