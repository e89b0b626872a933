"""Minimal float64 layers with hand-written backward passes."""
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients
from .layers import (
    AvgPool2d,
    BatchNorm2d,
    BiGRU,
    Conv2d,
    Dense,
    Dropout,
    Layer,
    ReLU,
    Sigmoid,
)
from .tensor import ParamSet, Tensor

__all__ = [
    "AvgPool2d", "BatchNorm2d", "BiGRU", "Conv2d", "Dense", "Dropout", "Layer",
    "ParamSet", "ReLU", "Sigmoid", "Tensor", "check_gradients",
    "load_checkpoint", "save_checkpoint",
]
