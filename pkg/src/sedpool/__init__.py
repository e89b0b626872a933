"""Sound event detection with scenario-tuned temporal pooling.

A CRNN trained with mean-teacher consistency, frame-to-event decoding and an
intersection-based PSDS evaluator, all runnable on synthetic desk-scale data.
"""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
