"""Hot loops used by postprocessing and PSDS matching.

The compiled extension ``sedpool._kernels`` is used when it has been built;
otherwise the numpy implementations in ``sedpool._kernels_py`` are used.
Set ``SEDPOOL_PURE_PYTHON=1`` to force the fallback.

median_filter_binary(x, window)
    Centered median of a 0/1 signal with zero padding at both ends.
binary_runs(x)
    ``(starts, ends)`` of maximal runs of ones, ``ends`` inclusive.
intersection_matrix(a_on, a_off, b_on, b_off)
    Pairwise overlap lengths ``max(0, min(a_off, b_off) - max(a_on, b_on))``.
im2col3x3(x)
    Channels-last ``[B, T, F, C]`` -> ``[B*T*F, 9*C]`` zero-padded 3x3 patches,
    tap-major (row, then column) and channel-minor.
col2im3x3(dcols, shape)
    Adjoint of ``im2col3x3``: scatter-add patch gradients back to ``shape``.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("SEDPOOL_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

median_filter_binary = _impl.median_filter_binary
binary_runs = _impl.binary_runs
intersection_matrix = _impl.intersection_matrix
im2col3x3 = _impl.im2col3x3
col2im3x3 = _impl.col2im3x3

__all__ = ["BACKEND", "median_filter_binary", "binary_runs", "intersection_matrix",
           "im2col3x3", "col2im3x3"]
