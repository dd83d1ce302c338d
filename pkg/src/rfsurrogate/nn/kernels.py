"""Backend selection for the convolution kernels.

The compiled extension is used when it imports; set ``RFSURROGATE_PURE=1`` to
force the numpy fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("RFSURROGATE_PURE", "") in ("", "0"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv_forward(x, w, b):
    return _impl.conv_forward(_c(x), _c(w), _c(b))


def conv_grad_input(dz, w, width):
    return _impl.conv_grad_input(_c(dz), _c(w), int(width))


def conv_grad_params(x, dz, taps):
    return _impl.conv_grad_params(_c(x), _c(dz), int(taps))


def backend_module(name):
    """Kernel module by name, for benchmarks and cross-checks."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
