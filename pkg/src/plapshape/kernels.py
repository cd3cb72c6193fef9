"""Backend selection for the element and Krylov kernels.

The compiled extension is used when it imports; set ``PLAPSHAPE_KERNELS=python``
to force the numpy implementation (both are kept bit-for-bit deterministic,
and agree with each other to rounding).
"""
import os

from . import _kernels_py

_requested = os.environ.get("PLAPSHAPE_KERNELS", "auto").lower()

if _requested == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_py

BACKEND = _impl.BACKEND
element_gradients = _impl.element_gradients
energy = _impl.energy
residual = _impl.residual
residual_and_jacobian = _impl.residual_and_jacobian
pcg = _impl.pcg


def get_backend(name):
    """Return the kernel module by name (``"python"`` or ``"cython"``)."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels_c
        return _kernels_c
    raise ValueError(name)
