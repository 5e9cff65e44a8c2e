"""Backend selection for the hot kernels.

The compiled core (``genma._ckernels``) is used when it was built and
imports cleanly; otherwise the numpy fallback is used. Set the environment
variable ``GENMA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from genma import _pykernels

_KERNELS = ("conv1d_forward", "conv1d_backward", "maxpool1d_forward",
            "maxpool1d_backward", "pegasos_epoch")


def _load_compiled():
    if os.environ.get("GENMA_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        from genma import _ckernels
    except ImportError:
        return None
    return _ckernels


def get_backend(name):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from genma import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    try:
        from genma import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


_impl = _load_compiled()
BACKEND = "compiled" if _impl is not None else "python"
if _impl is None:
    _impl = _pykernels

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward
pegasos_epoch = _impl.pegasos_epoch


def set_backend(name):
    """Rebind the module-level kernels to ``name``; returns the previous backend."""
    global BACKEND
    impl = get_backend(name)
    previous = BACKEND
    for k in _KERNELS:
        globals()[k] = getattr(impl, k)
    BACKEND = name
    return previous
