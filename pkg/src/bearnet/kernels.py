"""Backend selector for the inference hot-path kernels.

The compiled Cython extension (``bearnet._kernels``) is used when it imported
cleanly; otherwise the pure-numpy fallback takes over. The ``BEARNET_KERNELS``
environment variable forces a backend: ``compiled`` errors if the extension is
unavailable, ``python`` skips it.
"""
from __future__ import annotations

import os

from bearnet import _kernels_fallback

_choice = os.environ.get("BEARNET_KERNELS", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(
        f"BEARNET_KERNELS={_choice!r} invalid; use 'auto', 'compiled' or 'python'"
    )

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from bearnet import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise RuntimeError(
                "BEARNET_KERNELS=compiled but bearnet._kernels is not built"
            ) from None
if _impl is None:
    _impl = _kernels_fallback

ACT_SILU = _kernels_fallback.ACT_SILU
ACT_TANH = _kernels_fallback.ACT_TANH
ACT_RELU = _kernels_fallback.ACT_RELU

fused_mlp = _impl.fused_mlp


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _impl.BACKEND
