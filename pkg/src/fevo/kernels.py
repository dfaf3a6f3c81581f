"""Kernel backend selection.

The compiled extension is used when it imports; set ``FEVO_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

if os.environ.get("FEVO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

philox4x64 = _impl.philox4x64
synthesize = _impl.synthesize

__all__ = ["BACKEND", "philox4x64", "synthesize"]
