"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the pure
numpy implementation is the fallback.  Setting ``PRIVOUT_FORCE_NUMPY=1`` in
the environment forces the fallback (used by the benchmark and by tests that
compare the two backends).
"""

import os

from . import np_backend

if os.environ.get("PRIVOUT_FORCE_NUMPY"):
    _impl = np_backend
else:
    try:
        from . import _fastcore as _impl
    except ImportError:
        _impl = np_backend

BACKEND = _impl.BACKEND
forward_batch = _impl.forward_batch
backward_from_delta = _impl.backward_from_delta
