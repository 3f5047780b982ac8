"""Hot-loop kernels: the compiled extension when built, numpy otherwise.

Set ``IOTVOTE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("IOTVOTE_PURE_PYTHON", "0") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
best_split = _impl.best_split
knn_neighbors = _impl.knn_neighbors

__all__ = ["BACKEND", "BACKENDS", "best_split", "knn_neighbors"]
