"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``MLDRBEAM_PURE_PYTHON=1``) the numpy implementation is used.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MLDRBEAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels_ext as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py

image_source_rir = _impl.image_source_rir
weighted_outer_sum = _impl.weighted_outer_sum

__all__ = ["BACKEND", "image_source_rir", "weighted_outer_sum"]
