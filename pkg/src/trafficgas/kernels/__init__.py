"""Hot numeric kernels: compiled core with a pure-Python fallback.

The Cython extension `_ext` is preferred when it was built; otherwise the
numpy implementations in `_py` are used. Setting the environment variable
TRAFFICGAS_PURE_PYTHON=1 forces the fallback regardless. Both backends
implement identical signatures and consume caller-supplied random numbers,
so seeded results do not depend on the backend.
"""

import os

if os.environ.get("TRAFFICGAS_PURE_PYTHON", "") not in ("", "0"):
    from . import _py as _impl
    BACKEND = "python"
else:
    try:
        from . import _ext as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        from . import _py as _impl
        BACKEND = "python"

rejection_step = _impl.rejection_step
window_counts = _impl.window_counts
moving_average_variance = _impl.moving_average_variance
cluster_sum = _impl.cluster_sum

__all__ = ["BACKEND", "rejection_step", "window_counts",
           "moving_average_variance", "cluster_sum"]
