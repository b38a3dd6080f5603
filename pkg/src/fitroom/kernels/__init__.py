"""Hot-kernel dispatch: numba-jitted loops with a pure-numpy fallback.

The backend is chosen once at import time. Set ``FITROOM_NUMBA=0`` (or
``false``/``off``) to force the numpy path; anything else tries numba
first and falls back to numpy if it is not importable.
``benchmarks/bench_kernels.py`` times the two implementations side by
side.
"""

import os
import warnings

from . import numpy_backend

_flag = os.environ.get("FITROOM_NUMBA", "1").strip().lower()

if _flag in ("0", "false", "off", "no"):
    _impl = numpy_backend
else:
    try:
        with warnings.catch_warnings():
            # numba warns about old TBB versions while picking a threading
            # layer; harmless here
            warnings.simplefilter("ignore")
            from . import numba_backend as _impl
    except ImportError:
        _impl = numpy_backend

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
warp_forward = _impl.warp_forward
warp_backward = _impl.warp_backward
resize_forward = _impl.resize_forward
resize_backward = _impl.resize_backward


def backend_name() -> str:
    return _impl.NAME
