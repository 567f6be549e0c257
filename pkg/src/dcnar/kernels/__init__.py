"""Backend selection for the numeric hot loops.

The numba backend is used when numba imports cleanly, unless the
environment variable ``DCNAR_NUMBA`` is set to ``0``/``false``/``off``/``no``
before the package is imported, in which case the pure-numpy fallback is
used. ``scripts/bench_kernels.py`` times the two backends against each
other on representative workloads.
"""

import os

from . import numpy_backend

__all__ = [
    "ACTIVE_BACKEND",
    "navar_batch",
    "navar_contributions",
    "lstm_forward",
    "lstm_batch",
    "rollout",
    "numpy_backend",
]


def _numba_requested():
    flag = os.environ.get("DCNAR_NUMBA", "").strip().lower()
    return flag not in ("0", "false", "off", "no")


_impl = numpy_backend
ACTIVE_BACKEND = "numpy"
if _numba_requested():
    try:
        from . import numba_backend as _impl  # noqa: F811

        ACTIVE_BACKEND = "numba"
    except ImportError:
        pass

navar_batch = _impl.navar_batch
navar_contributions = _impl.navar_contributions
lstm_forward = _impl.lstm_forward
lstm_batch = _impl.lstm_batch
rollout = _impl.rollout
