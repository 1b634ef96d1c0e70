"""Kernel backend selection.

``DALPCE_BACKEND=numpy`` disables the numba kernels and uses the pure-numpy
fallbacks; any other value (or unset) uses numba when it can be imported.
``DALPCE_THREADS`` caps the numba worker count (0 or unset = numba default).
"""

import logging
import os
import warnings

logger = logging.getLogger(__name__)

# numba probes TBB on the first parallel launch and warns when the installed
# version is too old; it then falls back to another layer on its own
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def requested_backend():
    name = os.environ.get("DALPCE_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        logger.warning("unknown DALPCE_BACKEND=%r, using numba", name)
        name = "numba"
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name


BACKEND = requested_backend()


def configure_threads(value=None):
    """Apply a worker cap to numba's thread pool.

    Parameters
    ----------
    value : int or str, optional
        Requested thread count. Defaults to ``DALPCE_THREADS``. Zero means
        automatic. Requests above the pool size numba was started with are
        clamped to that size.

    Returns
    -------
    int
        The thread count in effect (1 for the numpy backend).
    """
    if value is None:
        value = os.environ.get("DALPCE_THREADS", "0")
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"DALPCE_THREADS must be an integer, got {value!r}") from None
    if n < 0:
        raise ValueError("DALPCE_THREADS must be >= 0")
    if not HAS_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n == 0 else min(n, limit)
    numba.set_num_threads(n)
    return n
