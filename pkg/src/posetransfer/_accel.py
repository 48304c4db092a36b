"""Backend selection for the compiled kernels.

Set ``POSETRANSFER_NUMBA=0`` before import to force the pure-numpy path.
"""

import os

_flag = os.environ.get("POSETRANSFER_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError("disabled by POSETRANSFER_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # bare passthrough so kernel definitions stay importable
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
