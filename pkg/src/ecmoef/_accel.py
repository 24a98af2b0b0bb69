"""Numba switch for the hot numeric kernels.

Every kernel in :mod:`ecmoef.kernels` has a ``@njit`` body and a pure-numpy
twin. Set ``ECMOEF_NUMBA=0`` in the environment before import to force the
numpy path (useful on platforms without an LLVM toolchain, and for the
cross-check tests).
"""

import os

_flag = os.environ.get("ECMOEF_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    if not _wanted:
        raise ImportError("disabled by ECMOEF_NUMBA")
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit or @njit(cache=True, ...)
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper


USE_NUMBA = HAVE_NUMBA
