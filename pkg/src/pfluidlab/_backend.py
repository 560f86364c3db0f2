"""Kernel backend selection.

The per-quadrature-point kernels in :mod:`pfluidlab._kernels` exist in two
variants: numba-jitted loops and pure-numpy vectorized fallbacks.  The
environment variable ``PFLUIDLAB_BACKEND`` picks one at import time:

    auto    use numba when importable (default)
    numba   require numba, fail loudly if it is missing
    numpy   force the pure-numpy fallback

Both variants compute the same quantities; they may differ by floating-point
rounding at the 1e-14 level because of different summation orders.
"""

import os

_choice = os.environ.get("PFLUIDLAB_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        "PFLUIDLAB_BACKEND must be one of auto|numba|numpy, got %r" % (_choice,)
    )

if _choice == "numpy":
    USE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise RuntimeError("PFLUIDLAB_BACKEND=numba but numba is not importable")
        USE_NUMBA = False


def backend_name() -> str:
    """Name of the active kernel backend, 'numba' or 'numpy'."""
    return "numba" if USE_NUMBA else "numpy"
