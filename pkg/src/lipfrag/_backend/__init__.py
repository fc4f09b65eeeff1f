"""Compute-backend selection.

The package ships two interchangeable kernel sets: numba-compiled loops
(default) and a pure-numpy fallback.  Selection happens once at import via the
``LIPFRAG_BACKEND`` environment variable:

* ``auto`` (default) -- numba if importable, else numpy
* ``numba``          -- require numba, fail loudly if missing
* ``numpy``          -- force the vectorized fallback

``benchmarks/backend_bench.py`` compares the two on the hot kernels.
"""

import os

from ..errors import ConfigurationError

_choice = os.environ.get("LIPFRAG_BACKEND", "auto").strip().lower()

if _choice in ("auto", "numba"):
    try:
        from . import numba_impl as kernels
    except ImportError:
        if _choice == "numba":
            raise ConfigurationError(
                "LIPFRAG_BACKEND=numba but numba is not importable"
            ) from None
        from . import numpy_impl as kernels
elif _choice == "numpy":
    from . import numpy_impl as kernels
else:
    raise ConfigurationError(
        f"unknown LIPFRAG_BACKEND={_choice!r} (expected auto, numba or numpy)"
    )

backend_name = kernels.NAME
