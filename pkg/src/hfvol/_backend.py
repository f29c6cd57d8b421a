"""Selection of the accelerated vs. pure-numpy simulation kernels.

The hot Euler loops live in two sibling modules with identical signatures:
``_kernels_numba`` (JIT-compiled) and ``_kernels`` (vectorized numpy).
The numba variant is used when numba is importable and the environment
variable ``HFVOL_DISABLE_NUMBA`` is not set to a truthy value.

The flag is read once at import time. Results are bit-identical across
re-runs within a backend; the two backends agree to ~1e-12 relative
(libm vs. SIMD transcendentals differ in the last ulps).
"""

from __future__ import annotations

import importlib.util
import os

DISABLE_ENV = "HFVOL_DISABLE_NUMBA"

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_usable() -> bool:
    if os.environ.get(DISABLE_ENV, "").strip().lower() in _TRUTHY:
        return False
    # numba lowers np.dot / np.linalg through scipy's cython BLAS/LAPACK
    # bindings, so both must be present.
    return (
        importlib.util.find_spec("numba") is not None
        and importlib.util.find_spec("scipy") is not None
    )


NUMBA_ENABLED = _numba_usable()

if NUMBA_ENABLED:
    from . import _kernels_numba as kernels
else:
    from . import _kernels as kernels


def backend_name() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_ENABLED else "numpy"
