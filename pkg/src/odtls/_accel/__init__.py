"""Backend selection for the compiled hot kernels.

The Cython extension accelerates two inner loops that otherwise dominate
large runs: radial sampling of the truncated-Green spectrum over padded
DFT grids, and the per-voxel symmetric 3x3 spectral-ball projection used
by the Hessian prox. A pure-numpy implementation with identical semantics
is kept alongside; set ODTLS_PURE_PYTHON=1 to force it.
"""

import os

from . import _ref

if os.environ.get("ODTLS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _fastpath as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

green_spectrum_from_w2 = _impl.green_spectrum_from_w2
project_spectral_ball_sym3 = _impl.project_spectral_ball_sym3

__all__ = ["BACKEND", "green_spectrum_from_w2", "project_spectral_ball_sym3"]
