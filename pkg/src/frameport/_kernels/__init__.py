"""Hot-loop kernels for Monte Carlo channel accumulation.

The compiled Cython extension is preferred; a pure-numpy fallback with the
same contract is selected at import time when the extension is unavailable.
"""
from __future__ import annotations

try:
    from ._mc_core import conj_superop_sums
    BACKEND = "compiled"
except ImportError:
    from ._fallback import conj_superop_sums
    BACKEND = "python"

__all__ = ["conj_superop_sums", "BACKEND"]
