"""Hot numerical kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is selected. Set ``HYBRID_RADAR_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("HYBRID_RADAR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

quad_forms = _impl.quad_forms
energy_statistic = _impl.energy_statistic

__all__ = ["BACKEND", "quad_forms", "energy_statistic"]
