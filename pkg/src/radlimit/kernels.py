"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy fallback is used. Setting ``RADLIMIT_PURE_PYTHON=1`` forces the
fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("RADLIMIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

upwind_accumulate = _impl.upwind_accumulate
relax_temperature = _impl.relax_temperature
