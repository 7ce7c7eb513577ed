"""Kernel backend selection.

The compiled core is used when importable; set ``LOOCV_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _cd_py

if os.environ.get("LOOCV_PURE_PYTHON") == "1":
    _impl = _cd_py
else:
    try:
        from . import _cd as _impl
    except ImportError:  # extension not built
        _impl = _cd_py

BACKEND = _impl.BACKEND
cd_lasso = _impl.cd_lasso
kkt_violation = _impl.kkt_violation


def get_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _cd_py
    if name == "cython":
        from . import _cd

        return _cd
    raise ValueError(f"unknown backend {name!r}")
