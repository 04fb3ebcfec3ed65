"""Backend selection for the obstruction-loss kernel.

The compiled extension is used when it imports; otherwise the pure-Python
implementation takes over with identical results (slower by roughly two
orders of magnitude). ``LORAPLAN_BACKEND=python`` forces the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

DEFAULT = _compiled if _compiled is not None else _kernels_py
if os.environ.get("LORAPLAN_BACKEND") == "python":
    DEFAULT = _kernels_py
BACKEND = DEFAULT.BACKEND


def get_backend(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); default when None."""
    if name is None:
        return DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
