"""Hot per-row projection kernels: compiled when available, NumPy otherwise.

Set SPARSEPATHS_PURE=1 to force the fallback.
"""

import os

from . import _pure

try:
    from . import _core
except ImportError:
    _core = None

if _core is not None and not os.environ.get("SPARSEPATHS_PURE"):
    BACKEND = "compiled"
    _impl = _core
else:
    BACKEND = "pure"
    _impl = _pure

policy_rows = _impl.policy_rows
