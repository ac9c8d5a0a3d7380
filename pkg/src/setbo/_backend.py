"""Select the Sinkhorn core backend at import time.

The compiled extension is preferred; the pure-NumPy fallback is used when the
extension is unavailable or when SETBO_FORCE_PURE is set in the environment.
"""

import os

if os.environ.get("SETBO_FORCE_PURE"):
    from . import _sinkhorn_np as _core
else:
    try:
        from . import _sinkhorn_cy as _core  # type: ignore[attr-defined]
    except ImportError:
        from . import _sinkhorn_np as _core

sinkhorn_cost_batch = _core.sinkhorn_cost_batch
sinkhorn_self_cost_batch = _core.sinkhorn_self_cost_batch
BACKEND_NAME = _core.BACKEND_NAME
