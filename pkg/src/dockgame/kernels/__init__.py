"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The backend is chosen once at import time. Set ``DOCKGAME_KERNELS`` to
``python`` or ``cython`` to force a backend; the default (``auto``) uses
the compiled extension when it is importable.
"""

import os

from . import _pykern

_choice = os.environ.get("DOCKGAME_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _pykern
    BACKEND = "python"
else:
    try:
        from . import _ckern as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _pykern
        BACKEND = "python"

scatter_add = _impl.scatter_add
pairwise_distances = _impl.pairwise_distances
radius_pairs = _impl.radius_pairs

__all__ = ["BACKEND", "scatter_add", "pairwise_distances", "radius_pairs"]
