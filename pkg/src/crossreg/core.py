"""Backend selection for the per-step inner loops.

Imports the compiled extension when present, otherwise the NumPy fallback.
``CROSSREG_BACKEND=python`` forces the fallback; ``CROSSREG_BACKEND=cython``
makes a missing extension a hard error.
"""

import os

_choice = os.environ.get("CROSSREG_BACKEND", "").strip().lower()

if _choice == "python":
    from . import core_py as _impl
elif _choice in ("", "cython"):
    try:
        from . import core_cy as _impl
    except ImportError:
        if _choice == "cython":
            raise
        from . import core_py as _impl
else:
    raise ImportError(
        f"unrecognized CROSSREG_BACKEND={_choice!r}; use 'cython' or 'python'"
    )

BACKEND = _impl.BACKEND
residual_vector = _impl.residual_vector
argmax_abs_masked = _impl.argmax_abs_masked
update_probe_values = _impl.update_probe_values
eval_cross_sum = _impl.eval_cross_sum
