"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension (`calm.kernels._core`, Cython + BLAS) is preferred
when it imported cleanly; otherwise the numpy implementation is used.  Set
CALM_KERNELS=python or CALM_KERNELS=compiled to force a backend.  `BACKEND`
names the one in use.
"""

import os

from ..errors import InvalidArgumentError

_choice = os.environ.get("CALM_KERNELS", "auto").strip().lower()
if _choice in ("", "auto"):
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        from . import _core_py as _impl
        BACKEND = "python"
elif _choice in ("compiled", "cython", "c"):
    from . import _core as _impl
    BACKEND = "compiled"
elif _choice in ("python", "py", "numpy"):
    from . import _core_py as _impl
    BACKEND = "python"
else:
    raise InvalidArgumentError(
        f"CALM_KERNELS must be 'auto', 'compiled' or 'python', got {_choice!r}"
    )

mlp_forward = _impl.mlp_forward
mlp_forward_cached = _impl.mlp_forward_cached
mlp_backward = _impl.mlp_backward
mlp_forward_batch = _impl.mlp_forward_batch
mlp_forward_batch_cached = _impl.mlp_forward_batch_cached
mlp_backward_batch = _impl.mlp_backward_batch
adam_apply = _impl.adam_apply
gae_advantages = _impl.gae_advantages

__all__ = [
    "BACKEND",
    "adam_apply",
    "gae_advantages",
    "mlp_backward",
    "mlp_backward_batch",
    "mlp_forward",
    "mlp_forward_batch",
    "mlp_forward_batch_cached",
    "mlp_forward_cached",
]
