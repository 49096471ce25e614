"""Communication-aware learning of estimates: joint training of a binary
transmission scheduler and a neural residual state estimator for remote
monitoring of stochastic plants.

Kept import-light so the CLI can configure thread pools before numpy loads;
import submodules (calm.training, calm.evaluation, ...) for the actual API.
"""

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Name of the kernel backend in use ('compiled' or 'python')."""
    from .kernels import BACKEND
    return BACKEND
