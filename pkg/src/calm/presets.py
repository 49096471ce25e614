"""Canonical noise mixtures and cost weights for the benchmark suite."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .systems import GmmSpec

_DIAG_HALF = [[0.5, 0.0], [0.0, 0.5]]
_COV_CORR = [[1.0, 0.8], [0.8, 1.0]]
_COV_ANTI = [[0.6, -0.3], [-0.3, 0.5]]


def benchmark_noise(name: str) -> GmmSpec:
    """Mixture used by each benchmark configuration."""
    if name == "pendulum2":
        return GmmSpec(
            means=np.array([[-3.0, -3.0], [3.0, 3.0]]),
            covariances=np.array([_DIAG_HALF, _DIAG_HALF]),
            weights=np.array([0.3, 0.7]),
        )
    if name == "pendulum3":
        return GmmSpec(
            means=np.array([[-3.0, -3.0], [-5.0, 4.0], [4.0, 4.0]]),
            covariances=np.array([_DIAG_HALF, _COV_CORR, _COV_ANTI]),
            weights=np.array([0.6, 0.3, 0.1]),
        )
    if name == "vdp":
        return GmmSpec(
            means=np.array([[-5.0, -4.0], [4.0, 5.0]]),
            covariances=np.array([_DIAG_HALF, _DIAG_HALF]),
            weights=np.array([0.3, 0.7]),
        )
    if name == "vdp_swapped":
        return GmmSpec(
            means=np.array([[-5.0, -4.0], [4.0, 5.0]]),
            covariances=np.array([_DIAG_HALF, _DIAG_HALF]),
            weights=np.array([0.7, 0.3]),
        )
    if name == "tracking4":
        return GmmSpec(
            means=np.array([[-3.0, -3.0], [-5.0, 4.0], [2.0, -2.0], [4.0, 4.0]]),
            covariances=np.array([
                _DIAG_HALF, _COV_CORR, _COV_ANTI,
                [[0.3, 0.1], [0.1, 0.4]],
            ]),
            weights=np.array([0.4, 0.3, 0.2, 0.1]),
        )
    if name == "boeing2":
        return GmmSpec(
            means=np.array([
                [-5.0, -4.0, -3.0, -2.0],
                [4.0, 5.0, 3.0, 2.0],
            ]),
            covariances=np.array([
                np.diag([0.1, 0.2, 0.3, 0.4]),
                np.diag([0.4, 0.1, 0.3, 0.2]),
            ]),
            weights=np.array([0.3, 0.7]),
        )
    raise InvalidArgumentError(f"unknown benchmark noise {name!r}")


DEFAULT_LAMBDA = {
    "pendulum2": 45.0,
    "pendulum3": 45.0,
    "vdp": 0.7,
    "vdp_swapped": 0.7,
    "tracking4": 15.0,
    "boeing2": 45.0,
}

BENCHMARK_SYSTEM = {
    "pendulum2": "pendulum",
    "pendulum3": "pendulum",
    "vdp": "vdp",
    "vdp_swapped": "vdp",
    "tracking4": "tracking",
    "boeing2": "boeing747",
}
