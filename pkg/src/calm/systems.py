"""Benchmark plants, Gaussian-mixture process noise, and discounted LQR.

All plants evolve as x' = f(x, w) with f either a stabilized linear map
(A + BK)x + w or the discretized Van der Pol oscillator.  Noise w is drawn
from a Gaussian mixture whose dimension equals the state dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgumentError, NumericError

CONTROLLED_SYSTEMS = ("pendulum", "tracking", "boeing747")
SYSTEM_NAMES = CONTROLLED_SYSTEMS + ("vdp",)

_EPS = 0.05  # Euler discretization step for pendulum/tracking/vdp
_VDP_MU = 0.025


@dataclass(frozen=True)
class GmmSpec:
    """A Gaussian mixture: means (K, m), covariances (K, m, m), weights (K,)."""

    means: np.ndarray
    covariances: np.ndarray
    weights: np.ndarray
    _factors: np.ndarray = field(init=False, repr=False, compare=False)
    _cum_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        covs = np.ascontiguousarray(self.covariances, dtype=np.float64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if means.ndim != 2:
            raise InvalidArgumentError(f"means must be (K, m), got {means.shape}")
        k, m = means.shape
        if covs.shape != (k, m, m):
            raise InvalidArgumentError(
                f"covariances must be ({k}, {m}, {m}), got {covs.shape}"
            )
        if weights.shape != (k,):
            raise InvalidArgumentError(f"weights must be ({k},), got {weights.shape}")
        if np.any(weights < 0.0):
            raise InvalidArgumentError("mixture weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"mixture weights must sum to 1, got {weights.sum()!r}"
            )
        factors = np.empty_like(covs)
        for i in range(k):
            cov = covs[i]
            if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
                raise InvalidArgumentError(f"covariance {i} is not symmetric")
            try:
                factors[i] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                # Semi-definite case (e.g. a zero covariance): factor via a
                # clipped eigendecomposition, rejecting genuinely indefinite input.
                eigvals, eigvecs = np.linalg.eigh(cov)
                if eigvals.min() < -1e-10:
                    raise InvalidArgumentError(
                        f"covariance {i} is not positive semidefinite "
                        f"(min eigenvalue {eigvals.min()})"
                    ) from None
                factors[i] = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_factors", factors)
        object.__setattr__(self, "_cum_weights", np.cumsum(weights))

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def mixture_mean(spec: GmmSpec) -> np.ndarray:
    return spec.weights @ spec.means


def sample_gmm_labeled(spec: GmmSpec, rng: np.random.Generator):
    """Draw one sample; returns (value, component index).

    Consumes exactly 1 uniform (component choice) and dim standard normals
    per call regardless of the component drawn, keeping streams aligned.
    """
    u = rng.random()
    comp = int(np.searchsorted(spec._cum_weights, u, side="right"))
    if comp >= spec.n_components:
        comp = spec.n_components - 1
    z = rng.standard_normal(spec.dim)
    return spec.means[comp] + spec._factors[comp] @ z, comp


def sample_gmm(spec: GmmSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one sample from the mixture."""
    return sample_gmm_labeled(spec, rng)[0]


@dataclass(frozen=True)
class LqrSolution:
    """Fixed point of the discounted Riccati equation and its feedback gain."""

    p: np.ndarray
    k: np.ndarray
    gamma: float
    iterations: int
    residual: float


def solve_dare(a, b, q, r, gamma: float) -> LqrSolution:
    """Solve the discounted discrete Riccati equation by value iteration.

    P = Q + g A'PA - g^2 A'PB (R + g B'PB)^-1 B'PA, with the optimal gain
    K = -g (R + g B'PB)^-1 B'PA for u = Kx.  Iterates from P = Q until the
    successive change is below 1e-12 relative to max(1, ||P||_F).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"a must be square, got {a.shape}")
    n = a.shape[0]
    if b.ndim != 2 or b.shape[0] != n:
        raise InvalidArgumentError(f"b must be ({n}, m), got {b.shape}")
    if q.shape != (n, n) or not np.allclose(q, q.T, atol=1e-12, rtol=0.0):
        raise InvalidArgumentError("q must be symmetric n x n")
    if np.linalg.eigvalsh(q).min() < -1e-12:
        raise InvalidArgumentError("q must be positive semidefinite")
    m = b.shape[1]
    if r.shape != (m, m) or not np.allclose(r, r.T, atol=1e-12, rtol=0.0):
        raise InvalidArgumentError("r must be symmetric m x m")
    if np.linalg.eigvalsh(r).min() <= 0.0:
        raise InvalidArgumentError("r must be positive definite")
    if not (0.0 < gamma <= 1.0):
        raise InvalidArgumentError(f"gamma must be in (0, 1], got {gamma}")

    max_iters = 100_000
    p = q.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iters + 1):
            bpa = b.T @ p @ a
            gain_lhs = r + gamma * (b.T @ p @ b)
            sol = np.linalg.solve(gain_lhs, bpa)
            p_next = q + gamma * (a.T @ p @ a) - gamma**2 * (a.T @ p @ b) @ sol
            p_next = 0.5 * (p_next + p_next.T)
            if not np.all(np.isfinite(p_next)):
                raise NumericError("Riccati value iteration diverged",
                                   iterations=it)
            change = np.linalg.norm(p_next - p)
            p = p_next
            if change < 1e-12 * max(1.0, np.linalg.norm(p)):
                break
        else:
            raise NumericError(
                "Riccati value iteration did not converge",
                iterations=max_iters, last_change=change,
            )
    bpa = b.T @ p @ a
    gain_lhs = r + gamma * (b.T @ p @ b)
    sol = np.linalg.solve(gain_lhs, bpa)
    k = -gamma * sol
    rhs = q + gamma * (a.T @ p @ a) - gamma**2 * (a.T @ p @ b) @ sol
    residual = float(np.linalg.norm(p - rhs))
    return LqrSolution(p=p, k=k, gamma=float(gamma), iterations=it,
                       residual=residual)


@dataclass(frozen=True)
class SystemModel:
    """A closed-loop plant ready to simulate: x' = f(x, w)."""

    name: str
    state_dim: int
    a: Optional[np.ndarray]
    b: Optional[np.ndarray]
    k: Optional[np.ndarray]
    a_cl: Optional[np.ndarray]
    step_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _pendulum_matrices():
    g, mass, length, friction = 9.81, 0.15, 0.5, 0.1
    a = np.array([
        [1.0, _EPS],
        [g * _EPS / length, 1.0 - friction * _EPS / (mass * length**2)],
    ])
    b = np.array([[0.0], [_EPS / (mass * length**2)]])
    return a, b


def _tracking_matrices():
    a = np.array([[1.0, 2.0], [0.0, 1.0 - 0.04 * _EPS]])
    b = np.array([[0.0], [_EPS]])
    return a, b


def _boeing_matrices():
    # Boeing 747 longitudinal model, steady level flight at 40000 ft and
    # 774 ft/s, already discretized at 1 s sampling; see Boyd & Vandenberghe,
    # "Introduction to Applied Linear Algebra" (VMLS).
    a = np.array([
        [0.99, 0.03, -0.02, -0.32],
        [0.01, 0.47, 4.70, 0.00],
        [0.02, -0.06, 0.40, 0.00],
        [0.01, -0.04, 0.72, 0.99],
    ])
    b = np.array([
        [0.01, 0.99],
        [-3.44, 1.66],
        [-0.83, 0.44],
        [-0.47, 0.25],
    ])
    return a, b


def _vdp_step(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.array([
        x[0] + _EPS * (x[1] + w[0]),
        x[1] + _EPS * (_VDP_MU * (1.0 - x[0] ** 2) * x[1] - x[1] + w[1]),
    ])


def system_matrices(name: str):
    """Open-loop (A, B) for a controlled system; None for vdp."""
    if name == "pendulum":
        return _pendulum_matrices()
    if name == "tracking":
        return _tracking_matrices()
    if name == "boeing747":
        return _boeing_matrices()
    if name == "vdp":
        return None
    raise InvalidArgumentError(f"unknown system {name!r} (choose from {SYSTEM_NAMES})")


def state_dim(name: str) -> int:
    if name == "vdp":
        return 2
    return system_matrices(name)[0].shape[0]


def build_system(name: str, gmm: GmmSpec, lqr: Optional[LqrSolution]) -> SystemModel:
    """Assemble a closed-loop model, checking the noise dimension.

    Controlled systems require an LqrSolution; the uncontrolled vdp
    oscillator rejects one.
    """
    if name not in SYSTEM_NAMES:
        raise InvalidArgumentError(
            f"unknown system {name!r} (choose from {SYSTEM_NAMES})"
        )
    n = state_dim(name)
    if gmm.dim != n:
        raise InvalidArgumentError(
            f"gmm dimension {gmm.dim} does not match {name} state dimension {n}"
        )
    if name == "vdp":
        if lqr is not None:
            raise InvalidArgumentError("vdp is uncontrolled; lqr must be None")
        return SystemModel(name=name, state_dim=n, a=None, b=None, k=None,
                           a_cl=None, step_fn=_vdp_step)
    if lqr is None:
        raise InvalidArgumentError(f"{name} is controlled; an LqrSolution is required")
    a, b = system_matrices(name)
    if lqr.k.shape != (b.shape[1], n):
        raise InvalidArgumentError(
            f"gain shape {lqr.k.shape} does not match ({b.shape[1]}, {n})"
        )
    a_cl = a + b @ lqr.k
    return SystemModel(name=name, state_dim=n, a=a, b=b, k=lqr.k,
                       a_cl=np.ascontiguousarray(a_cl), step_fn=None)


def default_lqr(name: str, gamma: float = 0.9999) -> Optional[LqrSolution]:
    """The gain used throughout: Q = R = I at discount 0.9999."""
    mats = system_matrices(name)
    if mats is None:
        return None
    a, b = mats
    n, m = b.shape
    return solve_dare(a, b, np.eye(n), np.eye(m), gamma)


def make_system(name: str, gmm: GmmSpec) -> SystemModel:
    """build_system with the default LQR synthesized for controlled plants."""
    return build_system(name, gmm, default_lqr(name))


def step(model: SystemModel, x, w) -> np.ndarray:
    """Advance the plant one step; raises NumericError on non-finite output."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if x.shape != (model.state_dim,):
        raise InvalidArgumentError(
            f"state must have shape ({model.state_dim},), got {x.shape}"
        )
    if w.shape != (model.state_dim,):
        raise InvalidArgumentError(
            f"noise must have shape ({model.state_dim},), got {w.shape}"
        )
    if model.step_fn is not None:
        out = model.step_fn(x, w)
    else:
        out = model.a_cl @ x + w
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite state after step", system=model.name)
    return out
