"""Small fully connected networks with hand-written reverse-mode gradients.

Everything is float64.  Hidden layers are ReLU, the output layer is the
identity, and the ReLU subgradient at 0 is taken to be 0.  Parameter
containers are frozen dataclasses; the arrays inside must be treated as
read-only (the optimizer returns fresh copies instead of mutating).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases of one network; weights[i] has shape (out, in)."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass(frozen=True)
class GradientBundle:
    """Gradients matching an MlpParams, plus the gradient at the input."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray | None = None


@dataclass(frozen=True)
class OptimizerState:
    """Adam state (first/second moments, step count, hyperparameters).

    weight_decay is decoupled and applied to weight matrices only, never to
    biases, before the Adam update of each step.
    """

    lr: float
    beta1: float
    beta2: float
    eps: float
    weight_decay: float
    step: int
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]


def init_mlp(layer_sizes, seed) -> MlpParams:
    """Initialize weights uniformly in +-1/sqrt(fan_in); biases start at 0."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise InvalidArgumentError(f"need at least 2 layer sizes, got {sizes}")
    if any(s < 1 for s in sizes):
        raise InvalidArgumentError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases)


def _coerce_vec(x, dim, name) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (dim,):
        raise InvalidArgumentError(f"{name} must have shape ({dim},), got {x.shape}")
    return x


def forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network at a single input vector."""
    x = _coerce_vec(x, params.layer_sizes[0], "input")
    return kernels.mlp_forward(params.weights, params.biases, x)


def forward_batch(params: MlpParams, xs) -> np.ndarray:
    """Evaluate the network at a batch of inputs (one per row)."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != params.layer_sizes[0]:
        raise InvalidArgumentError(
            f"batch must have shape (n, {params.layer_sizes[0]}), got {xs.shape}"
        )
    return kernels.mlp_forward_batch(params.weights, params.biases, xs)


def backward(params: MlpParams, x, upstream_grad) -> GradientBundle:
    """Gradients of <upstream_grad, net(x)> w.r.t. every parameter and x."""
    x = _coerce_vec(x, params.layer_sizes[0], "input")
    upstream = _coerce_vec(upstream_grad, params.layer_sizes[-1], "upstream_grad")
    _, acts = kernels.mlp_forward_cached(params.weights, params.biases, x)
    dws, dbs, dx = kernels.mlp_backward(params.weights, acts, upstream)
    return GradientBundle(dws, dbs, dx)


def init_adam(params: MlpParams, lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> OptimizerState:
    if lr <= 0.0:
        raise InvalidArgumentError(f"lr must be positive, got {lr}")
    if weight_decay < 0.0:
        raise InvalidArgumentError(f"weight_decay must be >= 0, got {weight_decay}")
    return OptimizerState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay,
        step=0,
        m_weights=[np.zeros_like(w) for w in params.weights],
        v_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_biases=[np.zeros_like(b) for b in params.biases],
    )


def adam_step(params: MlpParams, state: OptimizerState,
              grads: GradientBundle) -> tuple[MlpParams, OptimizerState]:
    """One bias-corrected Adam step.  Returns new params and state.

    Raises NumericError on non-finite gradients, leaving params untouched.
    """
    if len(grads.d_weights) != len(params.weights):
        raise InvalidArgumentError("gradient layer count does not match params")
    for g, w in zip(grads.d_weights, params.weights):
        if g.shape != w.shape:
            raise InvalidArgumentError(
                f"weight gradient shape {g.shape} does not match {w.shape}"
            )
    for g, b in zip(grads.d_biases, params.biases):
        if g.shape != b.shape:
            raise InvalidArgumentError(
                f"bias gradient shape {g.shape} does not match {b.shape}"
            )
    for g in (*grads.d_weights, *grads.d_biases):
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient in adam_step", step=state.step + 1)

    step = state.step + 1
    corr1 = 1.0 - state.beta1 ** step
    corr2 = 1.0 - state.beta2 ** step
    new_w, new_mw, new_vw = [], [], []
    for w, g, m, v in zip(params.weights, grads.d_weights,
                          state.m_weights, state.v_weights):
        w, m, v = w.copy(), m.copy(), v.copy()
        kernels.adam_apply(w, np.ascontiguousarray(g), m, v, state.lr,
                           state.beta1, state.beta2, state.eps,
                           corr1, corr2, state.weight_decay)
        new_w.append(w)
        new_mw.append(m)
        new_vw.append(v)
    new_b, new_mb, new_vb = [], [], []
    for b, g, m, v in zip(params.biases, grads.d_biases,
                          state.m_biases, state.v_biases):
        b, m, v = b.copy(), m.copy(), v.copy()
        kernels.adam_apply(b, np.ascontiguousarray(g), m, v, state.lr,
                           state.beta1, state.beta2, state.eps,
                           corr1, corr2, 0.0)
        new_b.append(b)
        new_mb.append(m)
        new_vb.append(v)
    new_params = MlpParams(params.layer_sizes, new_w, new_b)
    new_state = OptimizerState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
        weight_decay=state.weight_decay, step=step,
        m_weights=new_mw, v_weights=new_vw, m_biases=new_mb, v_biases=new_vb,
    )
    return new_params, new_state


def save_checkpoint(params: MlpParams, path, meta: dict | None = None) -> None:
    """Write params as a self-describing JSON file (row-major flat arrays)."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "meta": dict(meta or {}),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def load_checkpoint(path) -> tuple[MlpParams, dict]:
    """Inverse of save_checkpoint; returns (params, meta)."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise InvalidArgumentError(
            f"unsupported checkpoint format_version {version!r} in {path}"
        )
    sizes = tuple(int(s) for s in payload["layer_sizes"])
    weights = []
    biases = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        flat = np.asarray(payload["weights"][i], dtype=np.float64)
        if flat.size != fan_in * fan_out:
            raise InvalidArgumentError(
                f"layer {i} weight size {flat.size} does not match "
                f"{fan_out}x{fan_in} in {path}"
            )
        weights.append(np.ascontiguousarray(flat.reshape(fan_out, fan_in)))
        b = np.asarray(payload["biases"][i], dtype=np.float64)
        if b.shape != (fan_out,):
            raise InvalidArgumentError(
                f"layer {i} bias size {b.size} does not match {fan_out} in {path}"
            )
        biases.append(np.ascontiguousarray(b))
    return MlpParams(sizes, weights, biases), payload.get("meta", {})


def parameter_count(params: MlpParams) -> int:
    return sum(w.size for w in params.weights) + sum(b.size for b in params.biases)
