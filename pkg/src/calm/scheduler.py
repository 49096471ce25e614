"""Binary transmission scheduler trained with clipped-surrogate PPO.

The policy maps the pre-decision estimation error to two logits over
{silence, transmit}; the value network maps the same error to a scalar.
Updates maximize E[min(z A, clip(z, 1 +- eps) A)] + entropy bonus with z the
likelihood ratio against the sampling policy, advantages from GAE.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels, nn
from .errors import InvalidArgumentError, NumericError


@dataclass(frozen=True)
class PolicyNet:
    """Two-logit categorical policy over {0: stay silent, 1: transmit}."""

    params: nn.MlpParams


@dataclass(frozen=True)
class ValueNet:
    params: nn.MlpParams


def make_policy(state_dim: int, hidden_sizes, seed) -> PolicyNet:
    return PolicyNet(nn.init_mlp((state_dim, *hidden_sizes, 2), seed))


def make_value(state_dim: int, hidden_sizes, seed) -> ValueNet:
    return ValueNet(nn.init_mlp((state_dim, *hidden_sizes, 1), seed))


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def policy_sample(policy: PolicyNet, error, rng: np.random.Generator):
    """Draw delta ~ pi(.|error); returns (delta, log pi(delta|error)).

    Consumes exactly one uniform from rng per call.
    """
    logits = nn.forward(policy.params, error)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite policy logits")
    m = logits.max()
    s = logits - m
    lse = np.log(np.exp(s).sum())
    log_probs = s - lse
    p_transmit = np.exp(log_probs[1])
    delta = 1 if rng.random() < p_transmit else 0
    return delta, float(log_probs[delta])


def policy_log_probs(policy: PolicyNet, errors) -> np.ndarray:
    """Log probabilities of both actions for a batch of errors, shape (n, 2)."""
    logits = nn.forward_batch(policy.params, errors)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite policy logits")
    return _log_softmax_rows(logits)


@dataclass(frozen=True)
class RolloutBuffer:
    """One trajectory's training data for PPO (pre-decision errors)."""

    errors: np.ndarray      # (T, n)
    actions: np.ndarray     # (T,) in {0, 1}
    log_probs: np.ndarray   # (T,) log pi_old(action)
    rewards: np.ndarray     # (T,)
    values: np.ndarray      # (T,)
    advantages: np.ndarray  # (T,)
    returns: np.ndarray     # (T,) GAE targets

    def __post_init__(self):
        t = self.errors.shape[0]
        for name in ("actions", "log_probs", "rewards", "values",
                     "advantages", "returns"):
            if getattr(self, name).shape != (t,):
                raise InvalidArgumentError(f"buffer field {name} must have shape ({t},)")

    @property
    def steps(self) -> int:
        return self.errors.shape[0]


def compute_gae(rewards, values, bootstrap_value: float, gamma: float,
                lam: float):
    """GAE by backward recursion; returns (advantages, value targets)."""
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if rewards.ndim != 1 or rewards.shape != values.shape:
        raise InvalidArgumentError(
            f"rewards {rewards.shape} and values {values.shape} must be equal-length vectors"
        )
    if rewards.shape[0] == 0:
        raise InvalidArgumentError("empty reward sequence")
    if not (0.0 < gamma <= 1.0) or not (0.0 <= lam <= 1.0):
        raise InvalidArgumentError(f"bad gamma/lambda: {gamma}, {lam}")
    return kernels.gae_advantages(rewards, values, float(bootstrap_value),
                                  float(gamma), float(lam))


@dataclass(frozen=True)
class PpoStats:
    objective: float
    surrogate: float
    value_loss: float
    entropy: float
    clip_fraction: float


def _policy_terms(params, errors, actions, old_log_probs, advantages, clip_eps):
    logits, acts = kernels.mlp_forward_batch_cached(params.weights, params.biases,
                                                    errors)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite policy logits in update",
                           batch=errors.shape[0])
    lsm = _log_softmax_rows(logits)
    idx = np.arange(actions.shape[0])
    ratio = np.exp(lsm[idx, actions] - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    terms = np.minimum(unclipped, clipped)
    probs = np.exp(lsm)
    entropy = -(probs * lsm).sum(axis=1)
    return logits, acts, lsm, probs, ratio, unclipped, clipped, terms, entropy


def policy_objective(policy: PolicyNet, errors, actions, old_log_probs,
                     advantages, clip_eps: float, entropy_coef: float):
    """The maximized PPO objective and its components (no gradient)."""
    errors = np.ascontiguousarray(errors, dtype=np.float64)
    (_, _, _, _, _, unclipped, clipped, terms,
     entropy) = _policy_terms(policy.params, errors, actions, old_log_probs,
                              advantages, clip_eps)
    surrogate = float(terms.mean())
    ent = float(entropy.mean())
    objective = surrogate + entropy_coef * ent
    clip_frac = float((clipped < unclipped).mean())
    return PpoStats(objective=objective, surrogate=surrogate,
                    value_loss=float("nan"), entropy=ent,
                    clip_fraction=clip_frac)


def policy_objective_grads(policy: PolicyNet, errors, actions, old_log_probs,
                           advantages, clip_eps: float, entropy_coef: float):
    """Objective stats plus its ascent gradient w.r.t. policy parameters."""
    errors = np.ascontiguousarray(errors, dtype=np.float64)
    (_, acts, lsm, probs, ratio, unclipped, clipped, terms,
     entropy) = _policy_terms(policy.params, errors, actions, old_log_probs,
                              advantages, clip_eps)
    n = errors.shape[0]
    # min() picks the unclipped branch on ties, so the gradient there is z*A;
    # when the clipped branch is strictly smaller the clip is binding and the
    # gradient vanishes.
    g_logp = np.where(unclipped <= clipped, ratio * advantages, 0.0)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), actions] = 1.0
    d_logits = g_logp[:, None] * (onehot - probs)
    d_logits -= entropy_coef * probs * (lsm + entropy[:, None])
    d_logits /= n
    dws, dbs, _ = kernels.mlp_backward_batch(policy.params.weights, acts,
                                             np.ascontiguousarray(d_logits))
    stats = PpoStats(
        objective=float(terms.mean() + entropy_coef * entropy.mean()),
        surrogate=float(terms.mean()),
        value_loss=float("nan"),
        entropy=float(entropy.mean()),
        clip_fraction=float((clipped < unclipped).mean()),
    )
    return stats, nn.GradientBundle(dws, dbs, None)


def value_loss_grads(value_net: ValueNet, errors, targets):
    """Mean squared error of the value head and its descent gradient."""
    errors = np.ascontiguousarray(errors, dtype=np.float64)
    preds, acts = kernels.mlp_forward_batch_cached(
        value_net.params.weights, value_net.params.biases, errors)
    resid = preds[:, 0] - targets
    loss = float(np.mean(resid**2))
    upstream = (2.0 / errors.shape[0]) * resid[:, None]
    dws, dbs, _ = kernels.mlp_backward_batch(value_net.params.weights, acts,
                                             np.ascontiguousarray(upstream))
    return loss, nn.GradientBundle(dws, dbs, None)


def value_loss(value_net: ValueNet, errors, targets) -> float:
    preds = nn.forward_batch(value_net.params, errors)
    return float(np.mean((preds[:, 0] - targets) ** 2))


def ppo_update(policy: PolicyNet, value_net: ValueNet, buffers, config,
               policy_opt: Optional[nn.OptimizerState] = None,
               value_opt: Optional[nn.OptimizerState] = None):
    """Full-batch PPO update over a list of RolloutBuffer.

    Runs config.ppo_update_epochs gradient passes on the concatenated batch.
    Optimizer states persist across calls when passed back in; fresh Adam
    states are created otherwise.  Returns (policy, value_net, policy_opt,
    value_opt, stats) with stats from the final pass.
    """
    if not buffers:
        raise InvalidArgumentError("ppo_update needs at least one rollout")
    errors = np.ascontiguousarray(np.concatenate([b.errors for b in buffers]))
    actions = np.concatenate([b.actions for b in buffers]).astype(np.int64)
    old_logp = np.concatenate([b.log_probs for b in buffers])
    advantages = np.concatenate([b.advantages for b in buffers])
    targets = np.concatenate([b.returns for b in buffers])
    if errors.shape[1] != policy.params.layer_sizes[0]:
        raise InvalidArgumentError(
            f"buffer error dimension {errors.shape[1]} does not match policy input"
        )
    if config.normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    if policy_opt is None:
        policy_opt = nn.init_adam(policy.params, config.learning_rate)
    if value_opt is None:
        value_opt = nn.init_adam(value_net.params, config.learning_rate)

    stats = None
    vloss = float("nan")
    for _ in range(config.ppo_update_epochs):
        stats, grads = policy_objective_grads(
            policy, errors, actions, old_logp, advantages,
            config.clip_eps, config.entropy_coef)
        if not np.isfinite(stats.objective):
            raise NumericError("non-finite PPO objective",
                               batch=errors.shape[0],
                               max_advantage=float(np.abs(advantages).max()))
        descent = nn.GradientBundle([-g for g in grads.d_weights],
                                    [-g for g in grads.d_biases], None)
        new_params, policy_opt = nn.adam_step(policy.params, policy_opt, descent)
        policy = PolicyNet(new_params)
        vloss, vgrads = value_loss_grads(value_net, errors, targets)
        new_vparams, value_opt = nn.adam_step(value_net.params, value_opt, vgrads)
        value_net = ValueNet(new_vparams)
    stats = PpoStats(objective=stats.objective, surrogate=stats.surrogate,
                     value_loss=vloss, entropy=stats.entropy,
                     clip_fraction=stats.clip_fraction)
    return policy, value_net, policy_opt, value_opt, stats
