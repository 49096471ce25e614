"""Alternating training of the scheduler and the estimator.

One outer iteration runs ppo_epochs collect+update cycles for the policy
against the frozen estimator, then estimator_epochs regression epochs for
the residual network against the frozen policy.  Rollouts draw the initial
state from Uniform[-1, 1]^n; per step t the reward is
r_t = -(||x_t - x^_t||^2_Gamma + lambda * delta_t) with the post-decision
estimate, so the negated discounted return equals the scheduling cost.

Reproducibility: every rollout gets its own generator derived from the root
seed through a SeedSequence entropy tuple (seed, stream, *path).  Streams:
0 network init, 1 PPO rollouts (outer, epoch, rollout), 2 estimator phase
(outer, epoch, rollout), 3 baseline pretraining (1, epoch, rollout).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import nn, systems
from .errors import InvalidArgumentError, NumericError
from .estimator import (EstimatorNet, EstimatorState, make_estimator,
                        predict_estimate, residual_input, train_estimator)
from .scheduler import (PolicyNet, RolloutBuffer, ValueNet, compute_gae,
                        make_policy, make_value, policy_sample, ppo_update)

INIT_STREAM = 0
PPO_STREAM = 1
ESTIMATOR_STREAM = 2
BASELINE_STREAM = 3

TRAINING_LOG_COLUMNS = ("outer_iter", "phase", "epoch", "mean_return",
                        "tx_rate", "estimator_loss", "entropy")
PPO_LOG_COLUMNS = ("epoch", "mean_reward", "surrogate", "value_loss", "entropy")


def rng_for(root: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (root, *path)."""
    return np.random.default_rng(
        np.random.SeedSequence([int(root), *(int(p) for p in path)]))


def init_seed(root: int, index: int) -> int:
    """Derived integer seed for network initialization."""
    ss = np.random.SeedSequence([int(root), INIT_STREAM, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-step log of one rollout plus its realized discounted totals.

    `error` is the post-decision error x - x^ (exactly zero at transmit
    steps); `pre_error` is the policy input observed before the decision.
    `component[t]` labels the mixture component of the noise applied between
    steps t and t+1.  `pred_inputs[t]` is the residual-network input that
    produced the prediction for step t (row 0 unused).
    """

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    error: np.ndarray
    pre_error: np.ndarray
    delta: np.ndarray
    aoi: np.ndarray
    log_prob: np.ndarray
    err_term: np.ndarray
    step_cost: np.ndarray
    component: np.ndarray
    pred_inputs: np.ndarray
    discounted_cost: float
    discounted_err_cost: float
    discounted_tx_mass: float
    tx_count: int

    @property
    def rewards(self) -> np.ndarray:
        return -self.step_cost


def simulate(decide: Callable, estimator_net: Optional[EstimatorNet],
             model: systems.SystemModel, gmm: systems.GmmSpec, horizon: int,
             gamma: float, comm_lambda: float, error_weight: np.ndarray,
             rng: np.random.Generator) -> TrajectoryRecord:
    """Roll out one trajectory under an arbitrary decision rule.

    decide(pre_error, t, rng) -> (delta, log_prob) is called once per step;
    estimator_net=None runs the linear baseline estimator.  Raises
    NumericError with the step index if the state or estimate diverges.
    """
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    n = model.state_dim
    x = rng.uniform(-1.0, 1.0, n)
    pred = np.zeros(n)
    last_tx = 0
    xs = np.empty((horizon, n))
    xhats = np.empty((horizon, n))
    errors = np.empty((horizon, n))
    pre_errors = np.empty((horizon, n))
    deltas = np.zeros(horizon, dtype=np.int64)
    aois = np.zeros(horizon, dtype=np.int64)
    log_probs = np.full(horizon, np.nan)
    err_terms = np.empty(horizon)
    step_costs = np.empty(horizon)
    components = np.zeros(max(horizon - 1, 0), dtype=np.int64)
    pred_inputs = np.zeros((horizon, n + 1))
    disc = 1.0
    total = err_total = tx_mass = 0.0
    tx_count = 0
    for t in range(horizon):
        e_pre = x - pred
        delta, logp = decide(e_pre, t, rng)
        delta = 1 if delta else 0
        if delta:
            xhat = x.copy()
            last_tx = t
            e_post = np.zeros(n)
            tx_count += 1
        else:
            xhat = pred
            e_post = e_pre
        err_term = float(e_post @ error_weight @ e_post)
        cost = err_term + comm_lambda * delta
        xs[t] = x
        xhats[t] = xhat
        errors[t] = e_post
        pre_errors[t] = e_pre
        deltas[t] = delta
        aois[t] = t - last_tx
        log_probs[t] = logp
        err_terms[t] = err_term
        step_costs[t] = cost
        total += disc * cost
        err_total += disc * err_term
        tx_mass += disc * delta
        disc *= gamma
        if t < horizon - 1:
            w, comp = systems.sample_gmm_labeled(gmm, rng)
            components[t] = comp
            state = EstimatorState(xhat, t, last_tx)
            pred_inputs[t + 1] = residual_input(xhat, state.aoi)
            try:
                pred = predict_estimate(state, estimator_net, model)
                x = systems.step(model, x, w)
            except NumericError as exc:
                raise NumericError(f"rollout diverged: {exc}", step=t + 1) from exc
    return TrajectoryRecord(
        t=np.arange(horizon, dtype=np.int64), x=xs, xhat=xhats, error=errors,
        pre_error=pre_errors, delta=deltas, aoi=aois, log_prob=log_probs,
        err_term=err_terms, step_cost=step_costs, component=components,
        pred_inputs=pred_inputs, discounted_cost=total,
        discounted_err_cost=err_total, discounted_tx_mass=tx_mass,
        tx_count=tx_count,
    )


def collect_rollout(policy: PolicyNet, estimator_net: Optional[EstimatorNet],
                    model: systems.SystemModel, gmm: systems.GmmSpec, config,
                    rng: np.random.Generator,
                    value_net: Optional[ValueNet] = None):
    """One on-policy trajectory as (RolloutBuffer, TrajectoryRecord).

    Advantages come from GAE with a zero bootstrap (episodes end at the
    horizon); values are zero when no value net is given.
    """

    def decide(e, t, r):
        return policy_sample(policy, e, r)

    gamma_mat = config.resolved_error_weight(model.state_dim)
    rec = simulate(decide, estimator_net, model, gmm, config.horizon,
                   config.gamma, config.comm_lambda, gamma_mat, rng)
    rewards = -rec.step_cost
    if value_net is not None:
        values = nn.forward_batch(value_net.params, rec.pre_error)[:, 0]
    else:
        values = np.zeros(config.horizon)
    adv, ret = compute_gae(rewards, values, 0.0, config.gamma,
                           config.gae_lambda)
    buf = RolloutBuffer(errors=rec.pre_error, actions=rec.delta,
                        log_probs=rec.log_prob, rewards=rewards, values=values,
                        advantages=adv, returns=ret)
    return buf, rec


@dataclass(frozen=True)
class TrainResult:
    policy: PolicyNet
    value: ValueNet
    estimator: Optional[EstimatorNet]
    model: systems.SystemModel
    training_rows: list
    ppo_rows: list


def _ppo_phase(policy, value, estimator_net, model, config, stream, outer,
               popt, vopt, epochs, training_rows, ppo_rows, phase_name,
               epoch_offset):
    for epoch in range(1, epochs + 1):
        buffers = []
        records = []
        for ridx in range(config.rollouts_per_epoch):
            rng = rng_for(config.seed, stream, outer, epoch, ridx)
            buf, rec = collect_rollout(policy, estimator_net, model,
                                       config.gmm, config, rng, value)
            buffers.append(buf)
            records.append(rec)
        policy, value, popt, vopt, stats = ppo_update(policy, value, buffers,
                                                      config, popt, vopt)
        mean_return = float(np.mean([-r.discounted_cost for r in records]))
        tx_rate = float(np.mean([r.tx_count / config.horizon for r in records]))
        training_rows.append({
            "outer_iter": outer, "phase": phase_name, "epoch": epoch,
            "mean_return": mean_return, "tx_rate": tx_rate,
            "estimator_loss": None, "entropy": stats.entropy,
        })
        ppo_rows.append({
            "epoch": epoch_offset + epoch, "mean_reward": mean_return,
            "surrogate": stats.surrogate, "value_loss": stats.value_loss,
            "entropy": stats.entropy,
        })
    return policy, value, popt, vopt


def calm_train(config, on_iteration: Optional[Callable] = None) -> TrainResult:
    """Alternating scheduler/estimator training from scratch.

    on_iteration(outer, policy, value, estimator) runs after each outer
    iteration (checkpoint hook).
    """
    model = systems.make_system(config.system, config.gmm)
    n = model.state_dim
    hidden = config.hidden_sizes
    policy = make_policy(n, hidden, init_seed(config.seed, 0))
    value = make_value(n, hidden, init_seed(config.seed, 1))
    est = make_estimator(n, hidden, init_seed(config.seed, 2))
    popt = nn.init_adam(policy.params, config.learning_rate)
    vopt = nn.init_adam(value.params, config.learning_rate)
    eopt = nn.init_adam(est.params, config.learning_rate,
                        weight_decay=config.weight_decay)
    training_rows: list = []
    ppo_rows: list = []
    for outer in range(1, config.outer_iters + 1):
        policy, value, popt, vopt = _ppo_phase(
            policy, value, est, model, config, PPO_STREAM, outer, popt, vopt,
            config.ppo_epochs, training_rows, ppo_rows, "scheduler",
            (outer - 1) * config.ppo_epochs)
        est, eopt, est_rows = train_estimator(est, policy, model, config.gmm,
                                              config, eopt, seed_path=(outer,))
        for row in est_rows:
            training_rows.append({
                "outer_iter": outer, "phase": "estimator",
                "epoch": row["epoch"], "mean_return": row["mean_return"],
                "tx_rate": row["tx_rate"], "estimator_loss": row["loss"],
                "entropy": None,
            })
        if on_iteration is not None:
            on_iteration(outer, policy, value, est)
    return TrainResult(policy=policy, value=value, estimator=est, model=model,
                       training_rows=training_rows, ppo_rows=ppo_rows)


def pretrain_linear_baseline(config,
                             on_iteration: Optional[Callable] = None) -> TrainResult:
    """Train a scheduler by PPO against the fixed linear estimator.

    Uses the same network initializations as calm_train so the comparison
    starts from identical policies.  The result's estimator is None.
    """
    model = systems.make_system(config.system, config.gmm)
    n = model.state_dim
    hidden = config.hidden_sizes
    policy = make_policy(n, hidden, init_seed(config.seed, 0))
    value = make_value(n, hidden, init_seed(config.seed, 1))
    popt = nn.init_adam(policy.params, config.learning_rate)
    vopt = nn.init_adam(value.params, config.learning_rate)
    training_rows: list = []
    ppo_rows: list = []
    policy, value, popt, vopt = _ppo_phase(
        policy, value, None, model, config, BASELINE_STREAM, 1, popt, vopt,
        config.baseline_ppo_epochs, training_rows, ppo_rows, "baseline", 0)
    if on_iteration is not None:
        on_iteration(1, policy, value, None)
    return TrainResult(policy=policy, value=value, estimator=None, model=model,
                       training_rows=training_rows, ppo_rows=ppo_rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_training_log(rows, path) -> None:
    """training_log.csv: one row per epoch of either phase."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAINING_LOG_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in TRAINING_LOG_COLUMNS])


def write_ppo_log(rows, path) -> None:
    """ppo_log.csv: per-update diagnostics of the scheduler phases."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PPO_LOG_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in PPO_LOG_COLUMNS])
