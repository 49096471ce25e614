"""Remote state estimator: open-loop propagation plus a learned residual.

Between transmissions the estimate evolves as x^' = f(x^, 0) + xi(x^, aoi),
where xi is a small network reading the current estimate and the age of
information (steps since the last transmission).  On a transmission the
estimate adopts the received state and the age resets to zero.  The linear
baseline is the same recursion with xi = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels, nn, systems
from .errors import InvalidArgumentError, NumericError


@dataclass(frozen=True)
class EstimatorState:
    """Estimate x^ at time t together with the last transmission time."""

    xhat: np.ndarray
    t: int
    last_tx: int

    @property
    def aoi(self) -> int:
        return self.t - self.last_tx


@dataclass(frozen=True)
class EstimatorNet:
    """Residual network xi: (x^, aoi) -> state-dimension correction."""

    params: nn.MlpParams

    @property
    def state_dim(self) -> int:
        return self.params.layer_sizes[-1]


def make_estimator(state_dim: int, hidden_sizes, seed) -> EstimatorNet:
    net = nn.init_mlp((state_dim + 1, *hidden_sizes, state_dim), seed)
    return EstimatorNet(net)


def zero_estimator(state_dim: int, hidden_sizes=(64, 64)) -> EstimatorNet:
    """An estimator whose residual is exactly zero everywhere."""
    params = nn.init_mlp((state_dim + 1, *hidden_sizes, state_dim), 0)
    zeroed = nn.MlpParams(
        params.layer_sizes,
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )
    return EstimatorNet(zeroed)


def initial_state(state_dim: int) -> EstimatorState:
    """x^_0 = E[x_0] = 0 for x_0 ~ Uniform[-1, 1]^n; age starts at zero."""
    return EstimatorState(np.zeros(state_dim), 0, 0)


def residual_input(xhat: np.ndarray, aoi: int) -> np.ndarray:
    out = np.empty(xhat.shape[0] + 1)
    out[:-1] = xhat
    out[-1] = aoi
    return out


def eval_residual(net: EstimatorNet, xhat: np.ndarray, aoi: int) -> np.ndarray:
    return nn.forward(net.params, residual_input(xhat, aoi))


def predict_estimate(state: EstimatorState, net: Optional[EstimatorNet],
                     model: systems.SystemModel) -> np.ndarray:
    """One-step prediction f(x^, 0) + xi(x^, aoi); net=None means xi = 0."""
    pred = systems.step(model, state.xhat, np.zeros(model.state_dim))
    if net is not None:
        pred = pred + eval_residual(net, state.xhat, state.aoi)
        if not np.all(np.isfinite(pred)):
            raise NumericError("non-finite estimate after residual", t=state.t)
    return pred


def estimator_update(state: EstimatorState, net: Optional[EstimatorNet],
                     model: systems.SystemModel, delta: int,
                     x_true=None) -> EstimatorState:
    """Advance the estimator one step given the scheduling decision.

    delta=1 adopts x_true at time t+1 (age resets); delta=0 propagates the
    open-loop prediction corrected by the residual network.
    """
    if delta:
        if x_true is None:
            raise InvalidArgumentError("transmit update requires x_true")
        x_true = np.ascontiguousarray(x_true, dtype=np.float64)
        if x_true.shape != state.xhat.shape:
            raise InvalidArgumentError(
                f"x_true shape {x_true.shape} does not match {state.xhat.shape}"
            )
        return EstimatorState(x_true.copy(), state.t + 1, state.t + 1)
    return EstimatorState(predict_estimate(state, net, model),
                          state.t + 1, state.last_tx)


def linear_baseline_update(state: EstimatorState, model: systems.SystemModel,
                           delta: int, x_true=None) -> EstimatorState:
    """estimator_update with the residual network removed."""
    return estimator_update(state, None, model, delta, x_true)


def train_estimator(net: EstimatorNet, policy, model: systems.SystemModel,
                    gmm: systems.GmmSpec, config, opt_state=None,
                    seed_path=()):
    """Regression phase: fit the residual on rollouts under a frozen policy.

    Each epoch simulates config.estimator_rollouts trajectories, accumulates
    the gradient of the discounted error cost through the final residual call
    of each silent step (no backpropagation through the dynamics), and takes
    one Adam step.  Returns (net, opt_state, per-epoch stats rows).
    """
    from .scheduler import policy_sample
    from .training import ESTIMATOR_STREAM, rng_for, simulate

    if opt_state is None:
        opt_state = nn.init_adam(net.params, config.learning_rate,
                                 weight_decay=config.weight_decay)
    gamma_mat = config.resolved_error_weight(model.state_dim)
    horizon = config.horizon
    if config.estimator_loss_recursion == "forward":
        step_weights = config.gamma ** np.arange(horizon)
    else:  # "as_printed": the recursion L <- gamma L + c_t unrolled
        step_weights = config.gamma ** np.arange(horizon - 1, -1, -1)

    def decide(e, t, rng):
        return policy_sample(policy, e, rng)

    params = net.params
    rows = []
    for epoch in range(1, config.estimator_epochs + 1):
        acc_w = [np.zeros_like(w) for w in params.weights]
        acc_b = [np.zeros_like(b) for b in params.biases]
        loss_sum = err_sum = txm_sum = 0.0
        ret_sum = rate_sum = 0.0
        for ridx in range(config.estimator_rollouts):
            rng = rng_for(config.seed, ESTIMATOR_STREAM, *seed_path, epoch, ridx)
            rec = simulate(decide, EstimatorNet(params), model, gmm, horizon,
                           config.gamma, config.comm_lambda, gamma_mat, rng)
            silent = (rec.delta == 0) & (np.arange(horizon) >= 1)
            err_cost = float(step_weights @ rec.err_term)
            tx_mass = float(step_weights @ rec.delta)
            loss_sum += err_cost + config.comm_lambda * tx_mass
            err_sum += err_cost
            txm_sum += tx_mass
            ret_sum += -rec.discounted_cost
            rate_sum += rec.tx_count / horizon
            if silent.any():
                inputs = np.ascontiguousarray(rec.pred_inputs[silent])
                # d cost / d xi = -2 w_t Gamma e_t at the silent steps
                upstream = (-2.0 * step_weights[silent, None]
                            * (rec.error[silent] @ gamma_mat.T))
                _, acts = kernels.mlp_forward_batch_cached(
                    params.weights, params.biases, inputs)
                dws, dbs, _ = kernels.mlp_backward_batch(
                    params.weights, acts, np.ascontiguousarray(upstream))
                for a, d in zip(acc_w, dws):
                    a += d
                for a, d in zip(acc_b, dbs):
                    a += d
        n_roll = config.estimator_rollouts
        loss = loss_sum / n_roll
        if not np.isfinite(loss):
            raise NumericError("non-finite estimator loss", epoch=epoch)
        grads = nn.GradientBundle([a / n_roll for a in acc_w],
                                  [a / n_roll for a in acc_b], None)
        params, opt_state = nn.adam_step(params, opt_state, grads)
        rows.append({
            "epoch": epoch,
            "loss": loss,
            "err_cost": err_sum / n_roll,
            "tx_mass": txm_sum / n_roll,
            "mean_return": ret_sum / n_roll,
            "tx_rate": rate_sum / n_roll,
        })
    return EstimatorNet(params), opt_state, rows
