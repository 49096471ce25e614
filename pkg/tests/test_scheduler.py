"""PPO machinery: sampling, GAE, objective, gradients, update loop."""

import numpy as np
import pytest

from calm import nn, scheduler
from calm.errors import InvalidArgumentError, NumericError

from conftest import random_mlp


def test_policy_sample_matches_softmax_frequencies():
    policy = scheduler.PolicyNet(random_mlp((2, 8, 2), np.random.default_rng(4)))
    e = np.array([0.6, -0.4])
    logp = scheduler.policy_log_probs(policy, e[None, :])[0]
    p_tx = np.exp(logp[1])
    rng = np.random.default_rng(0)
    n = 20_000
    draws = np.array([scheduler.policy_sample(policy, e, rng)[0]
                      for _ in range(n)])
    assert abs(draws.mean() - p_tx) < 4 * np.sqrt(p_tx * (1 - p_tx) / n)


def test_policy_sample_returns_log_prob_of_drawn_action():
    policy = scheduler.PolicyNet(random_mlp((2, 6, 2), np.random.default_rng(8)))
    rng = np.random.default_rng(1)
    for _ in range(20):
        e = rng.normal(size=2)
        delta, logp = scheduler.policy_sample(policy, e, rng)
        expect = scheduler.policy_log_probs(policy, e[None, :])[0, delta]
        assert logp == pytest.approx(expect, rel=1e-12)
        assert delta in (0, 1)


def test_policy_sample_consumes_one_uniform():
    policy = scheduler.PolicyNet(random_mlp((2, 4, 2), np.random.default_rng(2)))
    e = np.array([0.1, 0.2])
    rng_a = np.random.default_rng(9)
    scheduler.policy_sample(policy, e, rng_a)
    tail_a = rng_a.random(3)
    rng_b = np.random.default_rng(9)
    rng_b.random()
    tail_b = rng_b.random(3)
    np.testing.assert_array_equal(tail_a, tail_b)


def test_log_softmax_is_stable_for_large_logits():
    params = nn.MlpParams((1, 2), [np.array([[1000.0], [-1000.0]])],
                          [np.zeros(2)])
    policy = scheduler.PolicyNet(params)
    logp = scheduler.policy_log_probs(policy, np.array([[1.0]]))
    assert np.all(np.isfinite(logp))
    assert logp[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_gae_double_sum_oracle():
    rng = np.random.default_rng(17)
    for _ in range(200):
        steps = int(rng.integers(1, 13))
        rewards = rng.normal(size=steps)
        values = rng.normal(size=steps)
        boot = float(rng.normal())
        gamma = float(rng.uniform(0.5, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        adv, ret = scheduler.compute_gae(rewards, values, boot, gamma, lam)
        nxt = np.append(values[1:], boot)
        deltas = rewards + gamma * nxt - values
        expect = np.array([
            sum((gamma * lam) ** k * deltas[t + k] for k in range(steps - t))
            for t in range(steps)])
        np.testing.assert_allclose(adv, expect, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(ret, expect + values, rtol=1e-10, atol=1e-10)


def test_gae_lambda_zero_is_td_residual():
    rewards = np.array([1.0, 2.0, 3.0])
    values = np.array([0.5, 0.25, 0.125])
    adv, _ = scheduler.compute_gae(rewards, values, 7.0, 0.9, 0.0)
    np.testing.assert_allclose(
        adv, rewards + 0.9 * np.array([0.25, 0.125, 7.0]) - values, rtol=1e-12)


def test_gae_validation():
    with pytest.raises(InvalidArgumentError):
        scheduler.compute_gae(np.zeros(3), np.zeros(4), 0.0, 0.9, 0.9)
    with pytest.raises(InvalidArgumentError):
        scheduler.compute_gae(np.zeros(0), np.zeros(0), 0.0, 0.9, 0.9)
    with pytest.raises(InvalidArgumentError):
        scheduler.compute_gae(np.zeros(3), np.zeros(3), 0.0, 1.2, 0.9)


def test_rollout_buffer_validates_shapes():
    t = 5
    fields = dict(errors=np.zeros((t, 2)), actions=np.zeros(t, dtype=np.int64),
                  log_probs=np.zeros(t), rewards=np.zeros(t),
                  values=np.zeros(t), advantages=np.zeros(t),
                  returns=np.zeros(t))
    assert scheduler.RolloutBuffer(**fields).steps == t
    bad = dict(fields, rewards=np.zeros(t + 1))
    with pytest.raises(InvalidArgumentError):
        scheduler.RolloutBuffer(**bad)


def _clipping_batch(policy, rng, steps=8):
    """A batch whose ratios are pushed outside [1-eps, 1+eps] on both sides.

    Offsetting the stored behavior log-probs simulates a policy that has
    already moved; margins away from the clip kinks and from ratio ties
    keep finite differences trustworthy.
    """
    errors = rng.normal(0.0, 1.5, (steps, 2))
    actions = rng.integers(0, 2, steps)
    advantages = rng.normal(0.0, 1.0, steps)
    logp_now = scheduler.policy_log_probs(policy, errors)[np.arange(steps), actions]
    offsets = np.tile([0.4, -0.4, 0.0, 0.05], (steps + 3) // 4)[:steps]
    old_logp = logp_now - offsets
    return errors, actions, old_logp, advantages


def test_objective_matches_hand_computation():
    rng = np.random.default_rng(3)
    policy = scheduler.PolicyNet(random_mlp((2, 6, 2), rng))
    errors, actions, old_logp, adv = _clipping_batch(policy, rng)
    eps, c_ent = 0.2, 0.01
    stats = scheduler.policy_objective(policy, errors, actions, old_logp,
                                       adv, eps, c_ent)
    lsm = scheduler.policy_log_probs(policy, errors)
    ratio = np.exp(lsm[np.arange(8), actions] - old_logp)
    # both clip sides must actually engage for this batch to mean anything
    assert (ratio > 1 + eps).any() and (ratio < 1 - eps).any()
    surrogate = np.minimum(ratio * adv,
                           np.clip(ratio, 1 - eps, 1 + eps) * adv).mean()
    entropy = -(np.exp(lsm) * lsm).sum(axis=1).mean()
    assert stats.surrogate == pytest.approx(surrogate, rel=1e-12)
    assert stats.entropy == pytest.approx(entropy, rel=1e-12)
    assert stats.objective == pytest.approx(surrogate + c_ent * entropy, rel=1e-12)
    assert 0.0 < stats.clip_fraction < 1.0


def test_policy_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    policy = scheduler.PolicyNet(random_mlp((2, 5, 2), rng))
    errors, actions, old_logp, adv = _clipping_batch(policy, rng)
    eps, c_ent = 0.2, 0.01
    _, grads = scheduler.policy_objective_grads(policy, errors, actions,
                                                old_logp, adv, eps, c_ent)

    def objective(p):
        return scheduler.policy_objective(scheduler.PolicyNet(p), errors,
                                          actions, old_logp, adv, eps,
                                          c_ent).objective

    params = policy.params
    h = 1e-6
    worst = 0.0
    for mats, gs in ((params.weights, grads.d_weights),
                     (params.biases, grads.d_biases)):
        for mat, g in zip(mats, gs):
            flat = mat.ravel()
            gflat = g.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = objective(params)
                flat[j] = orig - h
                down = objective(params)
                flat[j] = orig
                fd = (up - down) / (2 * h)
                worst = max(worst, abs(gflat[j] - fd) / max(1.0, abs(fd)))
    assert worst < 1e-5


def test_clipped_samples_get_zero_policy_gradient():
    # single step, hugely clipped ratio: the surrogate term is flat, so the
    # only surviving gradient is the entropy bonus
    rng = np.random.default_rng(6)
    policy = scheduler.PolicyNet(random_mlp((2, 4, 2), rng))
    errors = np.array([[0.5, -0.5]])
    actions = np.array([1])
    logp_now = scheduler.policy_log_probs(policy, errors)[0, 1]
    old_logp = np.array([logp_now - 2.0])  # ratio e^2, far above 1 + eps
    adv = np.array([1.0])
    _, grads = scheduler.policy_objective_grads(policy, errors, actions,
                                                old_logp, adv, 0.2, 0.0)
    for g in grads.d_weights + grads.d_biases:
        np.testing.assert_array_equal(g, np.zeros_like(g))


def test_value_loss_grads_match_finite_differences():
    rng = np.random.default_rng(14)
    value = scheduler.ValueNet(random_mlp((2, 5, 1), rng))
    errors = rng.normal(size=(6, 2))
    targets = rng.normal(size=6)
    loss, grads = scheduler.value_loss_grads(value, errors, targets)
    assert loss == pytest.approx(scheduler.value_loss(value, errors, targets),
                                 rel=1e-12)
    params = value.params
    h = 1e-6
    for mats, gs in ((params.weights, grads.d_weights),
                     (params.biases, grads.d_biases)):
        for mat, g in zip(mats, gs):
            flat = mat.ravel()
            gflat = g.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = scheduler.value_loss(value, errors, targets)
                flat[j] = orig - h
                down = scheduler.value_loss(value, errors, targets)
                flat[j] = orig
                fd = (up - down) / (2 * h)
                assert abs(gflat[j] - fd) < 1e-5 * max(1.0, abs(fd))


def _tiny_buffers(policy, value, rng, steps=6, count=2):
    buffers = []
    for _ in range(count):
        errors = rng.normal(size=(steps, 2))
        actions = rng.integers(0, 2, steps)
        logp = scheduler.policy_log_probs(policy, errors)[np.arange(steps), actions]
        rewards = rng.normal(size=steps)
        values = nn.forward_batch(value.params, errors)[:, 0]
        adv, ret = scheduler.compute_gae(rewards, values, 0.0, 0.99, 0.9)
        buffers.append(scheduler.RolloutBuffer(
            errors=errors, actions=actions, log_probs=logp, rewards=rewards,
            values=values, advantages=adv, returns=ret))
    return buffers


def test_ppo_update_improves_objective_and_advances_optimizer(tiny_config):
    rng = np.random.default_rng(0)
    policy = scheduler.make_policy(2, (8,), seed=1)
    value = scheduler.make_value(2, (8,), seed=2)
    buffers = _tiny_buffers(policy, value, rng)
    out_policy, out_value, popt, vopt, stats = scheduler.ppo_update(
        policy, value, buffers, tiny_config)
    assert popt.step == tiny_config.ppo_update_epochs
    assert vopt.step == tiny_config.ppo_update_epochs
    assert np.isfinite(stats.objective) and np.isfinite(stats.value_loss)
    assert 0.0 <= stats.clip_fraction <= 1.0
    assert any((a != b).any() for a, b in zip(policy.params.weights,
                                              out_policy.params.weights))
    # optimizer state persists across calls
    _, _, popt2, _, _ = scheduler.ppo_update(out_policy, out_value, buffers,
                                             tiny_config, popt, vopt)
    assert popt2.step == 2 * tiny_config.ppo_update_epochs


def test_ppo_update_rejects_empty_and_mismatched(tiny_config):
    policy = scheduler.make_policy(2, (8,), seed=1)
    value = scheduler.make_value(2, (8,), seed=2)
    with pytest.raises(InvalidArgumentError):
        scheduler.ppo_update(policy, value, [], tiny_config)
    rng = np.random.default_rng(5)
    wrong = scheduler.make_policy(3, (8,), seed=1)
    buffers = _tiny_buffers(policy, value, rng)
    with pytest.raises(InvalidArgumentError):
        scheduler.ppo_update(wrong, value, buffers, tiny_config)


def test_ppo_update_raises_numeric_error_on_nan_advantages(tiny_config):
    rng = np.random.default_rng(7)
    policy = scheduler.make_policy(2, (8,), seed=1)
    value = scheduler.make_value(2, (8,), seed=2)
    buffers = _tiny_buffers(policy, value, rng)
    bad = scheduler.RolloutBuffer(
        errors=buffers[0].errors, actions=buffers[0].actions,
        log_probs=buffers[0].log_probs, rewards=buffers[0].rewards,
        values=buffers[0].values,
        advantages=np.full_like(buffers[0].advantages, np.nan),
        returns=buffers[0].returns)
    with pytest.raises(NumericError):
        scheduler.ppo_update(policy, value, [bad], tiny_config)
