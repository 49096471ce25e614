"""Baseline schedules, evaluation reports, landscape and Pareto sweeps."""

import csv

import numpy as np
import pytest

from calm import evaluation, training
from calm.errors import InvalidArgumentError
from calm.estimator import make_estimator
from calm.scheduler import make_policy


def test_schedule_constructors_validate():
    with pytest.raises(InvalidArgumentError):
        evaluation.SchedulePolicy.periodic(0)
    with pytest.raises(InvalidArgumentError):
        evaluation.SchedulePolicy.event_triggered(-1.0)
    with pytest.raises(InvalidArgumentError):
        evaluation.SchedulePolicy.learned(None).decider()


def test_periodic_schedule_pattern(pendulum_model, pendulum_gmm):
    sched = evaluation.SchedulePolicy.periodic(2)
    rep = evaluation.evaluate(sched, None, pendulum_model, pendulum_gmm,
                              6, 0.99, 1.0, None, [0])
    rec = rep.first_record
    np.testing.assert_array_equal(rec.delta, [1, 0, 1, 0, 1, 0])
    np.testing.assert_array_equal(rec.aoi, [0, 1, 0, 1, 0, 1])
    assert rep.tx_counts[0] == 3


def test_event_trigger_thresholds(pendulum_model, pendulum_gmm):
    always = evaluation.SchedulePolicy.event_triggered(0.0)
    rep = evaluation.evaluate(always, None, pendulum_model, pendulum_gmm,
                              10, 0.99, 1.0, None, [1])
    assert rep.tx_counts[0] == 10  # ||e||^2 >= 0 always
    lazy = evaluation.SchedulePolicy.event_triggered(1e12)
    rep = evaluation.evaluate(lazy, None, pendulum_model, pendulum_gmm,
                              10, 0.99, 1.0, None, [1])
    assert rep.tx_counts[0] == 0


def test_event_trigger_fires_on_squared_norm(pendulum_model, pendulum_gmm):
    tau = 4.0
    sched = evaluation.SchedulePolicy.event_triggered(tau)
    rep = evaluation.evaluate(sched, None, pendulum_model, pendulum_gmm,
                              40, 0.99, 1.0, None, [3])
    rec = rep.first_record
    fired = rec.pre_error[rec.delta == 1]
    held = rec.pre_error[rec.delta == 0]
    assert np.all((fired**2).sum(axis=1) >= tau)
    assert np.all((held**2).sum(axis=1) < tau)


def test_always_never(pendulum_model, pendulum_gmm):
    rep = evaluation.evaluate(evaluation.SchedulePolicy.always(), None,
                              pendulum_model, pendulum_gmm, 8, 0.99, 1.0,
                              None, [0])
    assert rep.tx_counts[0] == 8
    rep = evaluation.evaluate(evaluation.SchedulePolicy.never(), None,
                              pendulum_model, pendulum_gmm, 8, 0.99, 1.0,
                              None, [0])
    assert rep.tx_counts[0] == 0


def test_evaluate_reproduces_collect_rollout(pendulum_model, pendulum_gmm,
                                             tiny_config):
    policy = make_policy(2, (8,), seed=4)
    net = make_estimator(2, (8,), seed=5)
    rep = evaluation.evaluate(evaluation.SchedulePolicy.learned(policy), net,
                              pendulum_model, pendulum_gmm,
                              tiny_config.horizon, tiny_config.gamma,
                              tiny_config.comm_lambda, None, [123])
    _, rec = training.collect_rollout(policy, net, pendulum_model,
                                      pendulum_gmm, tiny_config,
                                      np.random.default_rng(123))
    assert rep.costs[0] == rec.discounted_cost
    np.testing.assert_array_equal(rep.first_record.x, rec.x)


def test_report_statistics(pendulum_model, pendulum_gmm):
    rep = evaluation.evaluate(evaluation.SchedulePolicy.periodic(3), None,
                              pendulum_model, pendulum_gmm, 15, 0.99, 2.0,
                              None, range(6))
    assert rep.mean_cost == pytest.approx(rep.costs.mean())
    assert rep.std_cost == pytest.approx(rep.costs.std(ddof=1))
    single = evaluation.evaluate(evaluation.SchedulePolicy.periodic(3), None,
                                 pendulum_model, pendulum_gmm, 15, 0.99, 2.0,
                                 None, [0])
    assert single.std_cost == 0.0
    line = evaluation.summary_line(rep)
    assert "policy=periodic:3" in line and "estimator=linear" in line


def test_evaluate_requires_seeds(pendulum_model, pendulum_gmm):
    with pytest.raises(InvalidArgumentError):
        evaluation.evaluate(evaluation.SchedulePolicy.always(), None,
                            pendulum_model, pendulum_gmm, 5, 0.99, 1.0,
                            None, [])


def test_landscape_points_pair_error_with_previous_noise(pendulum_model,
                                                         pendulum_gmm):
    sched = evaluation.SchedulePolicy.periodic(2)
    horizon = 12
    pts = evaluation.landscape_scan(sched, None, pendulum_model, pendulum_gmm,
                                    2 * (horizon - 1), [5, 6], horizon=horizon)
    eye = np.eye(2)
    rec = training.simulate(sched.decider(), None, pendulum_model,
                            pendulum_gmm, horizon, 1.0, 0.0, eye,
                            np.random.default_rng(5))
    for t in range(1, horizon):
        p = pts[t - 1]
        np.testing.assert_array_equal(p.error, rec.pre_error[t])
        assert p.delta == rec.delta[t]
        assert p.component == rec.component[t - 1]


def test_landscape_recycles_seeds_with_substreams(pendulum_model,
                                                  pendulum_gmm):
    sched = evaluation.SchedulePolicy.periodic(2)
    pts = evaluation.landscape_scan(sched, None, pendulum_model, pendulum_gmm,
                                    30, [9], horizon=6)
    assert len(pts) == 30
    # 5 points per rollout: repetitions must differ, not repeat the seed
    first = np.array([p.error for p in pts[:5]])
    second = np.array([p.error for p in pts[5:10]])
    assert (first != second).any()


def test_landscape_validation(pendulum_model, pendulum_gmm):
    sched = evaluation.SchedulePolicy.always()
    with pytest.raises(InvalidArgumentError):
        evaluation.landscape_scan(sched, None, pendulum_model, pendulum_gmm,
                                  0, [0])
    with pytest.raises(InvalidArgumentError):
        evaluation.landscape_scan(sched, None, pendulum_model, pendulum_gmm,
                                  10, [])
    with pytest.raises(InvalidArgumentError):
        evaluation.landscape_scan(sched, None, pendulum_model, pendulum_gmm,
                                  10, [0], horizon=1)


def test_pareto_sweep_composition_and_cost_axis(pendulum_model, pendulum_gmm):
    policy = make_policy(2, (8,), seed=0)
    net = make_estimator(2, (8,), seed=1)
    rows = evaluation.pareto_sweep(
        evaluation.SchedulePolicy.learned(policy), net, pendulum_model,
        pendulum_gmm, 0.99, 5.0, 25, range(4), periods=(1, 2),
        thresholds=(0.5, 2.0))
    assert [r.policy_id for r in rows] == ["learned", "periodic", "periodic",
                                           "event", "event"]
    assert [r.param for r in rows][1:] == [1, 2, 0.5, 2.0]
    # the cost axis is the estimation error term, not the lambda-inclusive cost
    ref = evaluation.evaluate(evaluation.SchedulePolicy.periodic(2), net,
                              pendulum_model, pendulum_gmm, 25, 0.99, 5.0,
                              None, range(4))
    assert rows[2].mean_cost == pytest.approx(ref.mean_err_cost, rel=1e-12)
    assert rows[2].mean_tx == pytest.approx(ref.mean_tx, rel=1e-12)


def test_csv_writers(tmp_path, pendulum_model, pendulum_gmm):
    rep = evaluation.evaluate(evaluation.SchedulePolicy.periodic(2), None,
                              pendulum_model, pendulum_gmm, 10, 0.99, 1.0,
                              None, range(3))
    eval_path = tmp_path / "eval.csv"
    evaluation.write_eval_csv(rep, eval_path)
    with open(eval_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert float(rows[0]["cost"]) == rep.costs[0]

    traj_path = tmp_path / "traj.csv"
    evaluation.write_trajectory_csv(rep.first_record, traj_path)
    with open(traj_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        assert header == ["t", "x_1", "x_2", "xhat_1", "xhat_2", "e_norm",
                          "delta", "aoi"]
        assert len(list(reader)) == 10

    pts = evaluation.landscape_scan(evaluation.SchedulePolicy.periodic(2),
                                    None, pendulum_model, pendulum_gmm, 12,
                                    [0], horizon=13)
    land_path = tmp_path / "landscape.csv"
    evaluation.write_landscape_csv(pts, land_path)
    with open(land_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert set(rows[0]) == {"e_1", "e_2", "delta", "gmm_component"}

    with pytest.raises(InvalidArgumentError):
        evaluation.write_landscape_csv([], tmp_path / "empty.csv")
