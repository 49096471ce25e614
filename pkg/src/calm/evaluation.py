"""Policy evaluation, baseline schedules, landscape scans and Pareto sweeps.

Baseline schedules share the exact rollout core used during training, so a
learned policy evaluated here reproduces collect_rollout trajectories
seed for seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import systems
from .errors import InvalidArgumentError
from .estimator import EstimatorNet
from .scheduler import PolicyNet, policy_sample
from .training import TrajectoryRecord, simulate


@dataclass(frozen=True)
class SchedulePolicy:
    """A transmission rule: learned network, periodic, event-triggered
    (transmit when ||e||^2 >= threshold), always, or never."""

    kind: str
    period: int = 0
    threshold: float = 0.0
    policy: Optional[PolicyNet] = None

    @staticmethod
    def learned(policy: PolicyNet) -> "SchedulePolicy":
        return SchedulePolicy(kind="learned", policy=policy)

    @staticmethod
    def periodic(period: int) -> "SchedulePolicy":
        if period < 1:
            raise InvalidArgumentError(f"period must be >= 1, got {period}")
        return SchedulePolicy(kind="periodic", period=period)

    @staticmethod
    def event_triggered(threshold: float) -> "SchedulePolicy":
        if threshold < 0.0:
            raise InvalidArgumentError(f"threshold must be >= 0, got {threshold}")
        return SchedulePolicy(kind="event", threshold=float(threshold))

    @staticmethod
    def always() -> "SchedulePolicy":
        return SchedulePolicy(kind="always")

    @staticmethod
    def never() -> "SchedulePolicy":
        return SchedulePolicy(kind="never")

    @property
    def param(self):
        if self.kind == "periodic":
            return self.period
        if self.kind == "event":
            return self.threshold
        return None

    def decider(self):
        if self.kind == "learned":
            if self.policy is None:
                raise InvalidArgumentError("learned schedule needs a PolicyNet")
            net = self.policy

            def decide(e, t, rng):
                return policy_sample(net, e, rng)
        elif self.kind == "periodic":
            period = self.period

            def decide(e, t, rng):
                return (1 if t % period == 0 else 0), float("nan")
        elif self.kind == "event":
            threshold = self.threshold

            def decide(e, t, rng):
                return (1 if float(e @ e) >= threshold else 0), float("nan")
        elif self.kind == "always":
            def decide(e, t, rng):
                return 1, float("nan")
        elif self.kind == "never":
            def decide(e, t, rng):
                return 0, float("nan")
        else:
            raise InvalidArgumentError(f"unknown schedule kind {self.kind!r}")
        return decide


@dataclass(frozen=True)
class EvalReport:
    """Per-seed discounted costs and transmission counts for one policy."""

    policy_id: str
    param: Optional[float]
    estimator: str
    horizon: int
    gamma: float
    comm_lambda: float
    seeds: tuple
    costs: np.ndarray
    err_costs: np.ndarray
    tx_counts: np.ndarray
    first_record: TrajectoryRecord = field(repr=False, compare=False, default=None)

    @property
    def mean_cost(self) -> float:
        return float(self.costs.mean())

    @property
    def std_cost(self) -> float:
        return float(self.costs.std(ddof=1)) if len(self.costs) > 1 else 0.0

    @property
    def mean_err_cost(self) -> float:
        return float(self.err_costs.mean())

    @property
    def std_err_cost(self) -> float:
        return float(self.err_costs.std(ddof=1)) if len(self.err_costs) > 1 else 0.0

    @property
    def mean_tx(self) -> float:
        return float(self.tx_counts.mean())


def summary_line(report: EvalReport) -> str:
    name = report.policy_id
    if report.param is not None:
        name = f"{name}:{report.param:g}"
    return (f"policy={name} estimator={report.estimator} "
            f"seeds={len(report.seeds)} horizon={report.horizon} "
            f"cost={report.mean_cost:.4f}+-{report.std_cost:.4f} "
            f"err_cost={report.mean_err_cost:.4f} tx={report.mean_tx:.2f}")


def evaluate(schedule: SchedulePolicy, estimator_net: Optional[EstimatorNet],
             model: systems.SystemModel, gmm: systems.GmmSpec, horizon: int,
             gamma: float, comm_lambda: float, error_weight, seeds) -> EvalReport:
    """Run one rollout per seed and aggregate discounted costs.

    Each seed uses default_rng(seed) directly, so learned-policy rollouts
    reproduce collect_rollout on the same generator.  estimator_net=None
    evaluates against the linear baseline estimator.
    """
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise InvalidArgumentError("need at least one evaluation seed")
    if error_weight is None:
        error_weight = np.eye(model.state_dim)
    decide = schedule.decider()
    costs = np.empty(len(seeds))
    err_costs = np.empty(len(seeds))
    tx_counts = np.empty(len(seeds), dtype=np.int64)
    first = None
    for i, seed in enumerate(seeds):
        rec = simulate(decide, estimator_net, model, gmm, horizon, gamma,
                       comm_lambda, error_weight, np.random.default_rng(seed))
        costs[i] = rec.discounted_cost
        err_costs[i] = rec.discounted_err_cost
        tx_counts[i] = rec.tx_count
        if first is None:
            first = rec
    return EvalReport(
        policy_id=schedule.kind, param=schedule.param,
        estimator="linear" if estimator_net is None else "learned",
        horizon=horizon, gamma=gamma, comm_lambda=comm_lambda, seeds=seeds,
        costs=costs, err_costs=err_costs, tx_counts=tx_counts,
        first_record=first,
    )


@dataclass(frozen=True)
class LandscapePoint:
    """One observed pre-decision error with its decision and the mixture
    component that generated the underlying noise draw."""

    error: np.ndarray
    delta: int
    component: int


def landscape_scan(schedule: SchedulePolicy, estimator_net: Optional[EstimatorNet],
                   model: systems.SystemModel, gmm: systems.GmmSpec,
                   num_points: int, seeds, horizon: int = 500) -> list:
    """Collect num_points (error, delta, component) triples from rollouts.

    Steps t >= 1 of each rollout contribute one point, pairing the error
    observed at t with the component of the noise applied at t-1.  Seeds are
    recycled with fresh substreams if they run out before num_points.
    """
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise InvalidArgumentError("need at least one seed")
    if num_points < 1:
        raise InvalidArgumentError(f"num_points must be >= 1, got {num_points}")
    if horizon < 2:
        raise InvalidArgumentError("landscape scan needs horizon >= 2")
    decide = schedule.decider()
    eye = np.eye(model.state_dim)
    points: list = []
    rep = 0
    while len(points) < num_points:
        for seed in seeds:
            rng = (np.random.default_rng(seed) if rep == 0
                   else np.random.default_rng([seed, rep]))
            rec = simulate(decide, estimator_net, model, gmm, horizon, 1.0,
                           0.0, eye, rng)
            for t in range(1, horizon):
                points.append(LandscapePoint(
                    error=rec.pre_error[t].copy(),
                    delta=int(rec.delta[t]),
                    component=int(rec.component[t - 1]),
                ))
                if len(points) == num_points:
                    return points
        rep += 1
    return points


@dataclass(frozen=True)
class ParetoPoint:
    """Mean transmissions vs mean discounted estimation cost for one policy."""

    policy_id: str
    param: Optional[float]
    mean_tx: float
    mean_cost: float
    std_cost: float


def pareto_sweep(learned: SchedulePolicy, estimator_net: Optional[EstimatorNet],
                 model: systems.SystemModel, gmm: systems.GmmSpec, gamma: float,
                 comm_lambda: float, horizon: int, seeds, periods=(1, 2, 3),
                 thresholds=()) -> list:
    """Evaluate the learned policy against periodic and event-triggered
    baselines, all with the same (frozen) estimator.

    The cost axis is the discounted estimation error only, so points trade
    transmissions against accuracy.
    """
    rows = []
    for schedule in [learned] + [SchedulePolicy.periodic(p) for p in periods] \
            + [SchedulePolicy.event_triggered(tau) for tau in thresholds]:
        report = evaluate(schedule, estimator_net, model, gmm, horizon, gamma,
                          comm_lambda, None, seeds)
        rows.append(ParetoPoint(
            policy_id=schedule.kind, param=schedule.param,
            mean_tx=report.mean_tx, mean_cost=report.mean_err_cost,
            std_cost=report.std_err_cost,
        ))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_eval_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "cost", "err_cost", "tx_count"])
        for seed, cost, err, tx in zip(report.seeds, report.costs,
                                       report.err_costs, report.tx_counts):
            writer.writerow([seed, repr(float(cost)), repr(float(err)), int(tx)])


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    n = record.x.shape[1]
    header = (["t"] + [f"x_{i + 1}" for i in range(n)]
              + [f"xhat_{i + 1}" for i in range(n)] + ["e_norm", "delta", "aoi"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(record.x.shape[0]):
            e_norm = float(np.linalg.norm(record.error[t]))
            writer.writerow(
                [int(record.t[t])]
                + [repr(float(v)) for v in record.x[t]]
                + [repr(float(v)) for v in record.xhat[t]]
                + [repr(e_norm), int(record.delta[t]), int(record.aoi[t])])


def write_landscape_csv(points, path) -> None:
    if not points:
        raise InvalidArgumentError("no landscape points to write")
    n = points[0].error.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"e_{i + 1}" for i in range(n)] + ["delta", "gmm_component"])
        for p in points:
            writer.writerow([repr(float(v)) for v in p.error]
                            + [p.delta, p.component])


def write_pareto_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy_id", "param", "mean_tx", "mean_cost", "std_cost"])
        for p in points:
            writer.writerow([
                p.policy_id, _fmt(p.param), repr(float(p.mean_tx)),
                repr(float(p.mean_cost)), repr(float(p.std_cost)),
            ])
