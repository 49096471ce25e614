"""Training and run configuration, including the YAML file format.

A run config file is a mapping with these sections (all scalars shown with
their defaults; `noise` and `cost.comm_lambda` are required):

    experiment: pendulum2        # name, used in the run id
    system: pendulum             # pendulum | tracking | vdp | boeing747
    seed: 1                      # root seed, non-negative int
    noise: pendulum2             # preset name, or {means, covariances, weights}
    cost:
      comm_lambda: 45.0          # transmission price, >= 0
      gamma: 0.99                # discount, in (0, 1)
      error_weight: identity     # or an n x n PSD matrix (list of rows)
    training:
      horizon: 80
      outer_iters: 10
      ppo_epochs: 80
      ppo_update_epochs: 4
      rollouts_per_epoch: 32
      estimator_epochs: 150
      estimator_rollouts: 1
      baseline_ppo_epochs: 1000
      learning_rate: 0.001
      clip_eps: 0.2
      gae_lambda: 0.9
      entropy_coef: 0.01
      weight_decay: 0.0001
      hidden_sizes: [64, 64]
      normalize_advantages: true
      estimator_loss_recursion: forward   # or as_printed
    evaluation:
      horizon: 500
      seeds: [0, 1, ..., 19]     # or {start: 0, count: 20}
      periods: [1, 2, 3]
      thresholds: [0.1, ..., 400.0]
      landscape_points: 2000
    output: runs

Unknown keys anywhere are rejected with the offending field path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import presets, systems
from .errors import ConfigError, InvalidArgumentError

DEFAULT_THRESHOLDS = (0.1, 0.25, 0.63, 1.6, 4.0, 10.0, 25.0, 63.0, 160.0, 400.0)


@dataclass(frozen=True)
class TrainConfig:
    """Everything calm_train needs; validated on construction."""

    system: str
    gmm: systems.GmmSpec
    comm_lambda: float
    seed: int = 0
    gamma: float = 0.99
    error_weight: Optional[np.ndarray] = None
    horizon: int = 80
    outer_iters: int = 10
    ppo_epochs: int = 80
    ppo_update_epochs: int = 4
    rollouts_per_epoch: int = 32
    estimator_epochs: int = 150
    estimator_rollouts: int = 1
    baseline_ppo_epochs: int = 1000
    learning_rate: float = 1e-3
    clip_eps: float = 0.2
    gae_lambda: float = 0.9
    entropy_coef: float = 0.01
    weight_decay: float = 1e-4
    hidden_sizes: tuple = (64, 64)
    normalize_advantages: bool = True
    estimator_loss_recursion: str = "forward"

    def __post_init__(self):
        if self.system not in systems.SYSTEM_NAMES:
            raise InvalidArgumentError(
                f"system must be one of {systems.SYSTEM_NAMES}, got {self.system!r}"
            )
        if not isinstance(self.gmm, systems.GmmSpec):
            raise InvalidArgumentError("gmm must be a GmmSpec")
        n = systems.state_dim(self.system)
        if self.gmm.dim != n:
            raise InvalidArgumentError(
                f"noise dimension {self.gmm.dim} does not match {self.system} ({n})"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidArgumentError(f"seed must be a non-negative int, got {self.seed!r}")
        if self.comm_lambda < 0.0:
            raise InvalidArgumentError(f"comm_lambda must be >= 0, got {self.comm_lambda}")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidArgumentError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.error_weight is not None:
            w = np.ascontiguousarray(self.error_weight, dtype=np.float64)
            if w.shape != (n, n):
                raise InvalidArgumentError(
                    f"error_weight must be ({n}, {n}), got {w.shape}"
                )
            if not np.allclose(w, w.T, atol=1e-12, rtol=0.0):
                raise InvalidArgumentError("error_weight must be symmetric")
            if np.linalg.eigvalsh(w).min() < -1e-10:
                raise InvalidArgumentError("error_weight must be positive semidefinite")
            object.__setattr__(self, "error_weight", w)
        for name in ("horizon", "outer_iters", "ppo_epochs", "ppo_update_epochs",
                     "rollouts_per_epoch", "estimator_epochs", "estimator_rollouts",
                     "baseline_ppo_epochs"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive int, got {v!r}")
        if self.learning_rate <= 0.0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0.0 < self.clip_eps < 1.0):
            raise InvalidArgumentError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise InvalidArgumentError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.entropy_coef < 0.0:
            raise InvalidArgumentError(f"entropy_coef must be >= 0, got {self.entropy_coef}")
        if self.weight_decay < 0.0:
            raise InvalidArgumentError(f"weight_decay must be >= 0, got {self.weight_decay}")
        sizes = tuple(int(s) for s in self.hidden_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise InvalidArgumentError(f"hidden_sizes must be positive ints, got {sizes}")
        object.__setattr__(self, "hidden_sizes", sizes)
        if self.estimator_loss_recursion not in ("forward", "as_printed"):
            raise InvalidArgumentError(
                "estimator_loss_recursion must be 'forward' or 'as_printed', "
                f"got {self.estimator_loss_recursion!r}"
            )

    def resolved_error_weight(self, n: int) -> np.ndarray:
        if self.error_weight is None:
            return np.eye(n)
        return self.error_weight


@dataclass(frozen=True)
class RunConfig:
    """A TrainConfig plus experiment identity, evaluation and output settings."""

    experiment: str
    train: TrainConfig
    eval_horizon: int = 500
    eval_seeds: tuple = tuple(range(20))
    periods: tuple = (1, 2, 3)
    thresholds: tuple = DEFAULT_THRESHOLDS
    landscape_points: int = 2000
    out_dir: str = "runs"

    def __post_init__(self):
        if not self.experiment or not all(
                c.isalnum() or c in "-_" for c in self.experiment):
            raise InvalidArgumentError(
                f"experiment must be a [A-Za-z0-9_-]+ name, got {self.experiment!r}"
            )
        if not isinstance(self.eval_horizon, int) or self.eval_horizon < 1:
            raise InvalidArgumentError(
                f"evaluation horizon must be a positive int, got {self.eval_horizon!r}"
            )
        seeds = tuple(int(s) for s in self.eval_seeds)
        if not seeds or any(s < 0 for s in seeds):
            raise InvalidArgumentError("evaluation seeds must be non-negative ints")
        object.__setattr__(self, "eval_seeds", seeds)
        periods = tuple(int(p) for p in self.periods)
        if any(p < 1 for p in periods):
            raise InvalidArgumentError("periods must be positive ints")
        object.__setattr__(self, "periods", periods)
        thresholds = tuple(float(t) for t in self.thresholds)
        if any(t < 0.0 for t in thresholds):
            raise InvalidArgumentError("thresholds must be >= 0")
        object.__setattr__(self, "thresholds", thresholds)
        if not isinstance(self.landscape_points, int) or self.landscape_points < 1:
            raise InvalidArgumentError("landscape_points must be a positive int")

    @property
    def run_id(self) -> str:
        return f"{self.experiment}-s{self.train.seed}"


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node, allowed, path):
    for key in node:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown key")


def _get_int(node, key, path, default):
    v = node.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an int, got {v!r}")
    return v


def _get_float(node, key, path, default):
    v = node.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _get_bool(node, key, path, default):
    v = node.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", f"expected a boolean, got {v!r}")
    return v


def _parse_noise(node):
    if isinstance(node, str):
        try:
            return presets.benchmark_noise(node)
        except InvalidArgumentError as exc:
            raise ConfigError("noise", str(exc)) from exc
    node = _require_mapping(node, "noise")
    _check_keys(node, {"means", "covariances", "weights"}, "noise")
    for key in ("means", "covariances", "weights"):
        if key not in node:
            raise ConfigError(f"noise.{key}", "missing required key")
    try:
        return systems.GmmSpec(
            means=np.asarray(node["means"], dtype=np.float64),
            covariances=np.asarray(node["covariances"], dtype=np.float64),
            weights=np.asarray(node["weights"], dtype=np.float64),
        )
    except (InvalidArgumentError, ValueError) as exc:
        raise ConfigError("noise", str(exc)) from exc


def _parse_seeds(node, path):
    if isinstance(node, dict):
        _check_keys(node, {"start", "count"}, path)
        start = _get_int(node, "start", path, 0)
        count = _get_int(node, "count", path, 20)
        if count < 1:
            raise ConfigError(f"{path}.count", "must be >= 1")
        return tuple(range(start, start + count))
    if isinstance(node, list):
        out = []
        for i, v in enumerate(node):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}[{i}]", f"expected an int, got {v!r}")
            out.append(v)
        return tuple(out)
    raise ConfigError(path, f"expected a list or {{start, count}}, got {node!r}")


def load_run_config(path) -> RunConfig:
    """Parse and validate a YAML run config; raises ConfigError on any problem."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from exc
    raw = _require_mapping(raw, "<root>")
    _check_keys(raw, {"experiment", "system", "seed", "noise", "cost",
                      "training", "evaluation", "output"}, "")
    for key in ("experiment", "system", "noise", "cost"):
        if key not in raw:
            raise ConfigError(key, "missing required key")
    experiment = raw["experiment"]
    if not isinstance(experiment, str):
        raise ConfigError("experiment", f"expected a string, got {experiment!r}")
    system = raw["system"]
    if not isinstance(system, str):
        raise ConfigError("system", f"expected a string, got {system!r}")
    seed = _get_int(raw, "seed", "<root>", 0)

    gmm = _parse_noise(raw["noise"])

    cost = _require_mapping(raw["cost"], "cost")
    _check_keys(cost, {"comm_lambda", "gamma", "error_weight"}, "cost")
    if "comm_lambda" not in cost:
        raise ConfigError("cost.comm_lambda", "missing required key")
    comm_lambda = _get_float(cost, "comm_lambda", "cost", None)
    gamma = _get_float(cost, "gamma", "cost", 0.99)
    ew_node = cost.get("error_weight", "identity")
    if isinstance(ew_node, str):
        if ew_node != "identity":
            raise ConfigError("cost.error_weight",
                              f"expected 'identity' or a matrix, got {ew_node!r}")
        error_weight = None
    else:
        try:
            error_weight = np.asarray(ew_node, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ConfigError("cost.error_weight", str(exc)) from exc

    tr = _require_mapping(raw.get("training", {}), "training")
    _check_keys(tr, {"horizon", "outer_iters", "ppo_epochs", "ppo_update_epochs",
                     "rollouts_per_epoch", "estimator_epochs", "estimator_rollouts",
                     "baseline_ppo_epochs", "learning_rate", "clip_eps",
                     "gae_lambda", "entropy_coef", "weight_decay", "hidden_sizes",
                     "normalize_advantages", "estimator_loss_recursion"}, "training")
    hidden = tr.get("hidden_sizes", [64, 64])
    if not isinstance(hidden, list):
        raise ConfigError("training.hidden_sizes", f"expected a list, got {hidden!r}")
    recursion = tr.get("estimator_loss_recursion", "forward")
    if not isinstance(recursion, str):
        raise ConfigError("training.estimator_loss_recursion",
                          f"expected a string, got {recursion!r}")
    try:
        train = TrainConfig(
            system=system,
            gmm=gmm,
            comm_lambda=comm_lambda,
            seed=seed,
            gamma=gamma,
            error_weight=error_weight,
            horizon=_get_int(tr, "horizon", "training", 80),
            outer_iters=_get_int(tr, "outer_iters", "training", 10),
            ppo_epochs=_get_int(tr, "ppo_epochs", "training", 80),
            ppo_update_epochs=_get_int(tr, "ppo_update_epochs", "training", 4),
            rollouts_per_epoch=_get_int(tr, "rollouts_per_epoch", "training", 32),
            estimator_epochs=_get_int(tr, "estimator_epochs", "training", 150),
            estimator_rollouts=_get_int(tr, "estimator_rollouts", "training", 1),
            baseline_ppo_epochs=_get_int(tr, "baseline_ppo_epochs", "training", 1000),
            learning_rate=_get_float(tr, "learning_rate", "training", 1e-3),
            clip_eps=_get_float(tr, "clip_eps", "training", 0.2),
            gae_lambda=_get_float(tr, "gae_lambda", "training", 0.9),
            entropy_coef=_get_float(tr, "entropy_coef", "training", 0.01),
            weight_decay=_get_float(tr, "weight_decay", "training", 1e-4),
            hidden_sizes=tuple(hidden),
            normalize_advantages=_get_bool(tr, "normalize_advantages", "training", True),
            estimator_loss_recursion=recursion,
        )
    except InvalidArgumentError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("training", str(exc)) from exc

    ev = _require_mapping(raw.get("evaluation", {}), "evaluation")
    _check_keys(ev, {"horizon", "seeds", "periods", "thresholds",
                     "landscape_points"}, "evaluation")
    eval_seeds = _parse_seeds(ev.get("seeds", {"start": 0, "count": 20}),
                              "evaluation.seeds")
    periods = ev.get("periods", [1, 2, 3])
    if not isinstance(periods, list):
        raise ConfigError("evaluation.periods", f"expected a list, got {periods!r}")
    thresholds = ev.get("thresholds", list(DEFAULT_THRESHOLDS))
    if not isinstance(thresholds, list):
        raise ConfigError("evaluation.thresholds",
                          f"expected a list, got {thresholds!r}")
    out_dir = raw.get("output", "runs")
    if not isinstance(out_dir, str):
        raise ConfigError("output", f"expected a string, got {out_dir!r}")
    try:
        return RunConfig(
            experiment=experiment,
            train=train,
            eval_horizon=_get_int(ev, "horizon", "evaluation", 500),
            eval_seeds=eval_seeds,
            periods=tuple(periods),
            thresholds=tuple(thresholds),
            landscape_points=_get_int(ev, "landscape_points", "evaluation", 2000),
            out_dir=out_dir,
        )
    except InvalidArgumentError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("evaluation", str(exc)) from exc


def resolved_dict(rc: RunConfig) -> dict:
    """The fully explicit form of a run config (every default materialized)."""
    t = rc.train
    if t.error_weight is None:
        error_weight = "identity"
    else:
        error_weight = [[float(v) for v in row] for row in t.error_weight]
    return {
        "experiment": rc.experiment,
        "system": t.system,
        "seed": t.seed,
        "noise": {
            "means": [[float(v) for v in row] for row in t.gmm.means],
            "covariances": [[[float(v) for v in row] for row in cov]
                            for cov in t.gmm.covariances],
            "weights": [float(w) for w in t.gmm.weights],
        },
        "cost": {
            "comm_lambda": float(t.comm_lambda),
            "gamma": float(t.gamma),
            "error_weight": error_weight,
        },
        "training": {
            "horizon": t.horizon,
            "outer_iters": t.outer_iters,
            "ppo_epochs": t.ppo_epochs,
            "ppo_update_epochs": t.ppo_update_epochs,
            "rollouts_per_epoch": t.rollouts_per_epoch,
            "estimator_epochs": t.estimator_epochs,
            "estimator_rollouts": t.estimator_rollouts,
            "baseline_ppo_epochs": t.baseline_ppo_epochs,
            "learning_rate": float(t.learning_rate),
            "clip_eps": float(t.clip_eps),
            "gae_lambda": float(t.gae_lambda),
            "entropy_coef": float(t.entropy_coef),
            "weight_decay": float(t.weight_decay),
            "hidden_sizes": list(t.hidden_sizes),
            "normalize_advantages": t.normalize_advantages,
            "estimator_loss_recursion": t.estimator_loss_recursion,
        },
        "evaluation": {
            "horizon": rc.eval_horizon,
            "seeds": list(rc.eval_seeds),
            "periods": list(rc.periods),
            "thresholds": [float(v) for v in rc.thresholds],
            "landscape_points": rc.landscape_points,
        },
        "output": rc.out_dir,
    }


def save_resolved_config(rc: RunConfig, path) -> None:
    text = yaml.safe_dump(resolved_dict(rc), sort_keys=True,
                          default_flow_style=False)
    Path(path).write_text(text)


def with_overrides(rc: RunConfig, seed: Optional[int] = None,
                   out_dir: Optional[str] = None) -> RunConfig:
    """Apply CLI-level overrides (--seed, --out)."""
    train = rc.train if seed is None else replace(rc.train, seed=seed)
    return replace(rc, train=train,
                   out_dir=rc.out_dir if out_dir is None else out_dir)
