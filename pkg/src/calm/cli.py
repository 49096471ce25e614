"""Command line interface.

Subcommands:
    calm train     --config cfg.yaml [--out DIR] [--seed S] [--threads N]
    calm baseline  --config cfg.yaml [--out DIR] [--seed S] [--threads N]
    calm evaluate  --run DIR | --config cfg.yaml
                   [--policy learned|always|never|periodic:P|event:TAU]
                   [--estimator auto|learned|linear] [--horizon T] [--out DIR]
    calm landscape --run DIR | --config cfg.yaml [--points N] [--out DIR]
    calm pareto    --run DIR [--out DIR]

Exit codes: 0 success, 2 invalid arguments or config, 3 numerical failure.
--threads caps BLAS/OpenMP thread pools (set before numpy loads); training
artifacts carry no timestamps, so a rerun with the same config and seed
reproduces each file byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calm",
        description="Joint training of a transmission scheduler and a "
                    "neural remote state estimator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="output directory (default: config 'output')")
        if seed:
            sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--threads", type=int,
                        help="cap BLAS/OpenMP threads for this process")

    sp = sub.add_parser("train", help="run the alternating training loop")
    sp.add_argument("--config", required=True)
    common(sp)

    sp = sub.add_parser("baseline", help="PPO against the linear estimator only")
    sp.add_argument("--config", required=True)
    common(sp)

    sp = sub.add_parser("evaluate", help="evaluate a schedule on fresh rollouts")
    sp.add_argument("--run", help="run directory from 'calm train'")
    sp.add_argument("--config", help="config file (fresh networks)")
    sp.add_argument("--policy", default="learned",
                    help="learned | always | never | periodic:P | event:TAU")
    sp.add_argument("--estimator", default="auto",
                    choices=["auto", "learned", "linear"])
    sp.add_argument("--horizon", type=int, help="override evaluation horizon")
    common(sp)

    sp = sub.add_parser("landscape", help="dump (error, delta, component) samples")
    sp.add_argument("--run", help="run directory from 'calm train'")
    sp.add_argument("--config", help="config file (fresh networks)")
    sp.add_argument("--points", type=int, help="number of samples")
    common(sp)

    sp = sub.add_parser("pareto", help="learned vs periodic/event-triggered frontier")
    sp.add_argument("--run", required=True)
    common(sp, seed=False)
    return parser


def _apply_threads(threads):
    if threads is None:
        return
    if threads < 1:
        from .errors import InvalidArgumentError
        raise InvalidArgumentError(f"--threads must be >= 1, got {threads}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(threads)


def _checkpoint_meta(kind, rc):
    meta = {"kind": kind, "system": rc.train.system, "run_id": rc.run_id}
    if kind == "estimator":
        meta["inputs"] = "xhat_1..xhat_n, aoi"
        meta["aoi_convention"] = ("steps since the last transmission; "
                                  "0 at a transmit step and at t=0")
    elif kind in ("policy", "value"):
        meta["inputs"] = "pre-decision error e_1..e_n"
    return meta


def _prepare_run_dir(rc):
    from .config import save_resolved_config
    from .errors import InvalidArgumentError

    run_dir = Path(rc.out_dir) / rc.run_id
    if run_dir.exists():
        raise InvalidArgumentError(
            f"run directory {run_dir} already exists; refusing to overwrite")
    run_dir.mkdir(parents=True)
    save_resolved_config(rc, run_dir / "resolved_config.yaml")
    return run_dir


def _cmd_train(args) -> int:
    from . import nn
    from .config import load_run_config, with_overrides
    from .training import calm_train, write_ppo_log, write_training_log

    rc = with_overrides(load_run_config(args.config), args.seed, args.out)
    run_dir = _prepare_run_dir(rc)

    def on_iteration(outer, policy, value, est):
        nn.save_checkpoint(policy.params, run_dir / f"policy_{outer}.ckpt",
                           _checkpoint_meta("policy", rc))
        nn.save_checkpoint(value.params, run_dir / f"value_{outer}.ckpt",
                           _checkpoint_meta("value", rc))
        nn.save_checkpoint(est.params, run_dir / f"estimator_{outer}.ckpt",
                           _checkpoint_meta("estimator", rc))

    result = calm_train(rc.train, on_iteration)
    write_training_log(result.training_rows, run_dir / "training_log.csv")
    write_ppo_log(result.ppo_rows, run_dir / "ppo_log.csv")
    last = [r for r in result.training_rows if r["phase"] == "scheduler"][-1]
    print(f"trained {rc.run_id}: {run_dir}")
    print(f"final scheduler epoch: mean_return={last['mean_return']:.4f} "
          f"tx_rate={last['tx_rate']:.3f}")
    return 0


def _cmd_baseline(args) -> int:
    from . import nn
    from .config import load_run_config, with_overrides
    from .training import (pretrain_linear_baseline, write_ppo_log,
                           write_training_log)

    rc = with_overrides(load_run_config(args.config), args.seed, args.out)
    rc = _baseline_rc(rc)
    run_dir = _prepare_run_dir(rc)

    def on_iteration(outer, policy, value, est):
        nn.save_checkpoint(policy.params, run_dir / f"policy_{outer}.ckpt",
                           _checkpoint_meta("policy", rc))
        nn.save_checkpoint(value.params, run_dir / f"value_{outer}.ckpt",
                           _checkpoint_meta("value", rc))

    result = pretrain_linear_baseline(rc.train, on_iteration)
    write_training_log(result.training_rows, run_dir / "training_log.csv")
    write_ppo_log(result.ppo_rows, run_dir / "ppo_log.csv")
    last = result.training_rows[-1]
    print(f"trained baseline {rc.run_id}: {run_dir}")
    print(f"final epoch: mean_return={last['mean_return']:.4f} "
          f"tx_rate={last['tx_rate']:.3f}")
    return 0


def _baseline_rc(rc):
    from dataclasses import replace
    return replace(rc, experiment=rc.experiment + "-baseline")


def _latest_checkpoint(run_dir: Path, prefix: str):
    best, best_iter = None, -1
    for path in run_dir.glob(f"{prefix}_*.ckpt"):
        suffix = path.stem.rsplit("_", 1)[-1]
        try:
            it = int(suffix)
        except ValueError:
            continue
        if it > best_iter:
            best, best_iter = path, it
    return best


def _load_run(run_dir):
    """Returns (RunConfig, PolicyNet, ValueNet, EstimatorNet or None)."""
    from . import nn
    from .config import load_run_config
    from .errors import InvalidArgumentError
    from .estimator import EstimatorNet
    from .scheduler import PolicyNet, ValueNet

    run_dir = Path(run_dir)
    cfg = run_dir / "resolved_config.yaml"
    if not cfg.is_file():
        raise InvalidArgumentError(f"{run_dir} has no resolved_config.yaml")
    rc = load_run_config(cfg)
    policy_path = _latest_checkpoint(run_dir, "policy")
    value_path = _latest_checkpoint(run_dir, "value")
    if policy_path is None or value_path is None:
        raise InvalidArgumentError(f"{run_dir} has no policy/value checkpoints")
    policy = PolicyNet(nn.load_checkpoint(policy_path)[0])
    value = ValueNet(nn.load_checkpoint(value_path)[0])
    est_path = _latest_checkpoint(run_dir, "estimator")
    est = EstimatorNet(nn.load_checkpoint(est_path)[0]) if est_path else None
    return rc, policy, value, est


def _fresh_nets(rc):
    from .estimator import make_estimator
    from .scheduler import make_policy, make_value
    from .systems import state_dim
    from .training import init_seed

    n = state_dim(rc.train.system)
    hidden = rc.train.hidden_sizes
    policy = make_policy(n, hidden, init_seed(rc.train.seed, 0))
    value = make_value(n, hidden, init_seed(rc.train.seed, 1))
    est = make_estimator(n, hidden, init_seed(rc.train.seed, 2))
    return policy, value, est


def _load_source(args):
    """Shared --run / --config resolution for evaluate and landscape."""
    from .config import load_run_config, with_overrides
    from .errors import InvalidArgumentError

    if getattr(args, "run", None):
        rc, policy, value, est = _load_run(args.run)
        out_dir = Path(args.out) if args.out else Path(args.run)
        return rc, policy, est, out_dir
    if getattr(args, "config", None):
        rc = with_overrides(load_run_config(args.config),
                            getattr(args, "seed", None), args.out)
        policy, value, est = _fresh_nets(rc)
        out_dir = Path(args.out) if args.out else Path(".")
        return rc, policy, est, out_dir
    raise InvalidArgumentError("provide --run or --config")


def _parse_schedule(spec: str, policy_net):
    from .errors import InvalidArgumentError
    from .evaluation import SchedulePolicy

    if spec == "learned":
        return SchedulePolicy.learned(policy_net)
    if spec == "always":
        return SchedulePolicy.always()
    if spec == "never":
        return SchedulePolicy.never()
    if spec.startswith("periodic:"):
        try:
            return SchedulePolicy.periodic(int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad period in {spec!r}") from exc
    if spec.startswith("event:"):
        try:
            return SchedulePolicy.event_triggered(float(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad threshold in {spec!r}") from exc
    raise InvalidArgumentError(
        f"unknown policy {spec!r}; use learned, always, never, periodic:P or event:TAU")


def _pick_estimator(choice: str, est):
    from .errors import InvalidArgumentError

    if choice == "linear":
        return None
    if choice == "learned":
        if est is None:
            raise InvalidArgumentError(
                "no estimator checkpoint available for --estimator learned")
        return est
    return est  # auto: learned when available, else linear


def _tag(value) -> str:
    if value is None:
        return ""
    return f"{value:g}".replace(".", "p").replace("-", "m")


def _cmd_evaluate(args) -> int:
    from .evaluation import (evaluate, summary_line, write_eval_csv,
                             write_trajectory_csv)
    from .systems import make_system

    rc, policy, est, out_dir = _load_source(args)
    est = _pick_estimator(args.estimator, est)
    schedule = _parse_schedule(args.policy, policy)
    model = make_system(rc.train.system, rc.train.gmm)
    horizon = args.horizon if args.horizon else rc.eval_horizon
    report = evaluate(schedule, est, model, rc.train.gmm, horizon,
                      rc.train.gamma, rc.train.comm_lambda,
                      rc.train.error_weight, rc.eval_seeds)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{schedule.kind}{_tag(schedule.param)}_{report.estimator}"
    write_eval_csv(report, out_dir / f"eval_{stem}.csv")
    write_trajectory_csv(report.first_record, out_dir / f"trajectory_{stem}.csv")
    print(summary_line(report))
    return 0


def _cmd_landscape(args) -> int:
    from .evaluation import SchedulePolicy, landscape_scan, write_landscape_csv
    from .systems import make_system

    rc, policy, est, out_dir = _load_source(args)
    model = make_system(rc.train.system, rc.train.gmm)
    points = landscape_scan(SchedulePolicy.learned(policy), est, model,
                            rc.train.gmm,
                            args.points if args.points else rc.landscape_points,
                            rc.eval_seeds, horizon=rc.eval_horizon)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "landscape.csv"
    write_landscape_csv(points, path)
    print(f"wrote {len(points)} points to {path}")
    return 0


def _cmd_pareto(args) -> int:
    from .evaluation import SchedulePolicy, pareto_sweep, write_pareto_csv
    from .systems import make_system

    rc, policy, _, est = _load_run(args.run)
    model = make_system(rc.train.system, rc.train.gmm)
    points = pareto_sweep(SchedulePolicy.learned(policy), est, model,
                          rc.train.gmm, rc.train.gamma, rc.train.comm_lambda,
                          rc.eval_horizon, rc.eval_seeds,
                          periods=rc.periods, thresholds=rc.thresholds)
    out_dir = Path(args.out) if args.out else Path(args.run)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "pareto.csv"
    write_pareto_csv(points, path)
    for p in points:
        param = "" if p.param is None else f":{p.param:g}"
        print(f"{p.policy_id}{param} tx={p.mean_tx:.2f} "
              f"cost={p.mean_cost:.4f}+-{p.std_cost:.4f}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "baseline": _cmd_baseline,
    "evaluate": _cmd_evaluate,
    "landscape": _cmd_landscape,
    "pareto": _cmd_pareto,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from .errors import InvalidArgumentError, NumericError
    try:
        _apply_threads(args.threads)
        return _COMMANDS[args.command](args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
