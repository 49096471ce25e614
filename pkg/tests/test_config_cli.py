"""YAML config parsing and end-to-end CLI behavior (in-process)."""

import textwrap

import numpy as np
import pytest

from calm import config as cfgmod
from calm.cli import main
from calm.errors import ConfigError
from calm.presets import benchmark_noise

SMOKE_YAML = textwrap.dedent("""\
    experiment: smoke
    system: pendulum
    seed: 3
    noise: pendulum2
    cost:
      comm_lambda: 10.0
    training:
      horizon: 8
      outer_iters: 1
      ppo_epochs: 2
      rollouts_per_epoch: 2
      estimator_epochs: 2
      estimator_rollouts: 2
      baseline_ppo_epochs: 2
      hidden_sizes: [8]
    evaluation:
      horizon: 12
      seeds: [0, 1]
      periods: [1, 2]
      thresholds: [1.0, 5.0]
      landscape_points: 40
""")


@pytest.fixture
def smoke_config(tmp_path):
    path = tmp_path / "smoke.yaml"
    path.write_text(SMOKE_YAML)
    return path


class TestConfigParsing:
    def test_load_and_defaults(self, smoke_config):
        rc = cfgmod.load_run_config(smoke_config)
        assert rc.experiment == "smoke"
        assert rc.run_id == "smoke-s3"
        assert rc.train.system == "pendulum"
        assert rc.train.comm_lambda == 10.0
        assert rc.train.gamma == 0.99            # default
        assert rc.train.ppo_update_epochs == 4   # default
        assert rc.train.hidden_sizes == (8,)
        assert rc.eval_horizon == 12
        assert rc.periods == (1, 2)

    def test_noise_preset_equals_explicit_mapping(self, tmp_path):
        preset = benchmark_noise("pendulum2")
        explicit = textwrap.dedent("""\
            experiment: x
            system: pendulum
            noise:
              means: [[-3.0, -3.0], [3.0, 3.0]]
              covariances:
                - [[0.5, 0.0], [0.0, 0.5]]
                - [[0.5, 0.0], [0.0, 0.5]]
              weights: [0.3, 0.7]
            cost: {comm_lambda: 1.0}
        """)
        path = tmp_path / "x.yaml"
        path.write_text(explicit)
        rc = cfgmod.load_run_config(path)
        np.testing.assert_array_equal(rc.train.gmm.means, preset.means)
        np.testing.assert_array_equal(rc.train.gmm.covariances,
                                      preset.covariances)
        np.testing.assert_array_equal(rc.train.gmm.weights, preset.weights)

    def test_seed_range_shorthand(self, tmp_path):
        path = tmp_path / "y.yaml"
        path.write_text(textwrap.dedent("""\
            experiment: y
            system: pendulum
            noise: pendulum2
            cost: {comm_lambda: 1.0}
            evaluation:
              seeds: {start: 5, count: 3}
        """))
        rc = cfgmod.load_run_config(path)
        assert rc.eval_seeds == (5, 6, 7)

    @pytest.mark.parametrize("snippet,field", [
        ("bogus: 1", "bogus"),
        ("training:\n  bogus: 1", "training.bogus"),
        ("cost:\n  comm_lambda: 1.0\n  bogus: 1", "cost.bogus"),
        ("evaluation:\n  bogus: 1", "evaluation.bogus"),
    ])
    def test_unknown_keys_name_their_path(self, tmp_path, snippet, field):
        base = ("experiment: z\nsystem: pendulum\nnoise: pendulum2\n")
        if not snippet.startswith("cost"):
            base += "cost: {comm_lambda: 1.0}\n"
        path = tmp_path / "z.yaml"
        path.write_text(base + snippet + "\n")
        with pytest.raises(ConfigError) as err:
            cfgmod.load_run_config(path)
        assert field in str(err.value)

    def test_missing_comm_lambda(self, tmp_path):
        path = tmp_path / "m.yaml"
        path.write_text("experiment: m\nsystem: pendulum\n"
                        "noise: pendulum2\ncost: {}\n")
        with pytest.raises(ConfigError) as err:
            cfgmod.load_run_config(path)
        assert "comm_lambda" in str(err.value)

    def test_unknown_noise_preset(self, tmp_path):
        path = tmp_path / "n.yaml"
        path.write_text("experiment: n\nsystem: pendulum\n"
                        "noise: gauss99\ncost: {comm_lambda: 1}\n")
        with pytest.raises(ConfigError):
            cfgmod.load_run_config(path)

    def test_wrong_type_reports_field(self, tmp_path):
        path = tmp_path / "t.yaml"
        path.write_text("experiment: t\nsystem: pendulum\nnoise: pendulum2\n"
                        "cost: {comm_lambda: 1}\n"
                        "training: {horizon: soon}\n")
        with pytest.raises(ConfigError) as err:
            cfgmod.load_run_config(path)
        assert "training.horizon" in str(err.value)

    def test_resolved_round_trip(self, smoke_config, tmp_path):
        rc = cfgmod.load_run_config(smoke_config)
        out = tmp_path / "resolved.yaml"
        cfgmod.save_resolved_config(rc, out)
        rc2 = cfgmod.load_run_config(out)
        assert cfgmod.resolved_dict(rc) == cfgmod.resolved_dict(rc2)

    def test_with_overrides(self, smoke_config):
        rc = cfgmod.load_run_config(smoke_config)
        rc2 = cfgmod.with_overrides(rc, seed=9, out_dir="elsewhere")
        assert rc2.train.seed == 9
        assert rc2.out_dir == "elsewhere"
        assert rc2.run_id == "smoke-s9"
        assert rc.train.seed == 3  # original untouched


def _artifacts(run_dir):
    return sorted(p.name for p in run_dir.iterdir())


class TestCli:
    def test_train_writes_run_dir(self, smoke_config, tmp_path, capsys):
        out = tmp_path / "runs"
        assert main(["train", "--config", str(smoke_config),
                     "--out", str(out)]) == 0
        run_dir = out / "smoke-s3"
        names = _artifacts(run_dir)
        assert names == ["estimator_1.ckpt", "policy_1.ckpt", "ppo_log.csv",
                         "resolved_config.yaml", "training_log.csv",
                         "value_1.ckpt"]
        assert "trained smoke-s3" in capsys.readouterr().out

    def test_train_refuses_existing_run_dir(self, smoke_config, tmp_path,
                                            capsys):
        out = tmp_path / "runs"
        assert main(["train", "--config", str(smoke_config),
                     "--out", str(out)]) == 0
        assert main(["train", "--config", str(smoke_config),
                     "--out", str(out)]) == 2
        assert "refusing to overwrite" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, smoke_config, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["train", "--config", str(smoke_config),
                         "--out", str(out)]) == 0
        for name in ("policy_1.ckpt", "value_1.ckpt", "estimator_1.ckpt",
                     "training_log.csv", "ppo_log.csv"):
            assert ((out_a / "smoke-s3" / name).read_bytes()
                    == (out_b / "smoke-s3" / name).read_bytes()), name

    def test_seed_override_changes_run_id_and_weights(self, smoke_config,
                                                      tmp_path):
        out = tmp_path / "runs"
        assert main(["train", "--config", str(smoke_config), "--out", str(out),
                     "--seed", "4"]) == 0
        assert (out / "smoke-s4").is_dir()

    def test_baseline_has_no_estimator_checkpoint(self, smoke_config,
                                                  tmp_path):
        out = tmp_path / "runs"
        assert main(["baseline", "--config", str(smoke_config),
                     "--out", str(out)]) == 0
        names = _artifacts(out / "smoke-baseline-s3")
        assert "estimator_1.ckpt" not in names
        assert "policy_1.ckpt" in names

    def test_evaluate_learned_and_baseline_policies(self, smoke_config,
                                                    tmp_path, capsys):
        out = tmp_path / "runs"
        main(["train", "--config", str(smoke_config), "--out", str(out)])
        run = str(out / "smoke-s3")
        assert main(["evaluate", "--run", run]) == 0
        assert (out / "smoke-s3" / "eval_learned_learned.csv").is_file()
        assert (out / "smoke-s3" / "trajectory_learned_learned.csv").is_file()
        assert main(["evaluate", "--run", run, "--policy", "periodic:2",
                     "--estimator", "linear"]) == 0
        assert (out / "smoke-s3" / "eval_periodic2_linear.csv").is_file()
        assert main(["evaluate", "--run", run, "--policy", "event:1.5"]) == 0
        assert (out / "smoke-s3" / "eval_event1p5_learned.csv").is_file()
        assert "policy=event:1.5" in capsys.readouterr().out

    def test_evaluate_rerun_is_byte_identical(self, smoke_config, tmp_path):
        out = tmp_path / "runs"
        main(["train", "--config", str(smoke_config), "--out", str(out)])
        run = str(out / "smoke-s3")
        target = out / "smoke-s3" / "eval_learned_learned.csv"
        assert main(["evaluate", "--run", run]) == 0
        first = target.read_bytes()
        assert main(["evaluate", "--run", run]) == 0
        assert target.read_bytes() == first

    def test_evaluate_from_config_uses_fresh_nets(self, smoke_config,
                                                  tmp_path, capsys):
        assert main(["evaluate", "--config", str(smoke_config),
                     "--out", str(tmp_path / "ev")]) == 0
        assert (tmp_path / "ev" / "eval_learned_learned.csv").is_file()

    def test_evaluate_errors(self, smoke_config, tmp_path, capsys):
        assert main(["evaluate", "--run", str(tmp_path / "nope")]) == 2
        out = tmp_path / "runs"
        main(["train", "--config", str(smoke_config), "--out", str(out)])
        run = str(out / "smoke-s3")
        assert main(["evaluate", "--run", run, "--policy", "sometimes"]) == 2
        assert main(["evaluate", "--run", run, "--policy", "periodic:x"]) == 2
        capsys.readouterr()

    def test_baseline_run_rejects_learned_estimator(self, smoke_config,
                                                    tmp_path, capsys):
        out = tmp_path / "runs"
        main(["baseline", "--config", str(smoke_config), "--out", str(out)])
        run = str(out / "smoke-baseline-s3")
        assert main(["evaluate", "--run", run,
                     "--estimator", "learned"]) == 2
        assert main(["evaluate", "--run", run]) == 0  # auto falls back
        assert "estimator=linear" in capsys.readouterr().out

    def test_landscape_and_pareto(self, smoke_config, tmp_path, capsys):
        import csv

        out = tmp_path / "runs"
        main(["train", "--config", str(smoke_config), "--out", str(out)])
        run = str(out / "smoke-s3")
        assert main(["landscape", "--run", run, "--points", "30"]) == 0
        with open(out / "smoke-s3" / "landscape.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 30
        assert main(["pareto", "--run", run]) == 0
        with open(out / "smoke-s3" / "pareto.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        # learned + 2 periods + 2 thresholds from the config
        assert [r["policy_id"] for r in rows] == ["learned", "periodic",
                                                  "periodic", "event", "event"]
        capsys.readouterr()

    def test_threads_validation(self, smoke_config, capsys):
        assert main(["evaluate", "--config", str(smoke_config),
                     "--threads", "0"]) == 2
        capsys.readouterr()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("experiment: bad\nsystem: pendulum\n"
                        "noise: pendulum2\ncost: {}\n")
        assert main(["train", "--config", str(path)]) == 2
        assert "comm_lambda" in capsys.readouterr().err
