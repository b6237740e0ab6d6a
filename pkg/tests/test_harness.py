import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from dsact.agent import build_agent, load_checkpoint, save_checkpoint
from dsact.config import ConfigError, RunConfig, config_from_dict, load_config
from dsact.environments import PendulumEnv, make_env
from dsact.harness import (
    evaluate,
    evaluate_policy,
    make_streams,
    measure_bias,
    rollout_return,
    run_ablation,
    train,
)
from dsact.cli import main as cli_main
from dsact.numerics import init_mlp

from conftest import params_equal


def tiny_cfg(tmp_path, **overrides) -> RunConfig:
    base = dict(
        env="bandit-chain",
        env_overrides={"noise_std": 0.2},
        hidden_actor=(8, 8),
        hidden_critic=(8, 8),
        batch_size=16,
        warm_size=40,
        samples_per_iteration=20,
        total_iterations=6,
        eval_interval=2,
        eval_episodes=2,
        lr_critic=1e-3,
        lr_actor=1e-3,
        alpha_init=0.2,
        seed=7,
        out_dir=str(tmp_path / "run"),
    )
    base.update(overrides)
    return RunConfig(**base).validate()


class TestConfig:
    def test_defaults_match_shared_table(self):
        cfg = RunConfig()
        assert cfg.gamma == 0.99
        assert cfg.tau == 0.005
        assert cfg.lr_critic == 1e-4 and cfg.lr_actor == 1e-4 and cfg.lr_alpha == 3e-4
        assert cfg.policy_delay == 2
        assert cfg.samples_per_iteration == 20
        assert cfg.warm_size == 10_000
        assert cfg.buffer_capacity == 1_000_000
        assert cfg.xi == 3.0
        assert cfg.eps == 0.1 and cfg.eps_omega == 0.1
        assert cfg.reward_scale == 1.0
        assert cfg.hidden_actor == (256, 256, 256)
        assert cfg.batch_size == 256
        assert cfg.seed == 12345

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"gamma": 0.9, "warp_speed": 11})

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"gamma": 1.5})
        with pytest.raises(ConfigError):
            config_from_dict({"algorithm": "td3"})
        with pytest.raises(ConfigError):
            config_from_dict({"tau": 0.0})
        with pytest.raises(ConfigError):
            config_from_dict({"algorithm": "dsacv1", "twin_distributions": True})

    def test_load_config_roundtrip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"env": "pendulum", "batch_size": 32}))
        cfg = load_config(p)
        assert cfg.env == "pendulum" and cfg.batch_size == 32

    def test_load_config_bad_json(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_target_entropy_default_is_minus_act_dim(self, tmp_path):
        cfg = tiny_cfg(tmp_path)
        env = make_env(cfg.env, cfg.env_overrides)
        agent = build_agent(cfg, env.spec, make_streams(cfg.seed))
        assert agent.temperature.target_entropy == -1.0


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        cfg = tiny_cfg(tmp_path)
        env = make_env(cfg.env, cfg.env_overrides)
        agent = build_agent(cfg, env.spec, make_streams(cfg.seed))
        agent.critics.b = [1.25, 2.5]
        agent.critics.omega = [0.125, 0.0625]
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, agent, cfg, env.spec)
        loaded, doc = load_checkpoint(path)
        assert params_equal(loaded.phi, agent.phi)
        assert params_equal(loaded.phi_bar, agent.phi_bar)
        for i in range(2):
            assert params_equal(loaded.critics.theta[i], agent.critics.theta[i])
            assert params_equal(loaded.critics.theta_bar[i], agent.critics.theta_bar[i])
        assert loaded.critics.b == agent.critics.b
        assert loaded.critics.omega == agent.critics.omega
        assert loaded.temperature.alpha == agent.temperature.alpha
        assert doc["format_version"] == 1
        # a second save of the loaded state is byte-identical
        path2 = tmp_path / "ckpt2.json"
        save_checkpoint(path2, loaded, cfg, env.spec)
        assert path.read_text() == path2.read_text()

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "ckpt.json"
        path.write_text(json.dumps({"format_version": 99}))
        with pytest.raises(ConfigError):
            load_checkpoint(path)


class TestTrain:
    def test_zero_iterations_outputs_config_and_checkpoint(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=0)
        summary = train(cfg)
        out = Path(cfg.out_dir)
        assert (out / "checkpoint_0.json").exists()
        assert (out / "summary.json").exists()
        assert summary["env_steps"] == 0
        echo = json.loads((out / "summary.json").read_text())["config"]
        assert echo["seed"] == cfg.seed

    def test_no_updates_before_warm(self, tmp_path):
        cfg = tiny_cfg(tmp_path, warm_size=1000, total_iterations=3)
        summary = train(cfg)
        assert summary["critic_updates"] == 0
        initial, _ = load_checkpoint(Path(cfg.out_dir) / "checkpoint_0.json")
        final, _ = load_checkpoint(Path(cfg.out_dir) / "checkpoint_3.json")
        assert params_equal(initial.phi, final.phi)
        for i in range(2):
            assert params_equal(initial.critics.theta[i], final.critics.theta[i])

    def test_metrics_deterministic_across_runs(self, tmp_path):
        cfg1 = tiny_cfg(tmp_path / "a")
        cfg2 = tiny_cfg(tmp_path / "b")
        train(cfg1)
        train(cfg2)
        m1 = (Path(cfg1.out_dir) / "metrics.csv").read_bytes()
        m2 = (Path(cfg2.out_dir) / "metrics.csv").read_bytes()
        assert m1 == m2

    def test_env_step_accounting_and_cadence(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=8)
        summary = train(cfg)
        assert summary["env_steps"] == 8 * cfg.samples_per_iteration
        # warm at 40 samples -> updates start in iteration 2
        assert summary["critic_updates"] == 7 * cfg.samples_per_iteration
        assert summary["actor_updates"] == summary["critic_updates"] // cfg.policy_delay
        rows = (Path(cfg.out_dir) / "metrics.csv").read_text().strip().splitlines()
        header = rows[0].split(",")
        assert header[:3] == ["iteration", "env_steps", "avg_return"]
        data = [r.split(",") for r in rows[1:]]
        iters = [int(r[0]) for r in data]
        steps = [int(r[1]) for r in data]
        assert iters == sorted(iters)
        assert all(s == it * cfg.samples_per_iteration for it, s in zip(iters, steps))

    def test_outputs_exist(self, tmp_path):
        cfg = tiny_cfg(tmp_path)
        train(cfg)
        out = Path(cfg.out_dir)
        for name in ("metrics.csv", "summary.json", "curves.svg", "checkpoint_0.json", "checkpoint_6.json"):
            assert (out / name).exists(), name
        svg = (out / "curves.svg").read_text()
        assert svg.startswith("<svg") and "avg_return" in svg

    def test_fixture_constants_echoed(self, tmp_path):
        cfg = tiny_cfg(tmp_path)
        summary = train(cfg)
        assert summary["env_fixture"]["noise_std"] == 0.2
        assert "build_id" in summary

    def test_stop_return_halts_early(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=50, stop_return=-1e9)
        summary = train(cfg)
        assert summary["stopped_early"]
        assert summary["iterations_run"] == 2  # first eval point


class TestEvaluate:
    def test_single_episode_zero_std(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=0)
        train(cfg)
        mean, std = evaluate(Path(cfg.out_dir) / "checkpoint_0.json", episodes=1)
        assert std == 0.0

    def test_zero_policy_upright_pendulum(self):
        rng = np.random.default_rng(0)
        phi = init_mlp(rng, [3, 8, 2])
        for layer in phi.layers:
            layer.weight[:] = 0.0
            layer.bias[:] = 0.0
        env = PendulumEnv()
        env.force_state(0.0, 0.0)
        total = 0.0
        for _ in range(200):
            _, r, _, _ = env.step(np.tanh(np.zeros(1)))
            total += r
        assert abs(total) < 1e-9

    def test_random_policy_pendulum_band(self):
        # fresh actor networks are near-uniform noise; the band was
        # pinned from the first validated run of this fixture
        rng = np.random.default_rng(11)
        phi = init_mlp(rng, [3, 16, 2])
        env = PendulumEnv()
        mean, _ = evaluate_policy(phi, env, episodes=10, deterministic=False, seed_parts=(3,))
        assert -2000 <= mean <= -800

    def test_dimension_mismatch_rejected(self, tmp_path):
        from dsact.environments import PointRobotEnv

        cfg = tiny_cfg(tmp_path, total_iterations=0)
        train(cfg)
        with pytest.raises(ConfigError):
            evaluate(Path(cfg.out_dir) / "checkpoint_0.json", env=PointRobotEnv(), episodes=1)

    def test_eval_uses_raw_rewards_under_scaling(self, tmp_path):
        # same seed and an untouched policy (warm never reached): the
        # evaluated return must not pick up the buffer-insertion scale
        cfg1 = tiny_cfg(tmp_path / "s1", reward_scale=1.0, total_iterations=2, warm_size=1000)
        cfg2 = tiny_cfg(tmp_path / "s2", reward_scale=100.0, total_iterations=2, warm_size=1000)
        s1, s2 = train(cfg1), train(cfg2)
        assert s1["critic_updates"] == 0
        assert s1["final_return"] == s2["final_return"]
        assert s1["final_return"] != 0.0


class TestMeasureBias:
    def test_sign_convention_and_report(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=3, gamma=0.0)
        train(cfg)
        report = measure_bias(
            Path(cfg.out_dir) / "checkpoint_3.json", n_samples=4, n_rollouts=3
        )
        assert len(report.pairs) == 4
        assert report.horizon == 1
        for est, truth in report.pairs:
            assert np.isfinite(est) and np.isfinite(truth)
        assert report.mean_bias == pytest.approx(
            float(np.mean([e - t for e, t in report.pairs])), abs=1e-12
        )


class TestAblation:
    def test_refinements_study_structure(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=4)
        report = run_ablation("refinements", cfg, seeds=[7, 8], out_dir=tmp_path / "study")
        assert set(report["arms"]) == {"full", "no-evs", "single-dist"}
        for arm, info in report["arms"].items():
            assert len(info["runs"]) == 2
            assert (tmp_path / "study" / arm / "seed7" / "metrics.csv").exists()
        assert (tmp_path / "study" / "report.json").exists()
        assert (tmp_path / "study" / "curves.svg").exists()

    def test_reward_scale_study_grid(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=2)
        report = run_ablation("reward-scale", cfg, out_dir=tmp_path / "study")
        arms = set(report["arms"])
        for s in ("0.01", "0.1", "1", "10", "100"):
            assert f"scale-{s}-adaptive" in arms
            assert f"scale-{s}-fixed-b" in arms
        assert len(arms) == 10

    def test_unknown_study_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            run_ablation("learning-rates", tiny_cfg(tmp_path))

    def test_arm_reproducible_from_echoed_config(self, tmp_path):
        cfg = tiny_cfg(tmp_path, total_iterations=3)
        run_ablation("refinements", cfg, seeds=[7], out_dir=tmp_path / "study")
        arm_dir = tmp_path / "study" / "no-evs" / "seed7"
        echo = json.loads((arm_dir / "summary.json").read_text())["config"]
        echo["out_dir"] = str(tmp_path / "replay")
        cfg2 = config_from_dict(echo)
        train(cfg2)
        m1 = (arm_dir / "metrics.csv").read_bytes()
        m2 = (tmp_path / "replay" / "metrics.csv").read_bytes()
        assert m1 == m2


class TestCli:
    def test_train_eval_bias_roundtrip(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "env": "bandit-chain",
                    "env_overrides": {"noise_std": 0.2},
                    "hidden_actor": [8, 8],
                    "hidden_critic": [8, 8],
                    "batch_size": 16,
                    "warm_size": 40,
                    "total_iterations": 4,
                    "eval_interval": 2,
                    "eval_episodes": 2,
                    "seed": 3,
                    "out_dir": str(tmp_path / "run"),
                }
            )
        )
        assert cli_main(["train", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "final_return" in out
        ckpt = tmp_path / "run" / "checkpoint_4.json"
        assert cli_main(["eval", "--checkpoint", str(ckpt), "--episodes", "2"]) == 0
        assert "avg_return" in capsys.readouterr().out
        assert cli_main(["bias", "--checkpoint", str(ckpt), "--samples", "2", "--rollouts", "2"]) == 0
        assert "mean_bias" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"algorithm": "td3"}))
        assert cli_main(["train", "--config", str(bad)]) == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert cli_main(["train", "--config", str(tmp_path / "nope.json")]) == 2

    def test_numerical_failure_exit_code_and_diagnostics(self, tmp_path, capsys):
        # an absurd learning rate overflows the forward pass to NaN
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "env": "bandit-chain",
                    "hidden_actor": [8, 8],
                    "hidden_critic": [8, 8],
                    "batch_size": 16,
                    "warm_size": 40,
                    "total_iterations": 30,
                    "eval_interval": 10,
                    "eval_episodes": 1,
                    "lr_critic": 1e160,
                    "lr_actor": 1e160,
                    "seed": 1,
                    "out_dir": str(tmp_path / "run"),
                }
            )
        )
        with np.errstate(all="ignore"):
            assert cli_main(["train", "--config", str(cfg_path)]) == 3
        assert "numerical failure" in capsys.readouterr().err
        assert (tmp_path / "run" / "diagnostics.json").exists()

    def test_seed_and_out_overrides(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "env": "bandit-chain",
                    "hidden_actor": [8, 8],
                    "hidden_critic": [8, 8],
                    "batch_size": 8,
                    "warm_size": 20,
                    "total_iterations": 1,
                    "eval_interval": 1,
                    "eval_episodes": 1,
                    "out_dir": str(tmp_path / "ignored"),
                }
            )
        )
        out_dir = tmp_path / "actual"
        assert (
            cli_main(
                ["train", "--config", str(cfg_path), "--seed", "99", "--out", str(out_dir)]
            )
            == 0
        )
        echo = json.loads((out_dir / "summary.json").read_text())["config"]
        assert echo["seed"] == 99
