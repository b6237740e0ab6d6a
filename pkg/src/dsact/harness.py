"""The executable training loop, evaluation, bias measurement and
ablation studies, with CSV/JSON/SVG artifacts.

Per iteration the loop collects a fixed number of environment steps
with the stochastic policy, then (once the buffer is warm) runs one
critic update per collected step; actor, temperature and target-network
updates fire on every policy_delay-th critic update. All randomness is
drawn from named streams derived from the run seed, so a config/seed
pair reproduces metrics.csv bit-exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .actor import act_deterministic, act_stochastic, actor_gradient, policy_forward, temperature_update
from .agent import AgentState, build_agent, load_checkpoint, save_checkpoint
from .baselines import build_variant
from .charts import write_line_chart
from .config import ConfigError, RunConfig, config_from_dict
from .critic import critic_forward, soft_update
from .distributions import policy_logprob
from .environments import make_env
from .harness_util import derived_seed
from .numerics import NumericalError, adam_step, params_all_finite
from .oracles import BiasReport, mc_true_q, truth_horizon
from .replay import ReplayBuffer, Transition

METRICS_HEADER = (
    "iteration,env_steps,avg_return,q_mean,sigma_mean,alpha,"
    "b1,b2,omega1,omega2,entropy_estimate,bias_estimate"
)

_STREAMS = (
    "actor_init",
    "critic1_init",
    "critic2_init",
    "env",
    "policy",
    "replay",
    "targets",
    "actor_noise",
    "temp_noise",
)

_EVAL_TAG = 0xE7A1
_PROBE_TAG = 0x9B0B
_BIAS_TAG = 0xB1A5


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(c) for name, c in zip(_STREAMS, children)}


def build_id() -> str:
    """Digest of the package sources, echoed into summaries."""
    root = Path(__file__).parent
    digest = hashlib.sha1()
    for p in sorted(root.glob("*.py")):
        digest.update(p.read_bytes())
    return digest.hexdigest()[:12]


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def rollout_return(phi, env, seed: int, policy_rng: np.random.Generator | None = None) -> float:
    """One episode's undiscounted raw-reward return."""
    obs = env.reset(seed)
    total = 0.0
    while True:
        if policy_rng is None:
            a = act_deterministic(phi, obs)
        else:
            a = act_stochastic(phi, obs, policy_rng)[0]
        obs, r, done, truncated = env.step(a)
        total += r
        if done or truncated:
            return total


def evaluate_policy(
    phi,
    env,
    episodes: int,
    deterministic: bool = True,
    seed_parts: tuple[int, ...] = (0,),
) -> tuple[float, float]:
    """Mean and std of episode returns over fresh evaluation episodes."""
    sim = env.clone()
    returns = []
    for e in range(episodes):
        ep_seed = derived_seed(*seed_parts, e)
        rng = None if deterministic else np.random.default_rng(derived_seed(*seed_parts, e, 1))
        returns.append(rollout_return(phi, sim, ep_seed, rng))
    returns = np.asarray(returns)
    std = float(np.std(returns)) if episodes > 1 else 0.0
    return float(np.mean(returns)), std


def evaluate(checkpoint: str | Path, env=None, episodes: int = 10, deterministic: bool = True, seed: int = 0):
    """Evaluate a stored policy; builds the env from the checkpoint's
    config echo when none is given."""
    agent, doc = load_checkpoint(checkpoint)
    cfg = config_from_dict(doc["config"])
    if env is None:
        env = make_env(cfg.env, cfg.env_overrides)
    if env.spec.obs_dim != doc["env"]["obs_dim"] or env.spec.act_dim != doc["env"]["act_dim"]:
        raise ConfigError(
            f"env dims ({env.spec.obs_dim}, {env.spec.act_dim}) do not match "
            f"checkpoint ({doc['env']['obs_dim']}, {doc['env']['act_dim']})"
        )
    return evaluate_policy(
        agent.phi, env, episodes, deterministic, seed_parts=(seed, _EVAL_TAG)
    )


def _probe_metrics(agent: AgentState, buffer: ReplayBuffer, cfg: RunConfig, active, eval_index: int):
    """Diagnostics over a probe batch; never touches training streams."""
    if buffer.count == 0:
        return None, None, None
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, _PROBE_TAG, eval_index])
    )
    batch = buffer.sample(min(cfg.batch_size, buffer.count), rng)
    s = np.stack([t.s for t in batch])
    a = np.stack([t.a for t in batch])
    q_means, sigma_means = [], []
    for i in active:
        q, sigma, _, _ = critic_forward(agent.critics.theta[i], s, a)
        q_means.append(np.mean(q))
        sigma_means.append(np.mean(sigma))
    dist = policy_forward(agent.phi, s)
    noise = rng.standard_normal(dist.mu.shape)
    u = dist.mu + np.exp(dist.log_std) * noise
    entropy = float(np.mean(-policy_logprob(dist, u)))
    return float(np.mean(q_means)), float(np.mean(sigma_means)), entropy


def train(cfg: RunConfig) -> dict:
    """Run the full loop; returns the summary document (also saved).

    A non-finite parameter or gradient halts the run, with diagnostics
    written next to the other artifacts before the error propagates.
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    try:
        return _train_inner(cfg, out)
    except NumericalError as exc:
        (out / "diagnostics.json").write_text(
            json.dumps({"error": str(exc), "config": cfg.to_jsonable()}, indent=2)
        )
        raise


def _train_inner(cfg: RunConfig, out: Path) -> dict:
    started = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg.env, cfg.env_overrides)
    streams = make_streams(cfg.seed)
    agent = build_agent(cfg, env.spec, streams)
    variant_cfg = cfg.variant()
    update_step = build_variant(variant_cfg)
    active = variant_cfg.active_critics
    buffer = ReplayBuffer(cfg.buffer_capacity)

    save_checkpoint(out / "checkpoint_0.json", agent, cfg, env.spec)
    rows: list[dict] = []
    metrics_path = out / "metrics.csv"
    critic_updates = 0
    actor_updates = 0
    stopped_early = False
    eval_index = 0

    with metrics_path.open("w") as metrics_file:
        metrics_file.write(METRICS_HEADER + "\n")
        obs = env.reset(int(streams["env"].integers(0, 2**63)))
        for iteration in range(1, cfg.total_iterations + 1):
            for _ in range(cfg.samples_per_iteration):
                a, _ = act_stochastic(agent.phi, obs, streams["policy"])
                obs2, r, done, truncated = env.step(a)
                buffer.push(
                    Transition(obs, a, r * cfg.reward_scale, obs2, done, truncated)
                )
                agent.env_steps += 1
                if done or truncated:
                    obs = env.reset(int(streams["env"].integers(0, 2**63)))
                else:
                    obs = obs2
            if buffer.count >= cfg.warm_size:
                for _ in range(cfg.updates):
                    batch = buffer.sample(cfg.batch_size, streams["replay"])
                    update_step(
                        agent.critics,
                        batch,
                        agent.phi_bar,
                        agent.temperature.alpha,
                        cfg,
                        streams["targets"],
                    )
                    critic_updates += 1
                    if critic_updates % cfg.policy_delay == 0:
                        s_batch = np.stack([t.s for t in batch])
                        grads = actor_gradient(
                            agent.phi,
                            s_batch,
                            agent.critics,
                            agent.temperature.alpha,
                            streams["actor_noise"],
                            active,
                        )
                        adam_step(agent.adam_actor, agent.phi, grads.scale(-1.0), cfg.lr_actor)
                        actor_updates += 1
                        dist = policy_forward(agent.phi, s_batch)
                        noise = streams["temp_noise"].standard_normal(dist.mu.shape)
                        u = dist.mu + np.exp(dist.log_std) * noise
                        agent.temperature = temperature_update(
                            agent.temperature, policy_logprob(dist, u)
                        )
                        for i in active:
                            soft_update(agent.critics.theta[i], agent.critics.theta_bar[i], cfg.tau)
                        soft_update(agent.phi, agent.phi_bar, cfg.tau)
            agent.iteration = iteration

            if not params_all_finite(agent.phi) or not all(
                params_all_finite(agent.critics.theta[i]) for i in active
            ):
                raise NumericalError(
                    f"non-finite parameters at iteration {iteration} "
                    f"(alpha={agent.temperature.alpha:.3g}, b={agent.critics.b}, "
                    f"omega={agent.critics.omega})"
                )

            if iteration % cfg.eval_interval == 0 or iteration == cfg.total_iterations:
                eval_index += 1
                avg_return, _ = evaluate_policy(
                    agent.phi,
                    env,
                    cfg.eval_episodes,
                    deterministic=True,
                    seed_parts=(cfg.seed, _EVAL_TAG, eval_index),
                )
                q_mean, sigma_mean, entropy = _probe_metrics(
                    agent, buffer, cfg, active, eval_index
                )
                row = {
                    "iteration": iteration,
                    "env_steps": agent.env_steps,
                    "avg_return": avg_return,
                    "q_mean": q_mean,
                    "sigma_mean": sigma_mean,
                    "alpha": agent.temperature.alpha,
                    "b1": agent.critics.b[0],
                    "b2": agent.critics.b[1],
                    "omega1": agent.critics.omega[0],
                    "omega2": agent.critics.omega[1],
                    "entropy_estimate": entropy,
                    "bias_estimate": None,
                }
                rows.append(row)
                metrics_file.write(
                    f"{row['iteration']},{row['env_steps']},"
                    + ",".join(
                        _fmt(row[k])
                        for k in (
                            "avg_return",
                            "q_mean",
                            "sigma_mean",
                            "alpha",
                            "b1",
                            "b2",
                            "omega1",
                            "omega2",
                            "entropy_estimate",
                            "bias_estimate",
                        )
                    )
                    + "\n"
                )
                metrics_file.flush()
                if cfg.checkpoint_interval and iteration % cfg.checkpoint_interval == 0:
                    save_checkpoint(out / f"checkpoint_{iteration}.json", agent, cfg, env.spec)
                if cfg.stop_return is not None and avg_return >= cfg.stop_return:
                    stopped_early = True
                    break

    save_checkpoint(out / f"checkpoint_{agent.iteration}.json", agent, cfg, env.spec)
    if rows:
        series = {"avg_return": ([r["env_steps"] for r in rows], [r["avg_return"] for r in rows])}
        write_line_chart(
            out / "curves.svg", series, f"{cfg.algorithm} on {cfg.env}", "env steps", "return"
        )
    summary = {
        "config": cfg.to_jsonable(),
        "env_fixture": env.fixture_constants(),
        "build_id": build_id(),
        "iterations_run": agent.iteration,
        "env_steps": agent.env_steps,
        "critic_updates": critic_updates,
        "actor_updates": actor_updates,
        "final_return": rows[-1]["avg_return"] if rows else None,
        "final_alpha": agent.temperature.alpha,
        "stopped_early": stopped_early,
        "runtime_s": time.perf_counter() - started,
        "checkpoint": f"checkpoint_{agent.iteration}.json",
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def collect_on_policy_pairs(env, phi, n_samples: int, rng: np.random.Generator):
    """(physical state, obs, action) triples from fresh stochastic
    rollouts, subsampled uniformly."""
    triples = []
    episodes = 0
    while len(triples) < 5 * n_samples and episodes < max(n_samples, 4):
        obs = env.reset(int(rng.integers(0, 2**63)))
        episodes += 1
        while True:
            phys = env.get_state()
            a, _ = act_stochastic(phi, obs, rng)
            triples.append((phys, np.array(obs), a))
            obs, _, done, truncated = env.step(a)
            if done or truncated:
                break
    idx = rng.choice(len(triples), size=min(n_samples, len(triples)), replace=False)
    return [triples[i] for i in idx]


def measure_bias(
    checkpoint: str | Path,
    env=None,
    n_samples: int = 20,
    n_rollouts: int = 100,
    seed: int = 0,
) -> BiasReport:
    """Critic estimate minus Monte-Carlo truth over on-policy pairs.

    Negative mean bias means underestimation. Truth rollouts follow the
    stored stochastic policy with entropy bonuses after the first step.
    """
    agent, doc = load_checkpoint(checkpoint)
    cfg = config_from_dict(doc["config"])
    if env is None:
        env = make_env(cfg.env, cfg.env_overrides)
    active = cfg.variant().active_critics
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _BIAS_TAG, seed]))
    pairs = collect_on_policy_pairs(env.clone(), agent.phi, n_samples, rng)

    def policy(obs, prng):
        return act_stochastic(agent.phi, obs, prng)

    alpha = agent.temperature.alpha
    report_pairs = []
    for phys, obs, a in pairs:
        estimates = [
            critic_forward(agent.critics.theta[i], obs[None, :], a[None, :])[0][0]
            for i in active
        ]
        estimate = float(np.min(estimates))
        truth = mc_true_q(env, policy, (phys, a), n_rollouts, cfg.gamma, alpha, rng)
        report_pairs.append((estimate, truth))
    mean_bias = float(np.mean([e - t for e, t in report_pairs]))
    return BiasReport(
        mean_bias=mean_bias,
        pairs=report_pairs,
        n_rollouts=n_rollouts,
        horizon=truth_horizon(cfg.gamma),
    )


ABLATION_STUDIES = ("refinements", "reward-scale")
REWARD_SCALES = (0.01, 0.1, 1.0, 10.0, 100.0)


def run_ablation(
    study: str,
    base_cfg: RunConfig,
    seeds: list[int] | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """Run an arm-by-arm comparison with shared seeds.

    ``refinements`` toggles off one refinement at a time;
    ``reward-scale`` crosses reward scales with the adaptive and
    fixed-boundary kernels. Each arm's config is echoed in its own run
    directory, so any arm reproduces independently.
    """
    if study not in ABLATION_STUDIES:
        raise ConfigError(f"unknown study {study!r}; choose from {ABLATION_STUDIES}")
    seeds = list(seeds) if seeds else [base_cfg.seed]
    out = Path(out_dir) if out_dir else Path(base_cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if study == "refinements":
        arms = {
            "full": {},
            "no-evs": {"expected_value_substitution": False},
            "single-dist": {"twin_distributions": False},
        }
    else:
        arms = {}
        for s in REWARD_SCALES:
            arms[f"scale-{s:g}-adaptive"] = {"reward_scale": s}
            arms[f"scale-{s:g}-fixed-b"] = {"reward_scale": s, "variance_adjustment": False}

    report: dict = {"study": study, "seeds": seeds, "arms": {}}
    curves: dict[str, tuple[list[float], list[float]]] = {}
    for arm, flags in arms.items():
        arm_runs = []
        return_matrix = []
        steps_axis: list[float] = []
        for seed in seeds:
            run_dir = out / arm / f"seed{seed}"
            cfg_arm = dataclasses.replace(
                base_cfg, seed=seed, out_dir=str(run_dir), **flags
            )
            summary = train(cfg_arm)
            steps, returns = _read_return_curve(run_dir / "metrics.csv")
            arm_runs.append(
                {
                    "seed": seed,
                    "final_return": summary["final_return"],
                    "run_dir": str(run_dir),
                }
            )
            return_matrix.append(returns)
            steps_axis = steps
        n_common = min(len(r) for r in return_matrix)
        matrix = np.array([r[:n_common] for r in return_matrix])
        steps_axis = steps_axis[:n_common]
        mean_curve = matrix.mean(axis=0)
        mid = n_common // 2
        aulc = float(np.trapezoid(mean_curve, steps_axis)) if n_common > 1 else float(mean_curve[0])
        report["arms"][arm] = {
            "runs": arm_runs,
            "mean_final_return": float(mean_curve[-1]),
            "aulc": aulc,
            "mid_return_variance": float(matrix[:, mid].var(ddof=1)) if len(seeds) > 1 else 0.0,
            "mean_curve": {"env_steps": list(steps_axis), "avg_return": mean_curve.tolist()},
        }
        curves[arm] = (list(steps_axis), mean_curve.tolist())

    (out / "report.json").write_text(json.dumps(report, indent=2))
    write_line_chart(
        out / "curves.svg", curves, f"{study} study ({base_cfg.env})", "env steps", "return"
    )
    return report


def _read_return_curve(metrics_path: Path) -> tuple[list[float], list[float]]:
    steps, returns = [], []
    with metrics_path.open() as f:
        header = f.readline().strip().split(",")
        i_steps = header.index("env_steps")
        i_ret = header.index("avg_return")
        for line in f:
            cells = line.strip().split(",")
            steps.append(float(cells[i_steps]))
            returns.append(float(cells[i_ret]))
    return steps, returns
