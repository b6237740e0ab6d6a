"""Agent assembly and checkpoint serialization.

A checkpoint is a flat JSON document: every array appears under a
dotted name in "params" as a row-major list with its shape recorded in
"shapes". Python's repr-based float serialization keeps round-trips
bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actor import Temperature
from .config import ConfigError, RunConfig
from .critic import CriticPairState, init_critic_pair
from .environments import EnvSpec
from .numerics import AdamState, Layer, ParamSet, init_adam, init_mlp

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class AgentState:
    phi: ParamSet
    phi_bar: ParamSet
    adam_actor: AdamState
    critics: CriticPairState
    temperature: Temperature
    iteration: int = 0
    env_steps: int = 0


def build_agent(cfg: RunConfig, env_spec: EnvSpec, rngs: dict) -> AgentState:
    """Fresh networks; rngs carries the named init streams."""
    actor_sizes = [env_spec.obs_dim, *cfg.hidden_actor, 2 * env_spec.act_dim]
    phi = init_mlp(rngs["actor_init"], actor_sizes)
    critics = init_critic_pair(
        (rngs["critic1_init"], rngs["critic2_init"]),
        env_spec.obs_dim,
        env_spec.act_dim,
        list(cfg.hidden_critic),
    )
    target_entropy = (
        -float(env_spec.act_dim) if cfg.target_entropy is None else cfg.target_entropy
    )
    return AgentState(
        phi=phi,
        phi_bar=phi.copy(),
        adam_actor=init_adam(phi),
        critics=critics,
        temperature=Temperature(cfg.alpha_init, target_entropy, cfg.lr_alpha),
    )


def _put_params(doc: dict, name: str, params: ParamSet) -> None:
    for i, layer in enumerate(params.layers):
        for part, arr in (("weight", layer.weight), ("bias", layer.bias)):
            key = f"{name}.l{i}.{part}"
            doc["shapes"][key] = list(arr.shape)
            doc["params"][key] = arr.reshape(-1).tolist()
    doc["activations"][name] = [layer.activation for layer in params.layers]


def _get_params(doc: dict, name: str) -> ParamSet:
    acts = doc["activations"][name]
    layers = []
    for i, act in enumerate(acts):
        parts = {}
        for part in ("weight", "bias"):
            key = f"{name}.l{i}.{part}"
            shape = tuple(doc["shapes"][key])
            parts[part] = np.array(doc["params"][key], dtype=np.float64).reshape(shape)
        layers.append(Layer(parts["weight"], parts["bias"], act))
    return ParamSet(layers)


def _put_adam(doc: dict, name: str, state: AdamState) -> None:
    for i in range(len(state.m_weights)):
        for part, arr in (
            ("m_weight", state.m_weights[i]),
            ("v_weight", state.v_weights[i]),
            ("m_bias", state.m_biases[i]),
            ("v_bias", state.v_biases[i]),
        ):
            key = f"adam.{name}.l{i}.{part}"
            doc["shapes"][key] = list(arr.shape)
            doc["params"][key] = arr.reshape(-1).tolist()
    doc["adam_steps"][name] = state.step


def _get_adam(doc: dict, name: str, params: ParamSet) -> AdamState:
    state = init_adam(params)
    for i in range(len(params.layers)):
        for part, dest in (
            ("m_weight", state.m_weights),
            ("v_weight", state.v_weights),
            ("m_bias", state.m_biases),
            ("v_bias", state.v_biases),
        ):
            key = f"adam.{name}.l{i}.{part}"
            shape = tuple(doc["shapes"][key])
            dest[i] = np.array(doc["params"][key], dtype=np.float64).reshape(shape)
    state.step = int(doc["adam_steps"][name])
    return state


def save_checkpoint(path: str | Path, agent: AgentState, cfg: RunConfig, env_spec: EnvSpec) -> None:
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": cfg.to_jsonable(),
        "env": {
            "name": env_spec.name,
            "obs_dim": env_spec.obs_dim,
            "act_dim": env_spec.act_dim,
        },
        "iteration": agent.iteration,
        "env_steps": agent.env_steps,
        "alpha": agent.temperature.alpha,
        "target_entropy": agent.temperature.target_entropy,
        "b": list(agent.critics.b),
        "omega": list(agent.critics.omega),
        "stats_initialized": list(agent.critics.stats_initialized),
        "shapes": {},
        "params": {},
        "activations": {},
        "adam_steps": {},
    }
    _put_params(doc, "actor", agent.phi)
    _put_params(doc, "actor_target", agent.phi_bar)
    for i in range(2):
        _put_params(doc, f"critic{i + 1}", agent.critics.theta[i])
        _put_params(doc, f"critic{i + 1}_target", agent.critics.theta_bar[i])
        _put_adam(doc, f"critic{i + 1}", agent.critics.adam[i])
    _put_adam(doc, "actor", agent.adam_actor)
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> tuple[AgentState, dict]:
    """Rebuild the agent; returns (agent, raw document) so callers can
    read the config echo and env block."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint format {doc.get('format_version')!r}"
        )
    phi = _get_params(doc, "actor")
    critics = CriticPairState(
        theta=tuple(_get_params(doc, f"critic{i + 1}") for i in range(2)),
        theta_bar=tuple(_get_params(doc, f"critic{i + 1}_target") for i in range(2)),
        adam=tuple(
            _get_adam(doc, f"critic{i + 1}", _get_params(doc, f"critic{i + 1}"))
            for i in range(2)
        ),
        b=[float(x) for x in doc["b"]],
        omega=[float(x) for x in doc["omega"]],
        stats_initialized=[bool(x) for x in doc["stats_initialized"]],
    )
    cfg_echo = doc.get("config", {})
    agent = AgentState(
        phi=phi,
        phi_bar=_get_params(doc, "actor_target"),
        adam_actor=_get_adam(doc, "actor", phi),
        critics=critics,
        temperature=Temperature(
            float(doc["alpha"]),
            float(doc["target_entropy"]),
            float(cfg_echo.get("lr_alpha", 3e-4)),
        ),
        iteration=int(doc["iteration"]),
        env_steps=int(doc["env_steps"]),
    )
    return agent, doc
