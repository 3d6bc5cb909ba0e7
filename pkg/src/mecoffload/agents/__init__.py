"""Offloading policies: local, edge-first, DQN, DRQN and Com-DDPG."""

from __future__ import annotations

from ..nn import load_params, save_params
from .base import (DivergenceError, EpisodeRecord, HeuristicPolicy, LearnedPolicy, ReplayBuffer,
                   TrainConfig, log_to_csv, masked_argmax, policy_edge_first, policy_local, smoothed,
                   train)
from .comddpg import ComDDPGAgent
from .dqn import DQNAgent, DRQNAgent

LEARNED = {"dqn": DQNAgent, "drqn": DRQNAgent, "comddpg": ComDDPGAgent}
HEURISTIC = ("local", "edge_first")
POLICIES = (*HEURISTIC, *LEARNED)


def make_agent(kind: str, obs_dim: int, local_dim: int, n_actions: int, tcfg: TrainConfig | None = None):
    try:
        cls = LEARNED[kind]
    except KeyError:
        raise ValueError(f"unknown learned policy {kind!r}; choose from {sorted(LEARNED)}") from None
    return cls(obs_dim, local_dim, n_actions, tcfg)


def save_agent(path, agent) -> None:
    save_params(path, agent.params, agent.topology())


def load_agent(path, tcfg: TrainConfig | None = None):
    params, topo = load_params(path)
    base = tcfg.to_dict() if tcfg is not None else {}
    base.update({k: topo[k] for k in ("hidden", "brnn_hidden", "window") if k in topo})
    agent = make_agent(topo["agent"], topo["obs_dim"], topo["local_dim"], topo["n_actions"],
                       TrainConfig.from_dict(base))
    if hasattr(agent, "load"):
        agent.load(params)
    else:
        for k, v in params.items():
            agent.params[k][...] = v
        agent.target = {k: v.copy() for k, v in agent.params.items()}
    return agent


__all__ = [
    "ComDDPGAgent", "DQNAgent", "DRQNAgent", "DivergenceError", "EpisodeRecord", "HEURISTIC",
    "HeuristicPolicy", "LEARNED", "LearnedPolicy", "POLICIES", "ReplayBuffer", "TrainConfig",
    "load_agent", "log_to_csv", "make_agent", "masked_argmax", "policy_edge_first", "policy_local",
    "save_agent", "smoothed", "train",
]
