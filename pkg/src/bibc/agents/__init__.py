"""Learners that choose the beam and reflection coefficients."""

from ..errors import ConfigError
from .common import AgentHyper, ReplayBuffer
from .ddpg import DdpgAgent
from .dqn import DiscreteActionTable, DqnAgent, build_action_table, build_codebook
from .sac import SacAgent, squashed_logp

ALGORITHMS = ("ddpg", "sac", "dqn", "ddqn", "dueldqn")


def build_agent(name, state_dim, action_dim, config, hyper, rng):
    """Construct a learner by name; discrete variants get an action table
    sized from the system config."""
    name = name.lower()
    if name == "ddpg":
        return DdpgAgent(state_dim, action_dim, hyper, rng)
    if name == "sac":
        return SacAgent(state_dim, action_dim, hyper, rng)
    if name in ("dqn", "ddqn", "dueldqn"):
        table = build_action_table(config.m, config.k, config.ps_watts, hyper)
        variant = {"dqn": "dqn", "ddqn": "ddqn", "dueldqn": "duel"}[name]
        return DqnAgent(state_dim, table, hyper, rng, variant=variant)
    raise ConfigError(
        f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")


__all__ = [
    "ALGORITHMS", "AgentHyper", "ReplayBuffer", "DdpgAgent", "SacAgent",
    "DqnAgent", "DiscreteActionTable", "build_action_table", "build_codebook",
    "build_agent", "squashed_logp",
]
