"""Seedable simulator of a multi-antenna bistatic backscatter link with a
resource-allocation suite: deep-RL learners and an alternating-optimization
benchmark jointly choosing the transmit beam, receive combiners, and tag
reflection coefficients under energy-harvesting constraints.
"""

from .agents import (ALGORITHMS, AgentHyper, DdpgAgent, DqnAgent, SacAgent,
                     build_agent)
from .ao import AoOptions, AoResult, ao_solve
from .environment import BackscatterEnv, StepOutcome, action_dim, state_dim
from .errors import (ActionError, BibcError, ConfigError, DomainError,
                     InfeasibleProblem, MatrixError, ParameterError,
                     StateError)
from .harness import ExperimentConfig, parse_config, run_experiment, summarize
from .link import BeamState, EhParams
from .numerics import SeededRng
from .scenario import ChannelRealization, Scenario, SystemConfig

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "ActionError", "AgentHyper", "AoOptions", "AoResult",
    "BackscatterEnv", "BeamState", "BibcError", "ChannelRealization",
    "ConfigError", "DdpgAgent", "DomainError", "DqnAgent", "EhParams",
    "ExperimentConfig", "InfeasibleProblem", "MatrixError", "ParameterError",
    "SacAgent", "Scenario", "SeededRng", "StateError", "StepOutcome",
    "SystemConfig", "action_dim", "ao_solve", "build_agent", "parse_config",
    "run_experiment", "state_dim", "summarize",
]
