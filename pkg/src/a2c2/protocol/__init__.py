from .agents import (
    PROTOCOLS,
    Agent,
    Exp3Agent,
    Kind,
    agent_step,
    baseline_parallel_exp3,
    make_agents,
)
from .params import (
    ProtocolParams,
    escalate,
    learning_rate,
    params_alpha_aware,
    params_alpha_unaware,
    params_beta_aware,
    params_beta_unaware,
    sync_round_count,
    sync_rounds_max,
)

__all__ = [
    "PROTOCOLS",
    "Agent",
    "Exp3Agent",
    "Kind",
    "ProtocolParams",
    "agent_step",
    "baseline_parallel_exp3",
    "escalate",
    "learning_rate",
    "make_agents",
    "params_alpha_aware",
    "params_alpha_unaware",
    "params_beta_aware",
    "params_beta_unaware",
    "sync_round_count",
    "sync_rounds_max",
]
