"""Adversarial multi-player bandits without collision sensing: loss
generators, collision codes, leader/follower protocols and a regret harness."""

from .env import LossMatrix, Observation, attackability, regret
from .harness import RunSpec, monte_carlo, run_episode, sync_failure_probe, theory_bound
from .protocol import PROTOCOLS, make_agents

__version__ = "0.1.0"

__all__ = [
    "PROTOCOLS",
    "LossMatrix",
    "Observation",
    "RunSpec",
    "attackability",
    "make_agents",
    "monte_carlo",
    "regret",
    "run_episode",
    "sync_failure_probe",
    "theory_bound",
]
