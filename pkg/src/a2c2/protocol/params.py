"""Phase-length, learning-rate and code-length schedules for each protocol.

Logarithms are natural.  Every ``Theta(T^x)`` length is realised as
``max(1, ceil(T^x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BETA_FLOOR = 0.25
_CEIL_SLACK = 1e-9  # absorbs float error in T**x when the exact value is an integer


def ceil_pow(T: int, x: float) -> int:
    return max(1, math.ceil(T**x - _CEIL_SLACK))


def log_binom(K: int, M: int) -> float:
    return math.lgamma(K + 1) - math.lgamma(M + 1) - math.lgamma(K - M + 1)


def learning_rate(M: int, K: int, T: int, tau: int) -> float:
    """Blocked meta-arm EXP3 rate ``sqrt(log C(K,M) * tau / (M K T))``."""
    return math.sqrt(max(log_binom(K, M), 0.0) * tau / (M * K * T))


@dataclass(frozen=True)
class ProtocolParams:
    tau: int
    eta: float
    h: int = 1  # repetition length, alpha protocols
    k_code: int = 1  # assignment / error-report length, beta protocols
    xi: float = 0.0  # sync round-count exponent
    nu: float = 0.0  # assignment coding exponent, beta protocols
    epsilon_step: float = 0.01
    sync_len: int = 1  # per-bit length of sync rounds, beta-unaware

    def __post_init__(self):
        if self.tau < 1 or self.h < 1 or self.k_code < 1 or self.sync_len < 1:
            raise ValueError(f"lengths must be >= 1: {self}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")


def _check_game(M: int, K: int, T: int):
    if M < 2:
        raise ValueError("coordination protocols need M >= 2 (a single player needs no protocol)")
    if M > K:
        raise ValueError(f"M exceeds K ({M} > {K})")
    if T < 1:
        raise ValueError("T must be positive")


def _check_unit(name: str, x: float):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def params_alpha_aware(M: int, K: int, T: int, alpha: float, eps: float) -> ProtocolParams:
    _check_game(M, K, T)
    _check_unit("alpha", alpha)
    if eps <= 0:
        raise ValueError("eps must be positive")
    tau = math.ceil(
        M ** (2 / 3) * K ** (-1 / 3) * math.log(K) ** (1 / 3) * T ** ((1 + 2 * alpha + 2 * eps) / 3)
    )
    return ProtocolParams(
        tau=tau,
        eta=learning_rate(M, K, T, tau),
        h=ceil_pow(T, alpha + eps),
        epsilon_step=eps,
    )


def params_beta_aware(M: int, K: int, T: int, beta: float) -> ProtocolParams:
    _check_game(M, K, T)
    _check_unit("beta", beta)
    tau = math.ceil(K ** (1 / 3) * math.log(K) ** (-1 / 3) * T ** max(beta, 1 / 3))
    nu = max((3 * beta - 1) / 2, 0.0)
    return ProtocolParams(tau=tau, eta=learning_rate(M, K, T, tau), k_code=ceil_pow(T, nu), nu=nu)


def params_alpha_unaware(M: int, K: int, T: int, alpha_est: float, eps: float = 0.01) -> ProtocolParams:
    _check_game(M, K, T)
    _check_unit("alpha_est", alpha_est)
    tau = math.ceil(
        M ** (2 / 3) * K ** (-1 / 3) * math.log(K) ** (-1 / 3) * T ** ((2 + alpha_est) / 3)
    )
    return ProtocolParams(
        tau=tau,
        eta=learning_rate(M, K, T, tau),
        h=ceil_pow(T, alpha_est),
        xi=(1 - alpha_est) / 2,
        epsilon_step=eps,
    )


def params_beta_unaware(M: int, K: int, T: int, beta_est: float, eps: float = 0.01) -> ProtocolParams:
    """Schedule under estimate ``beta_est >= 1/4``.

    The sync round-count exponent is ``(2 - 2 beta') / 3`` for leader and
    followers alike; both must draw the same number of rounds.
    """
    _check_game(M, K, T)
    if beta_est < BETA_FLOOR - 1e-12 or beta_est > 1.0:
        raise ValueError(f"beta_est must lie in [1/4, 1], got {beta_est}")
    tau = math.ceil(K ** (-1 / 3) * math.log(K) ** (-1 / 3) * T ** ((1 + 2 * beta_est) / 3))
    nu = max((4 * beta_est - 1) / 3, 0.0)
    return ProtocolParams(
        tau=tau,
        eta=learning_rate(M, K, T, tau),
        k_code=ceil_pow(T, nu),
        xi=(2 - 2 * beta_est) / 3,
        nu=nu,
        epsilon_step=eps,
        sync_len=ceil_pow(T, beta_est),
    )


def sync_rounds_max(xi: float, T: int) -> int:
    return ceil_pow(T, xi)


def sync_round_count(xi: float, T: int, shared_rng: np.random.Generator) -> int:
    """Uniform on ``{1, ..., ceil(T^xi)}``, drawn from the stream every player shares."""
    _check_unit("xi", xi)
    return int(shared_rng.integers(1, sync_rounds_max(xi, T) + 1))


def escalate(est: float, F: int, eps: float) -> float:
    _check_unit("estimate", est)
    return min(est + (eps if F else 0.0), 1.0)
