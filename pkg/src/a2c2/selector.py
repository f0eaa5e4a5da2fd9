"""Leader-side meta-arm selection.

The leader runs exponential weights over all M-subsets of arms with
``P(A) ~ prod_{k in A} w_k``, i.e. a diagonal k-DPP.  Sampling and single-arm
marginals both reduce to elementary symmetric polynomials of the per-arm
weights, computed here with the O(KM) recurrence in the log domain so that
weights spanning thousands of nats neither overflow nor underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MetaArm:
    arms: tuple[int, ...]  # strictly increasing, 1-based

    def __post_init__(self):
        arms = tuple(int(a) for a in self.arms)
        if any(a < 1 for a in arms) or any(b <= a for a, b in zip(arms, arms[1:])):
            raise ValueError(f"meta-arm must be strictly increasing 1-based indices, got {arms}")
        object.__setattr__(self, "arms", arms)

    def __contains__(self, k):
        return k in self.arms

    def __len__(self):
        return len(self.arms)


@dataclass(frozen=True)
class EstimatorState:
    """Per-arm cumulative loss estimates summed over completed phases."""

    cum_est: np.ndarray
    phase: int = 0

    def __post_init__(self):
        arr = np.array(self.cum_est, dtype=np.float64, copy=True)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("cum_est must be a finite non-negative vector")
        if self.phase < 0:
            raise ValueError("phase must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "cum_est", arr)

    @classmethod
    def zeros(cls, K: int) -> "EstimatorState":
        return cls(np.zeros(K))


@dataclass(frozen=True)
class WeightVector:
    """Log weights ``-eta * L_k`` up to a common additive shift."""

    log_weights: np.ndarray = field()

    def __post_init__(self):
        arr = np.array(self.log_weights, dtype=np.float64, copy=True)
        if arr.ndim != 1 or np.any(np.isnan(arr)) or np.any(arr == np.inf):
            raise ValueError("log weights must be a vector without NaN or +inf")
        object.__setattr__(self, "log_weights", arr)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "WeightVector":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        with np.errstate(divide="ignore"):
            return cls(np.log(w))

    @property
    def K(self) -> int:
        return self.log_weights.size


# ------------------------------------------------- elementary symmetric sums


def _log_esp_suffix(logw: np.ndarray, M: int) -> np.ndarray:
    """``E[j, i] = log e_j(w_i, ..., w_{K-1})`` for j <= M, i <= K."""
    K = logw.size
    E = np.full((M + 1, K + 1), -np.inf)
    E[0, :] = 0.0
    for i in range(K - 1, -1, -1):
        E[1:, i] = np.logaddexp(E[1:, i + 1], logw[i] + E[:-1, i + 1])
    return E


def _log_esp_prefix(logw: np.ndarray, M: int) -> np.ndarray:
    """``P[j, i] = log e_j(w_0, ..., w_{i-1})``."""
    K = logw.size
    P = np.full((M + 1, K + 1), -np.inf)
    P[0, :] = 0.0
    for i in range(K):
        P[1:, i + 1] = np.logaddexp(P[1:, i], logw[i] + P[:-1, i])
    return P


def log_elementary_symmetric(log_weights: Sequence[float], M: int) -> np.ndarray:
    logw = np.asarray(log_weights, dtype=np.float64)
    if not 0 <= M <= logw.size:
        raise ValueError(f"need 0 <= M <= K, got M={M}, K={logw.size}")
    return _log_esp_suffix(logw, M)[:, 0]


def elementary_symmetric(weights: Sequence[float], M: int) -> np.ndarray:
    """``e_0..e_M`` of non-negative weights."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    with np.errstate(divide="ignore"):
        return np.exp(log_elementary_symmetric(np.log(w), M))


def _check_support(w: WeightVector, M: int):
    if not 1 <= M <= w.K:
        raise ValueError(f"need 1 <= M <= K, got M={M}, K={w.K}")
    if np.count_nonzero(np.isfinite(w.log_weights)) < M:
        raise ValueError(f"need at least M={M} strictly positive weights")


# ----------------------------------------------------------------- sampling


def sample_meta_arms(w: WeightVector, M: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent meta-arms as a (size, M) array of 1-based arms.

    Each draw walks the arms once, including arm i with its conditional
    probability ``w_i e_{r-1}(w_{i+1..}) / e_r(w_{i..})`` given the r slots
    still open, so a subset A comes out with probability
    ``prod_{k in A} w_k / e_M(w)``.
    """
    _check_support(w, M)
    logw, K = w.log_weights, w.K
    E = _log_esp_suffix(logw, M)
    u = rng.random((size, K))
    out = np.zeros((size, M), dtype=np.int64)
    left = np.full(size, M)
    rows = np.arange(size)
    for i in range(K):
        active = left > 0
        if not active.any():
            break
        with np.errstate(invalid="ignore"):
            p = np.exp(logw[i] + E[np.maximum(left - 1, 0), i + 1] - E[left, i])
        take = active & ((K - i == left) | (u[:, i] < p))
        out[rows[take], M - left[take]] = i + 1
        left -= take
    return out


def sample_meta_arm(w: WeightVector, M: int, rng: np.random.Generator) -> MetaArm:
    """One draw of :func:`sample_meta_arms`."""
    return MetaArm(tuple(int(a) for a in sample_meta_arms(w, M, rng, 1)[0]))


def marginals(w: WeightVector, M: int) -> np.ndarray:
    """``P(k in A)`` for every arm, in O(KM) total."""
    _check_support(w, M)
    logw = w.log_weights
    K = w.K
    S = _log_esp_suffix(logw, M)
    P = _log_esp_prefix(logw, M)
    log_eM = S[M, 0]
    out = np.empty(K)
    for k in range(K):
        # e_{M-1} of every weight except arm k, split around k
        parts = P[: M, k] + S[M - 1 :: -1, k + 1]
        out[k] = np.exp(logw[k] + np.logaddexp.reduce(parts) - log_eM)
    return out


def marginal(w: WeightVector, M: int, k: int) -> float:
    """``P(k in A) = w_k e_{M-1}(w without k) / e_M(w)`` for 1-based arm k."""
    _check_support(w, M)
    if not 1 <= k <= w.K:
        raise ValueError(f"arm {k} outside [1, {w.K}]")
    logw = w.log_weights
    rest = np.delete(logw, k - 1)
    log_rest = _log_esp_suffix(rest, M - 1)[M - 1, 0]
    log_eM = _log_esp_suffix(logw, M)[M, 0]
    return float(np.exp(logw[k - 1] + log_rest - log_eM))


# ---------------------------------------------------------------- estimator


def weights_from_estimates(state: EstimatorState, eta: float) -> WeightVector:
    lw = -eta * state.cum_est
    return WeightVector(lw - lw.max())


def update_estimator(
    state: EstimatorState,
    chosen: MetaArm,
    leader_arm: int,
    observed_cum_loss: float,
    tau: int,
    marg_leader_arm: float,
    M: int,
    success: int,
) -> EstimatorState:
    """Importance-weighted update from the leader's own block of tau pulls.

    Only the leader's arm moves, by ``(M / tau) * loss / P(leader_arm in A)``.
    A phase flagged as failed contributes nothing; the phase count advances
    either way.
    """
    if leader_arm not in chosen:
        raise ValueError(f"leader arm {leader_arm} not in meta-arm {chosen.arms}")
    if not marg_leader_arm > 0:
        raise ValueError(f"marginal must be positive, got {marg_leader_arm}")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if observed_cum_loss < 0:
        raise ValueError("observed loss must be non-negative")
    cum = state.cum_est.copy()
    if success:
        cum[leader_arm - 1] += (M / tau) * observed_cum_loss / marg_leader_arm
    return EstimatorState(cum, state.phase + 1)
