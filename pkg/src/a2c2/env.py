"""Oblivious adversaries, the no-sensing collision model and regret oracles.

Arm, player and slot indices are 1-based at every public boundary of this
module (``arm in 1..K``, ``t in 1..T``).  Arrays are 0-based internally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ATTACK = 1.0  # only losses exactly equal to 1 count as attacks


@dataclass(frozen=True)
class LossMatrix:
    """K x T loss table fixed by the adversary before play starts."""

    losses: np.ndarray
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        arr = np.array(self.losses, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"losses must be a non-empty K x T array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("every loss must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "losses", arr)

    @property
    def num_arms(self) -> int:
        return self.losses.shape[0]

    @property
    def horizon(self) -> int:
        return self.losses.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LossMatrix):
            return NotImplemented
        return np.array_equal(self.losses, other.losses)

    def __hash__(self):
        return hash((self.losses.shape, self.losses.tobytes()))


@dataclass(frozen=True, slots=True)
class Observation:
    """What a no-sensing player sees after a pull: her arm and her loss.

    Deliberately carries no collision indicator.
    """

    arm: int
    loss: float


@dataclass(frozen=True, slots=True)
class AttackabilityProfile:
    W: int
    V: int


# ---------------------------------------------------------------- generators


def _plant_bursts(losses: np.ndarray, burst_len: int, n_bursts: int, rng: np.random.Generator):
    """Overwrite ``n_bursts`` runs of ``burst_len`` ones per arm, in place.

    Runs are disjoint and separated by at least one slot, so two runs never
    merge into a longer all-one sequence.  Offsets are uniform over all such
    placements: each run is glued to its mandatory separator, which turns the
    placement into choosing ``n_bursts`` distinct items out of
    ``T + 1 - n_bursts * burst_len``.
    """
    if burst_len == 0 or n_bursts == 0:
        return
    K, T = losses.shape
    slack = T + 1 - n_bursts * (burst_len + 1)
    for k in range(K):
        picks = np.sort(rng.choice(slack + n_bursts, size=n_bursts, replace=False))
        starts = picks + np.arange(n_bursts) * burst_len
        for s in starts:
            losses[k, s : s + burst_len] = ATTACK


def _check_bursts(T: int, burst_len: int, n_bursts: int):
    if burst_len < 0 or n_bursts < 0:
        raise ValueError("burst_len and n_bursts must be non-negative")
    if burst_len > 0 and n_bursts > 0 and n_bursts * (burst_len + 1) > T + 1:
        raise ValueError(
            f"{n_bursts} separated bursts of length {burst_len} do not fit in T={T} "
            f"(need n_bursts * (burst_len + 1) <= T + 1)"
        )


def gen_burst_adversary(
    K: int,
    T: int,
    c_low: float,
    c_high: float,
    l_high: float,
    burst_len: int,
    n_bursts: int,
    seed: int,
) -> LossMatrix:
    """Non-stationary uniform losses with planted all-one bursts.

    Arm k draws ``c_k ~ U[c_low, c_high]`` then ``l_k(t) ~ U[c_k, l_high]``.
    """
    if K < 1 or T < 1:
        raise ValueError("K and T must be positive")
    if not 0.0 <= c_low <= c_high <= l_high <= 1.0:
        raise ValueError("need 0 <= c_low <= c_high <= l_high <= 1")
    _check_bursts(T, burst_len, n_bursts)
    rng = np.random.default_rng(seed)
    c = rng.uniform(c_low, c_high, size=K)
    losses = rng.uniform(c[:, None], l_high, size=(K, T))
    _plant_bursts(losses, burst_len, n_bursts, rng)
    label = f"burst(K={K},T={T},b={burst_len},n={n_bursts})"
    return LossMatrix(losses, label=label)


def gen_changepoint_adversary(
    K: int,
    T: int,
    means_before: Sequence[float],
    means_after: Sequence[float],
    t_change: int,
    halfwidth: float,
    burst_len: int,
    n_bursts: int,
    seed: int,
) -> LossMatrix:
    """Piecewise-stationary uniform losses around per-arm means.

    Slots ``1..t_change-1`` use ``means_before``; slots ``t_change..T`` use
    ``means_after``.  Bursts are planted as in :func:`gen_burst_adversary`.
    """
    if K < 1 or T < 1:
        raise ValueError("K and T must be positive")
    before = np.asarray(means_before, dtype=float)
    after = np.asarray(means_after, dtype=float)
    if before.shape != (K,) or after.shape != (K,):
        raise ValueError(f"means must have length K={K}")
    if not 1 <= t_change <= T:
        raise ValueError(f"t_change must lie in [1, {T}]")
    if halfwidth < 0:
        raise ValueError("halfwidth must be non-negative")
    for name, a in (("means_before", before), ("means_after", after)):
        if np.any(a - halfwidth < 0) or np.any(a + halfwidth > 1):
            raise ValueError(f"{name} +- halfwidth must stay inside [0, 1]")
    _check_bursts(T, burst_len, n_bursts)
    rng = np.random.default_rng(seed)
    cut = t_change - 1
    means = np.empty((K, T))
    means[:, :cut] = before[:, None]
    means[:, cut:] = after[:, None]
    losses = means + rng.uniform(-halfwidth, halfwidth, size=(K, T)) if halfwidth > 0 else means
    np.clip(losses, 0.0, 1.0, out=losses)
    _plant_bursts(losses, burst_len, n_bursts, rng)
    label = f"changepoint(K={K},T={T},t_change={t_change},b={burst_len},n={n_bursts})"
    return LossMatrix(losses, label=label)


# -------------------------------------------------------------- attackability


def _longest_run(row: np.ndarray) -> int:
    hits = np.concatenate(([0], (row == ATTACK).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(hits))
    if edges.size == 0:
        return 0
    return int((edges[1::2] - edges[0::2]).max())


def local_attackability(L: LossMatrix) -> int:
    """Longest run of consecutive loss-1 entries on any single arm."""
    return max(_longest_run(row) for row in L.losses)


def global_attackability(L: LossMatrix) -> int:
    """Largest per-arm count of loss-1 entries."""
    return int((L.losses == ATTACK).sum(axis=1).max())


def attackability(L: LossMatrix) -> AttackabilityProfile:
    return AttackabilityProfile(W=local_attackability(L), V=global_attackability(L))


def attack_exponent(count: int, T: int) -> float:
    """Smallest x with ``T**x >= count`` (0 when there is nothing to cover)."""
    if count <= 1 or T <= 1:
        return 0.0
    return float(np.log(count) / np.log(T))


# ------------------------------------------------------------ collision model


def step(L: LossMatrix, t: int, actions: Sequence[int]) -> tuple[list[Observation], list[bool]]:
    """Resolve one slot.

    Returns each player's :class:`Observation` and, separately, the
    ground-truth collision flags.  The flags are for diagnostics and must not
    be handed to agents.
    """
    K, T = L.losses.shape
    if not 1 <= t <= T:
        raise ValueError(f"slot {t} outside [1, {T}]")
    for a in actions:
        if not 1 <= a <= K:
            raise ValueError(f"arm {a} outside [1, {K}]")
    counts: dict[int, int] = {}
    for a in actions:
        counts[a] = counts.get(a, 0) + 1
    flags = [counts[a] > 1 for a in actions]
    obs = [
        Observation(arm=a, loss=1.0 if hit else float(L.losses[a - 1, t - 1]))
        for a, hit in zip(actions, flags)
    ]
    return obs, flags


def collision_mask(actions: np.ndarray) -> np.ndarray:
    """Boolean (t, M) mask: player m shares her arm with someone at slot t."""
    actions = np.asarray(actions)
    hit = np.zeros(actions.shape, dtype=bool)
    M = actions.shape[1]
    for i in range(M):
        for j in range(i + 1, M):
            same = actions[:, i] == actions[:, j]
            hit[:, i] |= same
            hit[:, j] |= same
    return hit


def realized_losses(L: LossMatrix, actions: np.ndarray) -> np.ndarray:
    """Per-slot, per-player received losses for a 1-based (t, M) action array."""
    actions = np.asarray(actions, dtype=np.int64)
    n = actions.shape[0]
    if n > L.horizon:
        raise ValueError("more action profiles than slots")
    if actions.size and (actions.min() < 1 or actions.max() > L.num_arms):
        raise ValueError("arm index out of range")
    rows = np.arange(n)[:, None]
    true = L.losses[actions - 1, rows]
    return np.where(collision_mask(actions), 1.0, true)


# --------------------------------------------------------------------- regret


def best_allocation_loss(L: LossMatrix, M: int, t: int | None = None) -> float:
    """Loss of the best assignment of M players to distinct arms over slots 1..t."""
    if not 1 <= M <= L.num_arms:
        raise ValueError(f"M={M} must lie in [1, K={L.num_arms}]")
    t = L.horizon if t is None else t
    cum = L.losses[:, :t].sum(axis=1)
    return float(np.sort(cum)[:M].sum())


def regret(
    L: LossMatrix,
    actions_per_slot: Iterable[Sequence[int]] | np.ndarray,
    M: int,
    checkpoints: Sequence[int] | None = None,
) -> np.ndarray:
    """Cumulative realized loss minus the best fixed allocation on each prefix.

    ``checkpoints`` are 1-based slot counts; by default every slot up to the
    number of supplied profiles is reported.
    """
    actions = np.asarray(list(actions_per_slot) if not isinstance(actions_per_slot, np.ndarray) else actions_per_slot)
    if actions.ndim != 2 or actions.shape[1] != M:
        raise ValueError(f"expected (t, {M}) action profiles")
    if not 1 <= M <= L.num_arms:
        raise ValueError(f"M={M} must lie in [1, K={L.num_arms}]")
    n = actions.shape[0]
    cps = np.arange(1, n + 1) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if cps.size and (cps.min() < 1 or cps.max() > n):
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    realized = np.cumsum(realized_losses(L, actions).sum(axis=1))
    arm_cum = np.cumsum(L.losses[:, :n], axis=1)[:, cps - 1]
    best = np.sort(arm_cum, axis=0)[:M].sum(axis=0)
    return realized[cps - 1] - best


def brute_force_regret(L: LossMatrix, actions: Sequence[Sequence[int]], M: int) -> float:
    """Regret over the supplied prefix by enumerating every allocation.

    Slow on purpose: a direct transcription of the definition used to check
    :func:`regret`.
    """
    n = len(actions)
    total = 0.0
    for t, profile in enumerate(actions, start=1):
        obs, _ = step(L, t, list(profile))
        total += sum(o.loss for o in obs)
    best = min(
        sum(float(L.losses[k, :n].sum()) for k in alloc)
        for alloc in combinations(range(L.num_arms), M)
    )
    return total - best


# ------------------------------------------------------------------------ io


def write_loss_csv(L: LossMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arm", "t", "loss"])
        for k in range(L.num_arms):
            for t in range(L.horizon):
                w.writerow([k + 1, t + 1, repr(float(L.losses[k, t]))])


def read_loss_csv(path: str | Path) -> LossMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["arm", "t", "loss"]:
            raise ValueError(f"bad header {header!r}, expected arm,t,loss")
        rows = [(int(a), int(t), float(v)) for a, t, v in reader]
    if not rows:
        raise ValueError("empty loss file")
    K = max(r[0] for r in rows)
    T = max(r[1] for r in rows)
    if len(rows) != K * T:
        raise ValueError(f"expected {K * T} rows for K={K}, T={T}, got {len(rows)}")
    losses = np.full((K, T), np.nan)
    for a, t, v in rows:
        losses[a - 1, t - 1] = v
    return LossMatrix(losses, label=Path(path).stem)
