"""Decentralized leader/follower agents for the four A2C2 protocols and the
parallel-EXP3 baseline.

Each agent is a generator-backed state machine.  The generator yields
segments ``(arm, n_slots, kind)``: "pull this arm for the next n slots".  It
is resumed with the n losses the player received on those slots, and with
nothing else.  This matches how the protocols are written ("stay on arm x
for tau steps", "receive h bits") and lets the simulator fast-forward
through long segments.  :meth:`Agent.step` offers the plain per-slot view on
top of the same machine.

Player m's communication arm is arm m; player 1 leads.  A player that is not
transmitting a 1 keeps pulling her own communication arm.
"""

from __future__ import annotations

import math
from enum import IntEnum
from itertools import groupby
from typing import Iterator, Sequence

import numpy as np

from ..codec import e_decode, e_encode, index_width, r_decode, r_encode, r_encode_index, received_bits
from ..env import Observation
from ..selector import EstimatorState, marginal, sample_meta_arm, update_estimator, weights_from_estimates
from .params import (
    BETA_FLOOR,
    ProtocolParams,
    ceil_pow,
    params_alpha_aware,
    params_alpha_unaware,
    params_beta_aware,
    params_beta_unaware,
    sync_round_count,
)


class Kind(IntEnum):
    EXPLORE = 0
    ASSIGN = 1
    UPLINK = 2
    DOWNLINK = 3


PROTOCOLS = ("alpha_aware", "beta_aware", "alpha_unaware", "beta_unaware", "parallel_exp3")

Segment = tuple[int, int, Kind]
Program = Iterator[Segment]


class Agent:
    """One player.  Subclasses implement :meth:`_program`."""

    protocol = "abstract"

    def __init__(self, player: int, M: int, K: int, T: int, shared_seed: int, private_seed: int):
        if not 1 <= player <= M:
            raise ValueError(f"player {player} outside [1, {M}]")
        self.player = player
        self.role = "leader" if player == 1 else "follower"
        self.M, self.K, self.T = M, K, T
        self.comm_arm = player
        self.rng = np.random.default_rng(private_seed)
        self.shared_rng = np.random.default_rng(shared_seed)

        self.phase = 0
        self.assigned_arm: int | None = None
        self.estimate: float | None = None
        self.estimate_history: list[float] = []
        self.decision_history: list[int] = []  # escalation bit agreed at each sync
        self.comm_slots = 0
        self.explore_slots = 0
        self.slots_seen = 0
        self.clock = 0  # last slot handed out through agent_step

        self._prog = self._program()
        self._seg: Segment = next(self._prog)
        self._buf: list[np.ndarray] = []
        self._filled = 0

    def _program(self) -> Program:
        raise NotImplementedError
        yield  # pragma: no cover

    # -- segment interface used by the simulator

    @property
    def arm(self) -> int:
        return self._seg[0]

    @property
    def kind(self) -> Kind:
        return self._seg[2]

    @property
    def remaining(self) -> int:
        return self._seg[1] - self._filled

    @property
    def truncated_slots(self) -> int:
        """Slots spent in the current, unfinished segment."""
        return self._filled

    def feed(self, losses: np.ndarray) -> None:
        """Deliver the player's own losses for the next ``len(losses)`` slots."""
        n = len(losses)
        if n == 0:
            return
        if n > self.remaining:
            raise ValueError(f"fed {n} losses but only {self.remaining} slots remain in the segment")
        self.slots_seen += n
        if self._filled == 0 and n == self._seg[1]:
            chunk = losses
        else:
            self._buf.append(np.asarray(losses, dtype=np.float64))
            self._filled += n
            if self._filled < self._seg[1]:
                return
            chunk = np.concatenate(self._buf)
            self._buf.clear()
            self._filled = 0
        if self._seg[2] == Kind.EXPLORE:
            self.explore_slots += len(chunk)
        else:
            self.comm_slots += len(chunk)
        self._seg = self._prog.send(chunk)

    # -- per-slot interface

    def step(self, last_obs: Observation | None) -> int:
        """Consume last slot's own observation (None at t=1) and return the next arm."""
        if last_obs is not None:
            if type(last_obs) is not Observation:
                raise TypeError("agents only accept env.Observation (arm, loss)")
            if last_obs.arm != self.arm:
                raise ValueError(f"observation for arm {last_obs.arm}, but arm {self.arm} was pulled")
            self.feed(np.array([last_obs.loss]))
        elif self.slots_seen:
            raise ValueError("missing observation after the first slot")
        return self.arm

    def snapshot(self) -> dict:
        return {
            "protocol": self.protocol,
            "player": self.player,
            "role": self.role,
            "phase": self.phase,
            "kind": self.kind.name.lower(),
            "estimate": self.estimate,
            "assigned_arm": self.assigned_arm,
            "comm_slots": self.comm_slots,
            "explore_slots": self.explore_slots,
        }

    # -- helpers for subclasses

    def _transmit(self, messages: Sequence[tuple[int, Sequence[int]]], kind: Kind) -> Program:
        """Send each (receiver, bits) in turn: bit 1 = pull receiver's arm."""
        arms = [rx if b else self.comm_arm for rx, bits in messages for b in bits]
        for arm, run in groupby(arms):
            yield (arm, sum(1 for _ in run), kind)

    def _listen(self, n_slots: int, kind: Kind) -> Iterator:
        return (yield (self.comm_arm, n_slots, kind))

    def _window(self, losses: np.ndarray, length: int) -> np.ndarray:
        """This follower's slice of a sequential transmission to players 2..M."""
        start = (self.player - 2) * length
        return received_bits(losses[start : start + length])


class _Leader(Agent):
    def __init__(self, *args, **kwargs):
        self.estimator = EstimatorState.zeros(args[2])
        self.assignment_log: list[tuple[int, ...]] = []
        self.flag = 0
        super().__init__(*args, **kwargs)

    def _select(self, eta: float):
        w = weights_from_estimates(self.estimator, eta)
        meta = sample_meta_arm(w, self.M, self.rng)
        order = tuple(int(a) for a in self.rng.permutation(meta.arms))
        self.assignment_log.append(order)
        self.assigned_arm = order[0]
        return meta, order, marginal(w, self.M, order[0])

    def _learn(self, meta, order, losses: np.ndarray, tau: int, marg: float, success: int):
        self.estimator = update_estimator(
            self.estimator, meta, order[0], float(np.sum(losses)), tau, marg, self.M, success
        )

    def snapshot(self) -> dict:
        snap = super().snapshot()
        snap["flag"] = self.flag
        snap["cum_est"] = [float(x) for x in self.estimator.cum_est]
        return snap


class _Follower(Agent):
    def __init__(self, *args, **kwargs):
        self.decode_log: list[tuple[int, frozenset[int]]] = []
        self.decoded_set: frozenset[int] = frozenset()
        self.flag = 0
        super().__init__(*args, **kwargs)

    def _pick(self, S: set[int]) -> int:
        """Choose an arm from the decoded set; an empty set counts as an error."""
        options = sorted(S) if S else list(range(1, self.K + 1))
        arm = int(options[self.rng.integers(len(options))]) if len(options) > 1 else options[0]
        self.decoded_set = frozenset(S)
        self.decode_log.append((arm, self.decoded_set))
        self.assigned_arm = arm
        return arm

    def snapshot(self) -> dict:
        snap = super().snapshot()
        snap["flag"] = self.flag
        snap["decoded_set"] = sorted(self.decoded_set)
        return snap


# ------------------------------------------------------------ alpha-aware


class AlphaAwareLeader(_Leader):
    protocol = "alpha_aware"

    def __init__(self, *args, params: ProtocolParams, **kwargs):
        self.params = params
        super().__init__(*args, **kwargs)

    def _program(self):
        P, M, K = self.params, self.M, self.K
        for p in range(1, 2**62):
            self.phase = p
            meta, order, marg = self._select(P.eta)
            msgs = [(m, r_encode_index(order[m - 1], K, P.h)) for m in range(2, M + 1)]
            yield from self._transmit(msgs, Kind.ASSIGN)
            losses = yield (order[0], P.tau, Kind.EXPLORE)
            self._learn(meta, order, losses, P.tau, marg, 1)


class AlphaAwareFollower(_Follower):
    protocol = "alpha_aware"

    def __init__(self, *args, params: ProtocolParams, **kwargs):
        self.params = params
        self.clamped = 0
        super().__init__(*args, **kwargs)

    def _program(self):
        P, M, K = self.params, self.M, self.K
        width = index_width(K) * P.h
        for p in range(1, 2**62):
            self.phase = p
            losses = yield from self._listen((M - 1) * width, Kind.ASSIGN)
            blocks = self._window(losses, width).reshape(-1, P.h).all(axis=1)
            value = 0
            for b in blocks:
                value = (value << 1) | int(b)
            if value >= K:
                self.clamped += 1
            arm = self._pick({min(value + 1, K)})
            yield (arm, P.tau, Kind.EXPLORE)


# ------------------------------------------------------------- beta-aware


class BetaAwareLeader(_Leader):
    protocol = "beta_aware"

    def __init__(self, *args, params: ProtocolParams, **kwargs):
        self.params = params
        super().__init__(*args, **kwargs)

    def _program(self):
        P, M, K = self.params, self.M, self.K
        for p in range(1, 2**62):
            self.phase = p
            meta, order, marg = self._select(P.eta)
            msgs = [(m, e_encode(order[m - 1], K, P.k_code)) for m in range(2, M + 1)]
            yield from self._transmit(msgs, Kind.ASSIGN)
            losses = yield from self._listen(P.k_code, Kind.UPLINK)
            self.flag = r_decode(received_bits(losses))
            losses = yield (order[0], P.tau, Kind.EXPLORE)
            self._learn(meta, order, losses, P.tau, marg, 1 - self.flag)


class BetaAwareFollower(_Follower):
    protocol = "beta_aware"

    def __init__(self, *args, params: ProtocolParams, **kwargs):
        self.params = params
        super().__init__(*args, **kwargs)

    def _program(self):
        P, M, K = self.params, self.M, self.K
        block = K * P.k_code
        for p in range(1, 2**62):
            self.phase = p
            losses = yield from self._listen((M - 1) * block, Kind.ASSIGN)
            S = e_decode(self._window(losses, block), K, P.k_code)
            arm = self._pick(S)
            self.flag = int(len(S) != 1)
            yield from self._transmit([(1, r_encode(self.flag, P.k_code))], Kind.UPLINK)
            yield (arm, P.tau, Kind.EXPLORE)


# ---------------------------------------------------------- alpha-unaware


class _AlphaUnaware:
    protocol = "alpha_unaware"
    eps: float

    start: float

    def _alpha(self) -> float:
        return min(self.start + self.level * self.eps, 1.0)

    def _schedule(self) -> ProtocolParams:
        self.estimate = self._alpha()
        return params_alpha_unaware(self.M, self.K, self.T, self.estimate, self.eps)

    def _escalate(self, F: int):
        self.decision_history.append(F)
        if F and self._alpha() < 1.0:
            self.level += 1
        self.estimate = self._alpha()
        self.estimate_history.append(self.estimate)


class AlphaUnawareLeader(_AlphaUnaware, _Leader):
    def __init__(self, *args, eps: float, start: float = 0.0, **kwargs):
        self.eps, self.start = eps, start
        self.level = 0
        super().__init__(*args, **kwargs)

    def _program(self):
        M, K, T = self.M, self.K, self.T
        for p in range(1, 2**62):
            self.phase = p
            P = self._schedule()
            self.flag = F = 0
            meta, order, marg = self._select(P.eta)
            msgs = [(m, e_encode(order[m - 1], K, P.h)) for m in range(2, M + 1)]
            yield from self._transmit(msgs, Kind.ASSIGN)
            for _ in range(sync_round_count(P.xi, T, self.shared_rng)):
                losses = yield from self._listen(P.h, Kind.UPLINK)
                F = r_decode(received_bits(losses))
                down = [(m, r_encode(F, P.h)) for m in range(2, M + 1)]
                yield from self._transmit(down, Kind.DOWNLINK)
            self.flag = F
            self._escalate(F)
            losses = yield (order[0], P.tau, Kind.EXPLORE)
            self._learn(meta, order, losses, P.tau, marg, 1 - F)


class AlphaUnawareFollower(_AlphaUnaware, _Follower):
    def __init__(self, *args, eps: float, start: float = 0.0, **kwargs):
        self.eps, self.start = eps, start
        self.level = 0
        super().__init__(*args, **kwargs)

    def _program(self):
        M, K, T = self.M, self.K, self.T
        for p in range(1, 2**62):
            self.phase = p
            P = self._schedule()
            block = K * P.h
            losses = yield from self._listen((M - 1) * block, Kind.ASSIGN)
            S = e_decode(self._window(losses, block), K, P.h)
            arm = self._pick(S)
            F = int(len(S) != 1)
            for _ in range(sync_round_count(P.xi, T, self.shared_rng)):
                yield from self._transmit([(1, r_encode(F, P.h))], Kind.UPLINK)
                losses = yield from self._listen((M - 1) * P.h, Kind.DOWNLINK)
                # once raised, the flag stays raised for the rest of the sync
                F = max(F, r_decode(self._window(losses, P.h)))
            self.flag = F
            self._escalate(F)
            yield (arm, P.tau, Kind.EXPLORE)


# ----------------------------------------------------------- beta-unaware


class _BetaUnaware:
    protocol = "beta_unaware"
    eps: float

    def _init_counters(self, eps: float, start: float):
        self.eps, self.start = eps, start
        self.level = 0
        self.rounds = 0  # R: phases since the last update point
        self.attacks = 0  # C: counted attacks on this player's link
        self.flag2 = 0

    def _beta(self) -> float:
        return min(self.start + self.level * self.eps, 1.0)

    def _schedule(self) -> ProtocolParams:
        self.estimate = self._beta()
        return params_beta_unaware(self.M, self.K, self.T, self.estimate, self.eps)

    def _update_due(self, P: ProtocolParams) -> bool:
        return self.rounds >= math.ceil(ceil_pow(self.T, self.estimate) / P.k_code)

    def _over_budget(self) -> int:
        return int(self.attacks >= ceil_pow(self.T, self.estimate))

    def _escalate(self, F2: int):
        self.decision_history.append(F2)
        if F2 and self._beta() < 1.0:
            self.level += 1
        self.rounds = 0
        self.estimate = self._beta()
        self.estimate_history.append(self.estimate)

    def snapshot(self) -> dict:
        snap = super().snapshot()
        snap.update(rounds=self.rounds, attacks=self.attacks, flag2=self.flag2)
        return snap


class BetaUnawareLeader(_BetaUnaware, _Leader):
    def __init__(self, *args, eps: float, start: float = BETA_FLOOR, **kwargs):
        self._init_counters(eps, start)
        super().__init__(*args, **kwargs)

    def _program(self):
        M, K, T = self.M, self.K, self.T
        for p in range(1, 2**62):
            self.phase = p
            P = self._schedule()
            self.flag = 0
            self.rounds += 1
            meta, order, marg = self._select(P.eta)
            msgs = [(m, e_encode(order[m - 1], K, P.k_code)) for m in range(2, M + 1)]
            yield from self._transmit(msgs, Kind.ASSIGN)
            losses = yield from self._listen(P.k_code, Kind.UPLINK)
            self.flag = r_decode(received_bits(losses))
            self.attacks += self.flag * P.k_code
            if self._update_due(P):
                F2 = self._over_budget()
                for _ in range(sync_round_count(P.xi, T, self.shared_rng)):
                    down = [(m, r_encode(F2, P.sync_len)) for m in range(2, M + 1)]
                    yield from self._transmit(down, Kind.DOWNLINK)
                    losses = yield from self._listen(P.sync_len, Kind.UPLINK)
                    F2 = r_decode(received_bits(losses))
                self.flag2 = F2
                self._escalate(F2)
            losses = yield (order[0], P.tau, Kind.EXPLORE)
            self._learn(meta, order, losses, P.tau, marg, 1 - self.flag)


class BetaUnawareFollower(_BetaUnaware, _Follower):
    def __init__(self, *args, eps: float, start: float = BETA_FLOOR, **kwargs):
        self._init_counters(eps, start)
        super().__init__(*args, **kwargs)

    def _program(self):
        M, K, T = self.M, self.K, self.T
        for p in range(1, 2**62):
            self.phase = p
            P = self._schedule()
            self.rounds += 1
            block = K * P.k_code
            losses = yield from self._listen((M - 1) * block, Kind.ASSIGN)
            S = e_decode(self._window(losses, block), K, P.k_code)
            arm = self._pick(S)
            self.flag = int(len(S) != 1)
            self.attacks += max(len(S) - 1, 0) * P.k_code
            yield from self._transmit([(1, r_encode(self.flag, P.k_code))], Kind.UPLINK)
            if self._update_due(P):
                F2 = self._over_budget()
                for _ in range(sync_round_count(P.xi, T, self.shared_rng)):
                    losses = yield from self._listen((M - 1) * P.sync_len, Kind.DOWNLINK)
                    F2 = max(F2, r_decode(self._window(losses, P.sync_len)))
                    yield from self._transmit([(1, r_encode(F2, P.sync_len))], Kind.UPLINK)
                self.flag2 = F2
                self._escalate(F2)
            yield (arm, P.tau, Kind.EXPLORE)


# ------------------------------------------------------- parallel EXP3


def exp3_rate(K: int, T: int) -> float:
    return math.sqrt(2.0 * math.log(K) / (K * T)) if K > 1 else 0.0


class Exp3Agent(Agent):
    """Single-player EXP3 on the player's own (collision-corrupted) losses."""

    protocol = "parallel_exp3"

    def __init__(self, *args, eta: float | None = None, **kwargs):
        M, K, T = args[1], args[2], args[3]
        self.eta = exp3_rate(K, T) if eta is None else eta
        self.loss_est = [0.0] * K
        super().__init__(*args, **kwargs)
        self.role = "independent"

    def probabilities(self) -> np.ndarray:
        lo = min(self.loss_est)
        q = np.array([math.exp(-self.eta * (x - lo)) for x in self.loss_est])
        return q / q.sum()

    def _program(self):
        K, eta, est = self.K, self.eta, self.loss_est
        q = [0.0] * K
        while True:
            self.phase += 1
            lo = min(est)
            s = 0.0
            for k in range(K):
                q[k] = math.exp(-eta * (est[k] - lo))
                s += q[k]
            u = self.rng.random() * s
            arm = K - 1
            acc = 0.0
            for k in range(K):
                acc += q[k]
                if u < acc:
                    arm = k
                    break
            self.assigned_arm = arm + 1
            losses = yield (arm + 1, 1, Kind.EXPLORE)
            est[arm] += losses[0] / (q[arm] / s)


# ---------------------------------------------------------------- factory


def make_agents(
    protocol: str,
    M: int,
    K: int,
    T: int,
    params_inputs: dict | None = None,
    shared_seed: int = 0,
    private_seeds: Sequence[int] | None = None,
) -> list[Agent]:
    """Build the M agents of one run.

    ``params_inputs`` carries ``alpha`` and ``eps`` (alpha-aware), ``beta``
    (beta-aware) or ``eps`` (unaware variants, default 0.01) plus an optional
    starting estimate ``start`` (0 for alpha, 1/4 for beta).
    """
    inputs = dict(params_inputs or {})
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    if protocol == "parallel_exp3":
        if not 1 <= M <= K:
            raise ValueError(f"need 1 <= M <= K, got M={M}, K={K}")
    elif M < 2 or M > K:
        raise ValueError(f"{protocol} needs 2 <= M <= K, got M={M}, K={K}")
    if private_seeds is None:
        private_seeds = [shared_seed * 1_000_003 + m for m in range(1, M + 1)]
    if len(private_seeds) != M:
        raise ValueError("need one private seed per player")
    base = lambda m: (m, M, K, T, shared_seed, private_seeds[m - 1])  # noqa: E731

    if protocol == "parallel_exp3":
        return [Exp3Agent(*base(m), eta=inputs.get("eta")) for m in range(1, M + 1)]
    if protocol == "alpha_aware":
        P = params_alpha_aware(M, K, T, inputs["alpha"], inputs.get("eps", 0.01))
        return [AlphaAwareLeader(*base(1), params=P)] + [
            AlphaAwareFollower(*base(m), params=P) for m in range(2, M + 1)
        ]
    if protocol == "beta_aware":
        P = params_beta_aware(M, K, T, inputs["beta"])
        return [BetaAwareLeader(*base(1), params=P)] + [
            BetaAwareFollower(*base(m), params=P) for m in range(2, M + 1)
        ]
    eps = inputs.get("eps", 0.01)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if protocol == "alpha_unaware":
        kw = dict(eps=eps, start=inputs.get("start", 0.0))
        return [AlphaUnawareLeader(*base(1), **kw)] + [
            AlphaUnawareFollower(*base(m), **kw) for m in range(2, M + 1)
        ]
    kw = dict(eps=eps, start=inputs.get("start", BETA_FLOOR))
    return [BetaUnawareLeader(*base(1), **kw)] + [
        BetaUnawareFollower(*base(m), **kw) for m in range(2, M + 1)
    ]


def baseline_parallel_exp3(M: int, K: int, T: int, seeds: Sequence[int]) -> list[Agent]:
    return make_agents("parallel_exp3", M, K, T, private_seeds=list(seeds))


def agent_step(agent: Agent, last_obs: Observation | None, t: int) -> tuple[int, Agent]:
    """Per-slot view: feed slot t-1's own observation, get the arm for slot t."""
    expected = agent.clock + 1
    if t != expected:
        raise ValueError(f"agent is at slot {expected}, asked for slot {t}")
    if (t == 1) != (last_obs is None):
        raise ValueError("exactly the first slot has no previous observation")
    arm = agent.step(last_obs)
    agent.clock = t
    return arm, agent
