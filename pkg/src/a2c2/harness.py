"""Episode simulation, Monte-Carlo regret aggregation, sync-failure probing
and closed-form regret-bound evaluation.

The simulator keeps one global clock.  Every agent is always inside a
segment (same arm for n slots), so the clock jumps to the next segment
boundary of any agent.  Within such a block the action profile is constant,
hence so are the collision flags.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import env
from .env import LossMatrix
from .protocol.agents import Agent, Exp3Agent, Kind, exp3_rate, make_agents

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# ------------------------------------------------------------------ traces


@dataclass
class RunTrace:
    """Ground truth of one episode.  Never handed to agents."""

    protocol: str
    M: int
    T: int
    actions: np.ndarray  # (T, M) arms, 1-based
    kinds: np.ndarray  # (T, M) Kind codes
    observed: np.ndarray  # (T, M) loss each player saw
    collisions: np.ndarray  # (T, M) bool
    comm_slots: np.ndarray  # per agent
    explore_slots: np.ndarray
    truncated_slots: np.ndarray
    final_estimates: list
    explore_collisions: int
    decode_errors: int
    sync_failures: int
    snapshots: list = field(default_factory=list)  # (t, player, snapshot dict)
    assignments: list = field(default_factory=list)  # leader's per-phase order
    decodes: list = field(default_factory=list)  # per follower: [(arm, set)]
    estimate_histories: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.actions.shape[0]

    def regret(self, L: LossMatrix, checkpoints: Sequence[int] | None = None) -> np.ndarray:
        return env.regret(L, self.actions, self.M, checkpoints)


def _count_decode_errors(leader: Agent, followers: Sequence[Agent]) -> int:
    errors = 0
    log = getattr(leader, "assignment_log", None)
    if log is None:
        return 0
    for f in followers:
        for order, (arm, _) in zip(log, f.decode_log):
            errors += int(order[f.player - 1] != arm)
    return errors


def _count_sync_failures(agents: Sequence[Agent]) -> int:
    hists = [a.decision_history for a in agents]
    n = min(len(h) for h in hists)
    return sum(1 for i in range(n) if len({h[i] for h in hists}) > 1)


def run_episode(
    protocol: str,
    adversary: LossMatrix,
    M: int,
    K: int,
    T: int,
    shared_seed: int = 0,
    private_seeds: Sequence[int] | None = None,
    params_inputs: dict | None = None,
    *,
    t_stop: int | None = None,
    snapshots: bool = False,
    fast: bool = True,
) -> RunTrace:
    """Play one episode of ``T`` slots (or the first ``t_stop``).

    Agents are built for horizon ``T`` but only the first ``t_stop`` slots of
    the loss matrix are played, which lets probes stop after one sync.
    """
    if adversary.num_arms != K:
        raise ValueError(f"loss matrix has {adversary.num_arms} arms, expected K={K}")
    n_slots = T if t_stop is None else t_stop
    if not 1 <= n_slots <= adversary.horizon:
        raise ValueError(f"cannot play {n_slots} slots of a {adversary.horizon}-slot loss matrix")
    agents = make_agents(protocol, M, K, T, params_inputs, shared_seed, private_seeds)
    if fast and protocol == "parallel_exp3" and numba is not None and not snapshots:
        return _run_exp3_fast(agents, adversary, n_slots)

    losses = adversary.losses
    actions = np.empty((n_slots, M), dtype=np.int16)
    kinds = np.empty((n_slots, M), dtype=np.int8)
    observed = np.empty((n_slots, M))
    collided = np.zeros((n_slots, M), dtype=bool)
    snaps: list = []
    last_phase = [None] * M

    t = 0
    while t < n_slots:
        n = min(min(a.remaining for a in agents), n_slots - t)
        arms = [a.arm for a in agents]
        if snapshots:
            for i, a in enumerate(agents):
                if a.phase != last_phase[i]:
                    snaps.append((t + 1, a.player, a.snapshot()))
                    last_phase[i] = a.phase
        actions[t : t + n] = arms
        kinds[t : t + n] = [int(a.kind) for a in agents]
        hit = [arms.count(x) > 1 for x in arms]
        collided[t : t + n] = hit
        for i, a in enumerate(agents):
            obs = np.ones(n) if hit[i] else losses[arms[i] - 1, t : t + n]
            observed[t : t + n, i] = obs
            a.feed(obs)
        t += n

    leader, followers = agents[0], agents[1:]
    return RunTrace(
        protocol=protocol,
        M=M,
        T=T,
        actions=actions,
        kinds=kinds,
        observed=observed,
        collisions=collided,
        comm_slots=np.array([a.comm_slots for a in agents]),
        explore_slots=np.array([a.explore_slots for a in agents]),
        truncated_slots=np.array([a.truncated_slots for a in agents]),
        final_estimates=[a.estimate for a in agents],
        explore_collisions=int(np.count_nonzero(collided & (kinds == Kind.EXPLORE))),
        decode_errors=_count_decode_errors(leader, followers),
        sync_failures=_count_sync_failures(agents),
        snapshots=snaps,
        assignments=list(getattr(leader, "assignment_log", [])),
        decodes=[list(getattr(f, "decode_log", [])) for f in followers],
        estimate_histories=[list(a.estimate_history) for a in agents],
    )


# ------------------------------------------------ compiled EXP3 baseline

if numba is not None:

    @numba.njit(cache=True)
    def _exp3_kernel(losses, uniforms, eta, actions, observed, collided):
        n_slots, M = actions.shape
        K = losses.shape[0]
        est = np.zeros((M, K))
        q = np.empty(K)
        for t in range(n_slots):
            for m in range(M):
                lo = est[m, 0]
                for k in range(1, K):
                    if est[m, k] < lo:
                        lo = est[m, k]
                s = 0.0
                for k in range(K):
                    q[k] = math.exp(-eta * (est[m, k] - lo))
                    s += q[k]
                u = uniforms[m, t] * s
                arm = K - 1
                acc = 0.0
                for k in range(K):
                    acc += q[k]
                    if u < acc:
                        arm = k
                        break
                actions[t, m] = arm + 1
                observed[t, m] = q[arm] / s  # stash p(arm); replaced by the loss below
            for m in range(M):
                hit = False
                for j in range(M):
                    if j != m and actions[t, j] == actions[t, m]:
                        hit = True
                collided[t, m] = hit
                arm = actions[t, m] - 1
                loss = 1.0 if hit else losses[arm, t]
                p = observed[t, m]
                observed[t, m] = loss
                est[m, arm] += loss / p
        return est


def _run_exp3_fast(agents: list[Exp3Agent], L: LossMatrix, n_slots: int) -> RunTrace:
    M = len(agents)
    eta = agents[0].eta
    # the generic path draws one uniform per slot from each agent's own stream
    uniforms = np.stack([np.random.default_rng(a.rng.bit_generator.seed_seq).random(n_slots) for a in agents])
    actions = np.empty((n_slots, M), dtype=np.int16)
    observed = np.empty((n_slots, M))
    collided = np.empty((n_slots, M), dtype=np.bool_)
    _exp3_kernel(np.ascontiguousarray(L.losses), uniforms, eta, actions, observed, collided)
    ones = np.full(M, n_slots)
    return RunTrace(
        protocol="parallel_exp3",
        M=M,
        T=agents[0].T,
        actions=actions,
        kinds=np.zeros((n_slots, M), dtype=np.int8),
        observed=observed,
        collisions=collided,
        comm_slots=np.zeros(M, dtype=int),
        explore_slots=ones,
        truncated_slots=np.zeros(M, dtype=int),
        final_estimates=[None] * M,
        explore_collisions=int(np.count_nonzero(collided)),
        decode_errors=0,
        sync_failures=0,
    )


# -------------------------------------------------------------- adversaries


ADVERSARIES = ("burst", "changepoint", "zero", "file")


def build_adversary(name: str, params: dict, K: int, T: int, seed: int) -> LossMatrix:
    p = dict(params)
    if name == "burst":
        return env.gen_burst_adversary(K, T, seed=seed, **p)
    if name == "changepoint":
        return env.gen_changepoint_adversary(K, T, seed=seed, **p)
    if name == "zero":
        return LossMatrix(np.zeros((K, T)), label="zero")
    if name == "file":
        L = env.read_loss_csv(p["path"])
        if L.num_arms != K or L.horizon < T:
            raise ValueError(f"{p['path']} holds a {L.num_arms}x{L.horizon} matrix, need {K}x{T}")
        return LossMatrix(L.losses[:, :T], label=str(p["path"]))
    raise ValueError(f"unknown adversary {name!r}; choose from {ADVERSARIES}")


def resolve_inputs(protocol: str, inputs: dict, L: LossMatrix) -> dict:
    """Replace ``"auto"`` attack parameters by the exponents measured on L."""
    out = dict(inputs)
    prof = env.attackability(L)
    if out.get("alpha") == "auto":
        out["alpha"] = min(env.attack_exponent(prof.W, L.horizon), 1.0)
    if out.get("beta") == "auto":
        out["beta"] = min(env.attack_exponent(prof.V, L.horizon), 1.0)
    return out


# -------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to replay a batch of runs of one protocol."""

    protocol: str
    M: int
    K: int
    T: int
    adversary: str = "burst"
    adversary_params: dict = field(default_factory=dict)
    params_inputs: dict = field(default_factory=dict)
    runs: int = 1
    seed: int = 0
    checkpoints: tuple[int, ...] = ()
    seeds: tuple[int, ...] | None = None  # explicit per-run seeds override `seed`
    workers: int = 1
    environment: str = ""

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        children = np.random.SeedSequence(self.seed).spawn(self.runs)
        return [int(c.generate_state(1, np.uint32)[0]) for c in children]

    def resolved_checkpoints(self) -> tuple[int, ...]:
        return tuple(self.checkpoints) if self.checkpoints else (self.T,)


@dataclass(frozen=True)
class RunResult:
    run_id: int
    seed: int
    checkpoints: tuple[int, ...]
    cum_regret: tuple[float, ...]
    final_estimate: float | None
    comm_slots: int
    explore_collisions: int
    sync_failures: int
    decode_errors: int


@dataclass
class RegretReport:
    protocol: str
    environment: str
    checkpoints: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    n_runs: int
    runs: list[RunResult]


def _run_one(spec: RunSpec, run_id: int, seed: int) -> RunResult:
    ss = np.random.SeedSequence(seed)
    env_ss, shared_ss, *private_ss = ss.spawn(2 + spec.M)
    as_int = lambda s: int(s.generate_state(1, np.uint64)[0])  # noqa: E731
    L = build_adversary(spec.adversary, spec.adversary_params, spec.K, spec.T, as_int(env_ss))
    inputs = resolve_inputs(spec.protocol, spec.params_inputs, L)
    trace = run_episode(
        spec.protocol,
        L,
        spec.M,
        spec.K,
        spec.T,
        as_int(shared_ss),
        [as_int(s) for s in private_ss],
        inputs,
    )
    cps = spec.resolved_checkpoints()
    reg = trace.regret(L, cps)
    est = trace.final_estimates[0]
    if est is None:
        est = inputs.get("alpha", inputs.get("beta"))
    return RunResult(
        run_id=run_id,
        seed=seed,
        checkpoints=cps,
        cum_regret=tuple(float(x) for x in reg),
        final_estimate=None if est is None else float(est),
        comm_slots=int(trace.comm_slots[0]),
        explore_collisions=trace.explore_collisions,
        sync_failures=trace.sync_failures,
        decode_errors=trace.decode_errors,
    )


def _run_star(args):
    return _run_one(*args)


def monte_carlo(spec: RunSpec) -> RegretReport:
    if spec.runs < 1 and spec.seeds is None:
        raise ValueError("need at least one run")
    cps = spec.resolved_checkpoints()
    if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1 or cps[-1] > spec.T:
        raise ValueError(f"checkpoints must be strictly increasing within [1, {spec.T}]")
    jobs = [(spec, i, s) for i, s in enumerate(spec.run_seeds())]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_star, jobs))
    else:
        results = [_run_one(*j) for j in jobs]
    R = np.array([r.cum_regret for r in results])
    return RegretReport(
        protocol=spec.protocol,
        environment=spec.environment or spec.adversary,
        checkpoints=cps,
        mean=R.mean(axis=0),
        std=R.std(axis=0),
        n_runs=len(results),
        runs=results,
    )


RUN_COLUMNS = (
    "protocol",
    "environment",
    "run_id",
    "seed",
    "checkpoint_t",
    "cum_regret",
    "final_estimate",
    "comm_slots",
    "explore_collisions",
    "sync_failures",
)
AGGREGATE_COLUMNS = ("protocol", "environment", "checkpoint_t", "mean_regret", "std_regret", "n_runs")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def run_rows(report: RegretReport) -> list[list[str]]:
    rows = []
    for r in report.runs:
        for t, reg in zip(r.checkpoints, r.cum_regret):
            rows.append(
                [
                    report.protocol,
                    report.environment,
                    r.run_id,
                    r.seed,
                    t,
                    reg,
                    r.final_estimate,
                    r.comm_slots,
                    r.explore_collisions,
                    r.sync_failures,
                ]
            )
    return [[_fmt(x) for x in row] for row in rows]


def aggregate_rows(report: RegretReport) -> list[list[str]]:
    return [
        [_fmt(x) for x in (report.protocol, report.environment, t, float(m), float(s), report.n_runs)]
        for t, m, s in zip(report.checkpoints, report.mean, report.std)
    ]


def write_reports(reports: Sequence[RegretReport], run_path, aggregate_path) -> None:
    for path, header, rows in (
        (run_path, RUN_COLUMNS, run_rows),
        (aggregate_path, AGGREGATE_COLUMNS, aggregate_rows),
    ):
        if path is None:
            continue
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for rep in reports:
                w.writerows(rows(rep))


# ------------------------------------------------------------ sync probe


def sync_probe_matrix(M: int, K: int, T: int, start: float, target_round: int, follower: int = 2):
    """Zero losses except ones on ``follower``'s arm during its downlink
    window of ``target_round`` in the first alpha-unaware sync.

    Returns the matrix and the last slot of the longest possible sync.
    """
    from .protocol.params import params_alpha_unaware, sync_rounds_max

    P = params_alpha_unaware(M, K, T, start)
    n_max = sync_rounds_max(P.xi, T)
    if not 1 <= target_round <= n_max:
        raise ValueError(f"target round must lie in [1, {n_max}]")
    if not 2 <= follower <= M:
        raise ValueError("target must be a follower")
    t0 = (M - 1) * K * P.h  # assignment length; sync starts right after
    t_end = t0 + n_max * M * P.h
    losses = np.zeros((K, max(T, t_end)))
    a = t0 + (target_round - 1) * M * P.h + P.h + (follower - 2) * P.h
    losses[follower - 1, a : a + P.h] = 1.0
    return LossMatrix(losses, label="sync-probe"), t_end


def sync_failure_probe(
    M: int,
    K: int,
    T: int,
    n_trials: int,
    *,
    start: float = 0.0,
    eps: float = 0.01,
    target_round: int | str | None = "last",
    seed: int = 0,
) -> float:
    """Fraction of trials in which the alpha-unaware agents leave the first
    sync with different escalation decisions (hence different estimates
    below the cap) when one follower's downlink in one round is hit.

    ``target_round`` is a 1-based round index, ``"last"`` for the last
    possible round, or None for no attack.
    """
    from .protocol.params import params_alpha_unaware, sync_rounds_max

    P = params_alpha_unaware(M, K, T, start)
    n_max = sync_rounds_max(P.xi, T)
    q = n_max if target_round == "last" else (target_round or 1)
    L, t_end = sync_probe_matrix(M, K, T, start, q)
    if target_round is None:
        L = LossMatrix(np.zeros_like(L.losses), label="no-attack")
    fails = 0
    for child in np.random.SeedSequence(seed).spawn(n_trials):
        shared, *private = (int(x) for x in child.generate_state(1 + M, np.uint32))
        agents = make_agents("alpha_unaware", M, K, T, {"eps": eps, "start": start}, shared, private)
        _drive(agents, L, t_end)
        # the decision bit, not the estimate, so a split is visible even at the cap
        decisions = {a.decision_history[0] if a.decision_history else None for a in agents}
        fails += len(decisions) > 1
    return fails / n_trials


def _drive(agents: Sequence[Agent], L: LossMatrix, n_slots: int) -> None:
    """Bare event loop without trace recording."""
    losses = L.losses
    t = 0
    while t < n_slots:
        n = min(min(a.remaining for a in agents), n_slots - t)
        arms = [a.arm for a in agents]
        for a, x in zip(agents, arms):
            a.feed(np.ones(n) if arms.count(x) > 1 else losses[x - 1, t : t + n])
        t += n


# ---------------------------------------------------------- theory bounds


MODELS = ("centralized", "alpha_aware", "beta_aware", "alpha_unaware", "beta_unaware", "no_sensing_reference")


def bound_exponent(model: str, M: int, attack_param: float = 0.0, eps: float = 0.01) -> float:
    """Exponent of T in the regret bound of ``model``."""
    a = attack_param
    if model == "centralized":
        return 0.5
    if model == "alpha_aware":
        return (2 + a + eps) / 3
    if model == "beta_aware":
        return max((1 + a) / 2, 2 / 3)
    if model == "alpha_unaware":
        return (5 + a + eps) / 6
    if model == "beta_unaware":
        return max((2 + a + eps) / 3, 3 / 4)
    if model == "no_sensing_reference":
        return 1 - 1 / (2 * M)
    raise ValueError(f"unknown model {model!r}; choose from {MODELS}")


def theory_bound(model: str, M: int, K: int, T: float, attack_param: float = 0.0, eps: float = 0.01) -> float:
    """Regret bound with unit constants and log factors dropped."""
    if M < 1 or K < 1 or T < 1:
        raise ValueError("M, K, T must be positive")
    if not 0.0 <= attack_param <= 1.0:
        raise ValueError("attack parameter must lie in [0, 1]")
    prefactor = {
        "centralized": M**0.5 * K**0.5,
        "alpha_aware": M ** (4 / 3) * K ** (1 / 3),
        "beta_aware": M**2 * K ** (2 / 3),
        "alpha_unaware": M ** (4 / 3) * K ** (1 / 3),
        "beta_unaware": M**2 * K ** (1 / 3),
        "no_sensing_reference": M * K**1.5,
    }
    e = bound_exponent(model, M, attack_param, eps)
    return prefactor[model] * float(T) ** e


def write_rows(path, header: Sequence[str], rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
