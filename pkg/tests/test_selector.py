import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from a2c2.selector import (
    EstimatorState,
    MetaArm,
    WeightVector,
    elementary_symmetric,
    marginal,
    marginals,
    sample_meta_arm,
    sample_meta_arms,
    update_estimator,
    weights_from_estimates,
)


def subset_probs(w, M):
    subsets = list(itertools.combinations(range(1, len(w) + 1), M))
    mass = np.array([math.prod(w[k - 1] for k in A) for A in subsets])
    return subsets, mass / mass.sum()


def test_esp_small_example():
    # e_0..e_2 of (1, 2, 3) = 1, 6, 11
    assert elementary_symmetric([1, 2, 3], 2) == pytest.approx([1, 6, 11])


@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=7), st.data())
def test_esp_matches_enumeration(w, data):
    M = data.draw(st.integers(0, len(w)))
    expect = [sum(math.prod(c) for c in itertools.combinations(w, j)) for j in range(M + 1)]
    assert elementary_symmetric(w, M) == pytest.approx(expect, rel=1e-12)


def test_esp_survives_extreme_log_weights():
    lw = np.array([0.0, -3000.0, -6000.0, 5.0])
    w = WeightVector(lw)
    m = marginals(w, 2)
    assert np.all(np.isfinite(m))
    assert m.sum() == pytest.approx(2.0)
    assert m[0] == pytest.approx(1.0) and m[3] == pytest.approx(1.0)


def test_uniform_marginals():
    w = WeightVector.from_weights(np.ones(10))
    assert marginals(w, 4) == pytest.approx(np.full(10, 0.4))
    assert marginal(w, 4, 7) == pytest.approx(0.4)


def test_meta_arm_validation():
    with pytest.raises(ValueError):
        MetaArm((2, 1))
    with pytest.raises(ValueError):
        MetaArm((0, 1))
    assert 3 in MetaArm((1, 3))


def test_sampler_needs_enough_support():
    w = WeightVector.from_weights([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        sample_meta_arm(w, 2, np.random.default_rng(0))


def test_zero_weight_arms_are_never_sampled():
    w = WeightVector.from_weights([1.0, 0.0, 2.0, 0.0, 3.0])
    rng = np.random.default_rng(1)
    for _ in range(500):
        assert set(sample_meta_arm(w, 2, rng).arms) <= {1, 3, 5}


def test_sampler_oracle_exact_and_empirical():
    """Exact marginals vs enumeration (1e-12) and sampled subset TV distance < 0.02."""
    rng = np.random.default_rng(2024)
    for trial in range(50):
        K = int(rng.integers(2, 8))
        M = int(rng.integers(1, min(4, K) + 1))
        w = rng.uniform(0.05, 3.0, size=K)
        wv = WeightVector.from_weights(w)
        subsets, p = subset_probs(w, M)
        exact_marg = np.array([sum(pi for A, pi in zip(subsets, p) if k in A) for k in range(1, K + 1)])
        assert np.max(np.abs(marginals(wv, M) - exact_marg)) < 1e-12
        for k in range(1, K + 1):
            assert abs(marginal(wv, M, k) - exact_marg[k - 1]) < 1e-12
        if trial < 5:
            n = 100_000
            counts = dict.fromkeys(subsets, 0)
            for row in sample_meta_arms(wv, M, rng, n):
                counts[tuple(int(a) for a in row)] += 1
            emp = np.array([counts[A] / n for A in subsets])
            assert 0.5 * np.abs(emp - p).sum() < 0.02


def test_sampler_subset_probabilities_via_chain_rule():
    """The sampler's own inclusion probabilities reproduce P(A) exactly."""
    from a2c2.selector import _log_esp_suffix

    rng = np.random.default_rng(7)
    for _ in range(50):
        K = int(rng.integers(2, 8))
        M = int(rng.integers(1, min(4, K) + 1))
        w = rng.uniform(0.05, 3.0, size=K)
        lw = np.log(w)
        E = _log_esp_suffix(lw, M)
        subsets, p = subset_probs(w, M)
        for A, pA in zip(subsets, p):
            prob, left = 1.0, M
            for i in range(K):
                if left == 0:
                    break
                q = 1.0 if K - i == left else math.exp(lw[i] + E[left - 1, i + 1] - E[left, i])
                if i + 1 in A:
                    prob *= q
                    left -= 1
                else:
                    prob *= 1 - q
            assert abs(prob - pA) < 1e-12


def test_estimator_unbiased_oracle():
    """Expected increment over meta-arm and leader position equals the per-slot loss."""
    rng = np.random.default_rng(3)
    for _ in range(40):
        K = int(rng.integers(2, 7))
        M = int(rng.integers(1, min(3, K) + 1))
        tau = int(rng.integers(1, 20))
        loss = rng.random(K)  # fixed per-slot losses
        state = EstimatorState(rng.uniform(0, 30, size=K))
        eta = float(rng.uniform(0.01, 0.3))
        wv = weights_from_estimates(state, eta)
        subsets, p = subset_probs(np.exp(wv.log_weights), M)
        expected = np.zeros(K)
        for A, pA in zip(subsets, p):
            for lead in A:  # leader's arm is uniform over the M positions
                new = update_estimator(
                    state, MetaArm(A), lead, tau * loss[lead - 1], tau, marginal(wv, M, lead), M, 1
                )
                expected += pA / M * (new.cum_est - state.cum_est)
        assert np.max(np.abs(expected - loss)) < 1e-9


def test_failed_phase_adds_nothing():
    s = EstimatorState.zeros(4)
    new = update_estimator(s, MetaArm((1, 2)), 2, 5.0, 10, 0.5, 2, success=0)
    assert np.array_equal(new.cum_est, s.cum_est)
    assert new.phase == 1


def test_update_only_touches_leader_arm():
    s = EstimatorState.zeros(4)
    new = update_estimator(s, MetaArm((1, 3)), 3, 4.0, 8, 0.25, 2, 1)
    assert new.cum_est.tolist() == [0.0, 0.0, (2 / 8) * 4.0 / 0.25, 0.0]


def test_update_rejects_inconsistent_inputs():
    s = EstimatorState.zeros(3)
    with pytest.raises(ValueError):
        update_estimator(s, MetaArm((1, 2)), 3, 1.0, 1, 0.5, 2, 1)
    with pytest.raises(ValueError):
        update_estimator(s, MetaArm((1, 2)), 1, 1.0, 1, 0.0, 2, 1)


@given(st.lists(st.floats(0, 100), min_size=2, max_size=8), st.floats(0, 2))
def test_weights_from_estimates_favour_low_loss(cum, eta):
    wv = weights_from_estimates(EstimatorState(cum), eta)
    assert wv.log_weights.max() == 0.0
    order = np.argsort(cum, kind="stable")
    assert np.all(np.diff(wv.log_weights[order]) <= 1e-12)


def test_single_draws_follow_the_same_law():
    w = WeightVector.from_weights([0.5, 2.0, 1.0, 0.1])
    _, p = subset_probs([0.5, 2.0, 1.0, 0.1], 2)
    rng = np.random.default_rng(9)
    n = 20_000
    counts = {}
    for _ in range(n):
        A = sample_meta_arm(w, 2, rng).arms
        counts[A] = counts.get(A, 0) + 1
    subsets = list(itertools.combinations(range(1, 5), 2))
    emp = np.array([counts.get(A, 0) / n for A in subsets])
    assert 0.5 * np.abs(emp - p).sum() < 0.02


def test_batched_draws_are_sorted_distinct_subsets():
    w = WeightVector.from_weights(np.random.default_rng(0).uniform(0.1, 2, size=7))
    draws = sample_meta_arms(w, 3, np.random.default_rng(1), 1000)
    assert draws.shape == (1000, 3)
    assert np.all(np.diff(draws, axis=1) > 0) and draws.min() >= 1 and draws.max() <= 7
