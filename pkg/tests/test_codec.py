import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from a2c2 import codec


def received(sent, attack):
    return tuple(codec.z_receive(s, a) for s, a in zip(sent, attack))


def test_z_channel_truth_table():
    assert [codec.z_receive(s, a) for s in (0, 1) for a in (0, 1)] == [0, 1, 1, 1]


def test_repetition_examples():
    assert codec.r_encode(1, 3) == (1, 1, 1)
    assert codec.r_decode((1, 1, 1)) == 1
    assert codec.r_decode((1, 0, 1)) == 0
    with pytest.raises(ValueError):
        codec.r_decode(())
    with pytest.raises(ValueError):
        codec.r_encode(1, 0)


def test_index_width():
    assert [codec.index_width(K) for K in (1, 2, 3, 4, 5, 8, 9, 10)] == [1, 1, 2, 2, 3, 3, 4, 4]


def test_binary_index_is_big_endian():
    assert codec.r_encode_index(6, 10, 1) == (0, 1, 0, 1)
    assert codec.r_encode_index(2, 4, 2) == (0, 0, 1, 1)


@pytest.mark.parametrize("K", [2, 3, 5, 8, 10, 16])
@pytest.mark.parametrize("h", [1, 2, 4])
def test_index_round_trip(K, h):
    for arm in range(1, K + 1):
        assert codec.r_decode_index(codec.r_encode_index(arm, K, h), K, h) == arm


def test_index_decode_clamps_out_of_range_words():
    # 1111 would be index 15 but K = 10
    assert codec.r_decode_index((1, 1, 1, 1), 10, 1) == 10


def test_index_survives_short_bursts():
    K, h = 10, 5
    sent = codec.r_encode_index(3, K, h)
    for start in range(len(sent)):
        attack = [0] * len(sent)
        attack[start : start + h - 1] = [1] * (h - 1)
        assert codec.r_decode_index(received(sent, attack), K, h) == 3


def test_constant_weight_examples():
    assert codec.e_encode(2, 3, 2) == (0, 0, 1, 1, 0, 0)
    assert codec.e_decode((0, 0, 1, 1, 0, 0), 3, 2) == {2}
    assert codec.e_decode((1, 1, 1, 1, 0, 1), 3, 2) == {1, 2}
    with pytest.raises(ValueError):
        codec.e_decode((0, 1), 3, 2)


@pytest.mark.parametrize("h", range(1, 7))
def test_repetition_exhaustive(h):
    for attack in itertools.product((0, 1), repeat=h):
        assert codec.r_decode(received(codec.r_encode(1, h), attack)) == 1
        assert codec.r_decode(received(codec.r_encode(0, h), attack)) == int(all(attack))


def test_constant_weight_exhaustive():
    K, h = 3, 3
    for arm in range(1, K + 1):
        sent = codec.e_encode(arm, K, h)
        for attack in itertools.product((0, 1), repeat=K * h):
            S = codec.e_decode(received(sent, attack), K, h)
            assert arm in S
            if len(S) == 1:
                assert S == {arm}


@given(st.integers(2, 12), st.integers(1, 6), st.data())
def test_constant_weight_never_loses_the_true_arm(K, h, data):
    arm = data.draw(st.integers(1, K))
    attack = data.draw(st.lists(st.integers(0, 1), min_size=K * h, max_size=K * h))
    sent = codec.e_encode(arm, K, h)
    assert sum(sent) == h
    S = codec.e_decode(received(sent, attack), K, h)
    assert arm in S


@given(st.integers(2, 12), st.integers(2, 6), st.data())
def test_constant_weight_detects_nothing_under_short_runs(K, h, data):
    """Attacks whose runs are all shorter than h cannot complete another block."""
    arm = data.draw(st.integers(1, K))
    n = K * h
    attack = np.zeros(n, dtype=int)
    for _ in range(data.draw(st.integers(0, 5))):
        s = data.draw(st.integers(0, n - 1))
        attack[s : s + h - 1] = 1
        if s + h - 1 < n:
            attack[s + h - 1] = 0
    # merged runs could exceed h-1; cut every run to h-1
    run = 0
    for i in range(n):
        run = run + 1 if attack[i] else 0
        if run >= h:
            attack[i] = 0
            run = 0
    S = codec.e_decode(received(codec.e_encode(arm, K, h), attack), K, h)
    assert S == {arm}


def test_decoders_accept_arrays():
    assert codec.r_decode(np.array([True, True])) == 1
    assert codec.e_decode(np.array([0, 1, 0]), 3, 1) == {2}
