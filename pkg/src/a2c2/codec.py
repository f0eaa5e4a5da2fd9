"""Collision signalling over the Z-channel.

A slot carries bit 1 when the receiver sees loss 1 (a collision, or an
adversarial loss of exactly 1) and bit 0 otherwise.  Bit 1 always arrives
intact; bit 0 flips whenever the adversary puts a 1 on the receiver's arm.

Bit strings are tuples of 0/1 ints.  Decoders also accept numpy arrays, which
is how agents hand over received windows.  Binary arm indices are big-endian.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

BitString = tuple[int, ...]


def z_receive(sent: int, attack: int) -> int:
    return int(bool(sent) or bool(attack))


def received_bits(losses: np.ndarray) -> np.ndarray:
    """Turn observed losses into received bits (loss exactly 1 -> bit 1)."""
    return np.asarray(losses) >= 1.0


def index_width(K: int) -> int:
    """Number of binary digits for arm indices ``0..K-1`` (ceil log2 K, at least 1)."""
    if K < 1:
        raise ValueError("K must be positive")
    return max(1, (K - 1).bit_length())


def _check_arm(arm: int, K: int):
    if not 1 <= arm <= K:
        raise ValueError(f"arm {arm} outside [1, {K}]")


def _check_h(h: int):
    if h < 1:
        raise ValueError(f"repetition length must be >= 1, got {h}")


# ----------------------------------------------------------- repetition code


def r_encode(bit: int, h: int) -> BitString:
    _check_h(h)
    return (int(bit),) * h


def r_decode(received: Sequence[int] | np.ndarray) -> int:
    """All-one window decodes to 1, anything containing a 0 decodes to 0."""
    arr = np.asarray(received)
    if arr.size == 0:
        raise ValueError("cannot decode an empty window")
    return int(arr.all())


def r_encode_index(arm: int, K: int, h: int) -> BitString:
    _check_arm(arm, K)
    _check_h(h)
    width = index_width(K)
    bits = [(arm - 1) >> (width - 1 - i) & 1 for i in range(width)]
    return tuple(b for b in bits for _ in range(h))


def r_decode_index(received: Sequence[int] | np.ndarray, K: int, h: int) -> int:
    """Blockwise repetition decode of a binary index.

    A corrupted word whose value lands outside ``0..K-1`` is clamped to arm K.
    """
    arr = np.asarray(received)
    width = index_width(K)
    if arr.size != width * h:
        raise ValueError(f"expected {width * h} bits, got {arr.size}")
    value = 0
    for bit in arr.reshape(width, h).all(axis=1):
        value = (value << 1) | int(bit)
    return min(value + 1, K)


# ------------------------------------------------ constant-weight (detection)


def e_encode(arm: int, K: int, h: int) -> BitString:
    """One-hot arm index with every position repeated h times (weight h)."""
    _check_arm(arm, K)
    _check_h(h)
    return tuple(int(k == arm) for k in range(1, K + 1) for _ in range(h))


def e_decode(received: Sequence[int] | np.ndarray, K: int, h: int) -> set[int]:
    """Indices of all-one blocks.  More than one index means a detected error."""
    arr = np.asarray(received)
    if arr.size != K * h:
        raise ValueError(f"expected {K * h} bits, got {arr.size}")
    full = arr.reshape(K, h).all(axis=1)
    return {int(k) + 1 for k in np.flatnonzero(full)}
