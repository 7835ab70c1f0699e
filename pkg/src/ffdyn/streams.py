"""Deterministic RNG streams keyed by (master seed, experiment tag, trial).

Counter-based Philox generators seeded through SeedSequence spawn keys, so a
trial's stream never depends on batch size, thread count or evaluation order.
"""

from __future__ import annotations

import numpy as np

_TAG_IDS = {
    "delta-flow": 0,
    "kg-mc": 1,
    "mult-mc": 2,
    "strong-bc": 3,
    "cusp-volume": 4,
    "tree-loglaw": 5,
    "xi-decay": 6,
    "reduce": 7,
    "tail": 8,
    "quasi": 9,
    "xi-mc": 10,
    "k-sample": 11,
    "test": 12,
}


def tag_id(tag: str | int) -> int:
    if isinstance(tag, int):
        return tag
    try:
        return _TAG_IDS[tag]
    except KeyError:
        raise ValueError(f"unknown stream tag {tag!r}") from None


def stream(seed: int, tag: str | int, trial: int = 0) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag_id(tag), int(trial)))
    return np.random.Generator(np.random.Philox(ss))
