"""Seed derivation for reproducible replica streams."""
from __future__ import annotations

import hashlib
from typing import Union

import numpy as np


def generator(seed: int, *keys: int) -> np.random.Generator:
    """
    Independent Generator for the stream (seed, key_1, key_2, ...).

    Replica r of an experiment uses ``generator(seed, r)`` so the stream never
    depends on how many workers execute the replicas.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, *[int(k) for k in keys]]))


def derive_seed(seed: int, salt: Union[str, int]) -> int:
    """Deterministic 63-bit sub-seed from a master seed and a salt."""
    combined = f"{int(seed)}-{salt}"
    return int(hashlib.sha256(combined.encode()).hexdigest(), 16) % (2**63 - 1)
