"""Deterministic seed derivation for per-object, per-view and per-episode RNG streams."""

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed(master: int, *keys) -> int:
    """Derive a child seed from a master seed and any mix of int/str keys.

    Stable across processes and Python versions (no reliance on hash()).
    """
    entropy = [_key_to_int(master)] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def rng_for(master: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
