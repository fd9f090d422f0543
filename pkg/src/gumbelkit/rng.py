"""Deterministic, splittable random streams keyed by (master seed, indices)."""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the stream (master_seed, *key).

    Philox is counter based, so streams with distinct keys are statistically
    independent and reproduce bit-identically across platforms that share the
    IEEE double model.  Key components must be nonnegative.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
