"""Deterministic seed derivation shared by simulation and experiment code.

Child streams are identified by a tag path, e.g.
``derive_seed(base, "noise", node, trial, "sc")``.  The derivation is a
stable 64-bit hash of the textual path, so any oracle can reproduce any
stream from the base seed alone, independent of platform or process.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base_seed: int, *tags) -> int:
    """Stable 64-bit child seed for the stream named by ``tags``."""
    text = str(int(base_seed)) + "".join(f"/{t}" for t in tags)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(base_seed: int, *tags) -> np.random.Generator:
    """Generator seeded by :func:`derive_seed` of the same path."""
    return np.random.default_rng(derive_seed(base_seed, *tags))
