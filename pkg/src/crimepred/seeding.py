"""Deterministic sub-seed derivation.

All randomness in the package flows from one root seed. Independent tasks
(k-means restarts, gap reference sets, forest trees, pipeline phases) derive
their own 64-bit sub-seed from ``(root, name, index...)`` via SHA-256, so
results never depend on scheduling order, platform hash randomization, or
how many tasks run.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *parts: int | str) -> int:
    """Stable 64-bit seed from a root seed and a structured task path."""
    payload = repr((int(root),) + tuple(parts)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def generator(root: int, *parts: int | str) -> np.random.Generator:
    """A numpy Generator seeded by :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(root, *parts))
