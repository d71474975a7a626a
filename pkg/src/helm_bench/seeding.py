"""Per-sensor random streams derived from a single scenario seed.

Each consumer gets its own counter-based generator keyed by (seed, label),
so adding or removing a sensor never shifts the draws of the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent Philox stream for a named consumer of the scenario seed."""
    digest = hashlib.blake2s(f"{seed}:{label}".encode(), digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))
