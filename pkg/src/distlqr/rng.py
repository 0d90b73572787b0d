"""Deterministic random-stream derivation.

Every stream is a numpy ``Generator`` seeded from a SHA-256 digest of
``(root seed, tag, index)``, so sub-streams never depend on the order in which
they are requested or on how work is split across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, tag: str, index: int = 0) -> int:
    if root < 0 or index < 0:
        raise ValueError("seeds and stream indices must be non-negative")
    digest = hashlib.sha256(f"{int(root)}:{tag}:{int(index)}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


def stream(root: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``root``."""
    return np.random.default_rng(derive_seed(root, tag, index))
