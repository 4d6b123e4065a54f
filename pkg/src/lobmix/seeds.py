"""Deterministic derivation of independent random streams from one root seed."""
from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def _token(part: str | int) -> int:
    """Map a path component to a stable non-negative integer."""
    if isinstance(part, bool):
        raise TypeError("bool is not a valid seed path component")
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"seed path components must be non-negative, got {part}")
        return part
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_sequence(root: int, *path: str | int) -> np.random.SeedSequence:
    """Derive a child seed from a root seed and a label path.

    Distinct paths yield statistically independent streams; the same
    (root, path) always yields the same stream. String components are
    hashed so streams can be addressed by name (e.g. "sampler-1").
    """
    if not 0 <= root <= MAX_SEED:
        raise ValueError(f"root seed must fit in 64 bits, got {root}")
    return np.random.SeedSequence([root, *(_token(p) for p in path)])


def make_rng(root: int, *path: str | int) -> np.random.Generator:
    """Counter-based generator (Philox) on an independent derived stream."""
    return np.random.Generator(np.random.Philox(seed_sequence(root, *path)))


def child_seed(root: int, *path: str | int) -> int:
    """Collapse a derived stream to a single 64-bit seed (for nested fan-out)."""
    state = seed_sequence(root, *path).generate_state(1, np.uint64)
    return int(state[0])
