"""Instance-balanced and class-balanced example samplers.

Both samplers draw with replacement. The class-balanced sampler is the
two-stage scheme: pick a class uniformly, then an example uniformly within
the class, so each example in class k is selected with probability
1/(n_k * C) instead of the instance-balanced 1/N.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .longtail import ClassIndex
from .seeds import make_rng


class SamplerKind(str, Enum):
    INSTANCE_BALANCED = "instance_balanced"
    CLASS_BALANCED = "class_balanced"

    @classmethod
    def parse(cls, text: str) -> "SamplerKind":
        aliases = {"ib": cls.INSTANCE_BALANCED, "cb": cls.CLASS_BALANCED}
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


IB = SamplerKind.INSTANCE_BALANCED
CB = SamplerKind.CLASS_BALANCED


@dataclass(frozen=True)
class SamplingDistribution:
    """Per-example selection probabilities over 0..N-1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))

    def class_mass(self, index: ClassIndex) -> np.ndarray:
        """Total selection probability per class."""
        return np.array([self.probs[idx].sum() for idx in index.per_class])


def selection_probability(kind: SamplerKind, index: ClassIndex) -> SamplingDistribution:
    """Selection distribution implied by a sampler kind on a class index."""
    if index.total == 0:
        raise ValueError("empty dataset")
    probs = np.empty(index.total, dtype=np.float64)
    if kind is IB:
        probs.fill(1.0 / index.total)
    else:
        num_classes = index.num_classes
        for idx in index.per_class:
            if idx.size == 0:
                raise ValueError("class-balanced sampling requires every class to be populated")
            probs[idx] = 1.0 / (idx.size * num_classes)
    return SamplingDistribution(probs)


@dataclass
class SamplerState:
    """Owns one random stream and draws example indices with replacement."""

    kind: SamplerKind
    index: ClassIndex
    rng: np.random.Generator
    draws: int = 0

    @classmethod
    def create(cls, kind: SamplerKind, index: ClassIndex, seed: int, stream: str | int = 0) -> "SamplerState":
        """Build a state on its own stream derived from (seed, stream id, kind)."""
        return cls(kind=kind, index=index, rng=make_rng(seed, "sampler", stream, kind.value))


def sample_batch(state: SamplerState, batch_size: int) -> np.ndarray:
    """Draw ``batch_size`` i.i.d. example indices."""
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    index = state.index
    if state.kind is IB:
        out = state.rng.integers(0, index.total, size=batch_size)
    else:
        counts = index.counts
        if np.any(counts == 0):
            raise ValueError("class-balanced sampling requires every class to be populated")
        classes = state.rng.integers(0, index.num_classes, size=batch_size)
        within = state.rng.integers(0, counts[classes])
        out = index.flat[index.offsets[classes] + within]
    state.draws += batch_size
    return out.astype(np.int64)


def next_index(state: SamplerState) -> int:
    """Draw a single example index (one step of the batch sampler)."""
    return int(sample_batch(state, 1)[0])


def _stream_position(rng: np.random.Generator) -> tuple:
    st = rng.bit_generator.state
    inner = st["state"]
    return (
        st["bit_generator"],
        tuple(np.asarray(inner["counter"]).tolist()),
        tuple(np.asarray(inner["key"]).tolist()),
        st.get("buffer_pos"),
    )


def pair_stream(s1: SamplerState, s2: SamplerState, batch_size: int) -> np.ndarray:
    """Draw ``batch_size`` independent index pairs, first column from s1, second from s2.

    The two states must hold distinct streams; pairing a stream with itself
    (or an identically positioned clone) would correlate the draws.
    """
    if s1.rng is s2.rng:
        raise ValueError("pair_stream requires two independent streams, got a shared generator")
    if _stream_position(s1.rng) == _stream_position(s2.rng):
        raise ValueError("pair_stream requires two independent streams, got identically seeded generators")
    first = sample_batch(s1, batch_size)
    second = sample_batch(s2, batch_size)
    return np.stack([first, second], axis=1)
