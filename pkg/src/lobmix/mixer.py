"""Pairwise example mixing with Beta-distributed ratios.

Vanilla mixing pairs two instance-balanced draws; label-occurrence-balanced
(LOB) mixing pairs two independent class-balanced draws so that every class
receives the same expected share of soft-label mass.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .longtail import ClassIndex, LabeledDataset
from .samplers import CB, IB, SamplerKind, SamplerState, pair_stream
from .seeds import make_rng


class MixKind(str, Enum):
    VANILLA = "vanilla"
    LOB = "lob"


@dataclass(frozen=True)
class MixConfig:
    """Mixing-ratio shape (Beta(alpha, alpha)) and pairing strategy."""

    alpha: float
    kind: MixKind = MixKind.VANILLA

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "kind", MixKind(self.kind))


_LAM_EPS = 1e-7
# Complement-stable clamp bounds: x is "stable" when 1-(1-x) reproduces x
# bitwise, which makes mixing exactly symmetric under operand exchange.
LAMBDA_MIN = 1.0 - (1.0 - _LAM_EPS)
LAMBDA_MAX = 1.0 - LAMBDA_MIN


def sample_lambda(alpha: float, rng: np.random.Generator, size: int | None = None):
    """Draw mixing ratios from Beta(alpha, alpha), kept strictly inside (0, 1).

    Sampled as a ratio of two Gamma(alpha) variates. Draws are clamped away
    from the endpoints and complement-stabilized so that ``1 - (1 - lam)``
    round-trips bitwise.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    g1 = rng.standard_gamma(alpha, size=size)
    g2 = rng.standard_gamma(alpha, size=size)
    lam = g1 / np.maximum(g1 + g2, np.finfo(np.float64).tiny)
    lam = 1.0 - (1.0 - np.clip(lam, LAMBDA_MIN, LAMBDA_MAX))
    return float(lam) if size is None else lam


@dataclass(frozen=True)
class SoftLabel:
    """Probability vector over classes."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    @classmethod
    def one_hot(cls, label: int, num_classes: int) -> "SoftLabel":
        w = np.zeros(num_classes)
        w[label] = 1.0
        return cls(w)

    @classmethod
    def mixed(cls, class_i: int, class_j: int, lam: float, num_classes: int) -> "SoftLabel":
        if class_i == class_j:
            return cls.one_hot(class_i, num_classes)
        w = np.zeros(num_classes)
        w[class_i] = lam
        w[class_j] = 1.0 - lam
        return cls(w)


@dataclass(frozen=True)
class MixedExample:
    """One mixed example: convex feature blend, soft label, and provenance."""

    features: np.ndarray
    label: SoftLabel
    lam: float
    src: tuple[int, int, int, int]  # (index_i, index_j, class_i, class_j)


@dataclass(frozen=True)
class BatchMeta:
    """Everything needed to regenerate a batch from the source dataset."""

    sampler_kinds: tuple[SamplerKind, SamplerKind]
    alpha: float
    seed: int


@dataclass(frozen=True)
class MixedBatch:
    """A batch of mixed examples stored as parallel arrays.

    ``features`` is (B, D), ``labels`` the (B, C) soft-label rows, ``lams``
    the per-example mixing ratios, and ``src`` the (B, 4) provenance columns
    (index_i, index_j, class_i, class_j).
    """

    features: np.ndarray
    labels: np.ndarray
    lams: np.ndarray
    src: np.ndarray
    meta: BatchMeta

    def __post_init__(self) -> None:
        if len(self.features) == 0:
            raise ValueError("a mixed batch cannot be empty")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> MixedExample:
        return MixedExample(
            features=self.features[i],
            label=SoftLabel(self.labels[i]),
            lam=float(self.lams[i]),
            src=tuple(int(v) for v in self.src[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def examples(self) -> list[MixedExample]:
        return list(self)

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]


def mix_pair(
    x_i: np.ndarray,
    y_i: int,
    x_j: np.ndarray,
    y_j: int,
    lam: float,
    num_classes: int,
    src: tuple[int, int] | None = None,
) -> MixedExample:
    """Blend two labeled examples: lam * (x_i, y_i) + (1 - lam) * (x_j, y_j)."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ValueError(f"feature shape mismatch: {x_i.shape} vs {x_j.shape}")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"mixing ratio must lie strictly inside (0, 1), got {lam}")
    mu = 1.0 - lam
    i, j = src if src is not None else (-1, -1)
    return MixedExample(
        features=lam * x_i + mu * x_j,
        label=SoftLabel.mixed(int(y_i), int(y_j), lam, num_classes),
        lam=lam,
        src=(int(i), int(j), int(y_i), int(y_j)),
    )


def make_batch(
    dataset: LabeledDataset,
    index: ClassIndex,
    batch_size: int,
    cfg: MixConfig,
    kinds: tuple[SamplerKind, SamplerKind],
    seed: int,
) -> MixedBatch:
    """Mix ``batch_size`` pairs drawn by two independent samplers of the given kinds."""
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    s1 = SamplerState.create(kinds[0], index, seed, "pair-a")
    s2 = SamplerState.create(kinds[1], index, seed, "pair-b")
    pairs = pair_stream(s1, s2, batch_size)
    lam = np.atleast_1d(sample_lambda(cfg.alpha, make_rng(seed, "mixing"), size=batch_size))
    mu = 1.0 - lam

    i, j = pairs[:, 0], pairs[:, 1]
    ci = dataset.labels[i]
    cj = dataset.labels[j]
    features = lam[:, None] * dataset.features[i] + mu[:, None] * dataset.features[j]
    labels = np.zeros((batch_size, dataset.num_classes))
    rows = np.arange(batch_size)
    np.add.at(labels, (rows, ci), lam)
    np.add.at(labels, (rows, cj), mu)

    meta = BatchMeta(sampler_kinds=(kinds[0], kinds[1]), alpha=cfg.alpha, seed=seed)
    return MixedBatch(
        features=features,
        labels=labels,
        lams=lam,
        src=np.stack([i, j, ci, cj], axis=1),
        meta=meta,
    )


def make_batch_vanilla(
    dataset: LabeledDataset, index: ClassIndex, batch_size: int, cfg: MixConfig, seed: int
) -> MixedBatch:
    """Classic mixing: both pair members drawn instance-balanced."""
    if cfg.kind is not MixKind.VANILLA:
        raise ValueError(f"expected a vanilla mix config, got kind={cfg.kind.value}")
    return make_batch(dataset, index, batch_size, cfg, (IB, IB), seed)


def make_batch_lob(
    dataset: LabeledDataset, index: ClassIndex, batch_size: int, cfg: MixConfig, seed: int
) -> MixedBatch:
    """Label-occurrence-balanced mixing: both pair members drawn class-balanced."""
    if cfg.kind is not MixKind.LOB:
        raise ValueError(f"expected a lob mix config, got kind={cfg.kind.value}")
    return make_batch(dataset, index, batch_size, cfg, (CB, CB), seed)


def write_batch_audit(path: str | Path, batch: MixedBatch) -> None:
    """Dump pairing provenance as JSON lines (features omitted)."""
    with Path(path).open("w") as fh:
        for k in range(len(batch)):
            i, j, ci, cj = (int(v) for v in batch.src[k])
            record = {
                "lambda": float(batch.lams[k]),
                "src_i": i,
                "src_j": j,
                "class_i": ci,
                "class_j": cj,
            }
            fh.write(json.dumps(record) + "\n")
