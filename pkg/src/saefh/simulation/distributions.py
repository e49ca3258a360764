"""Centred effect distributions and counter-based random streams."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# stream tags; one independent counter block per (replicate, variable)
TAG_V = 0
TAG_E = 1


class Kind(str, enum.Enum):
    NORMAL = "normal"
    DOUBLE_EXPONENTIAL = "double-exponential"
    SHIFTED_EXPONENTIAL = "shifted-exponential"


_ALIASES = {
    "normal": Kind.NORMAL,
    "n": Kind.NORMAL,
    "double-exponential": Kind.DOUBLE_EXPONENTIAL,
    "double_exponential": Kind.DOUBLE_EXPONENTIAL,
    "doubleexponential": Kind.DOUBLE_EXPONENTIAL,
    "laplace": Kind.DOUBLE_EXPONENTIAL,
    "de": Kind.DOUBLE_EXPONENTIAL,
    "shifted-exponential": Kind.SHIFTED_EXPONENTIAL,
    "shifted_exponential": Kind.SHIFTED_EXPONENTIAL,
    "shiftedexponential": Kind.SHIFTED_EXPONENTIAL,
    "shifted-exp": Kind.SHIFTED_EXPONENTIAL,
    "exponential": Kind.SHIFTED_EXPONENTIAL,
    "se": Kind.SHIFTED_EXPONENTIAL,
}

KURTOSIS = {Kind.NORMAL: 0.0, Kind.DOUBLE_EXPONENTIAL: 3.0, Kind.SHIFTED_EXPONENTIAL: 6.0}


@dataclass(frozen=True)
class EffectDistribution:
    """Mean-zero distribution with a given variance (kurtosis 0, 3 or 6)."""

    kind: Kind
    variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        if not self.variance > 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")

    @property
    def kurtosis(self) -> float:
        return KURTOSIS[self.kind]

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def parse_kind(value) -> Kind:
    if isinstance(value, Kind):
        return value
    try:
        return _ALIASES[str(value).strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown distribution {value!r}; expected normal, double-exponential "
            "or shifted-exponential"
        ) from None


def _key(master_seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF).generate_state(
        2, np.uint64
    )


def make_stream(master_seed: int, replicate: int, tag: int) -> np.random.Generator:
    """Philox stream addressed by ``(replicate, tag)`` under a key from the seed.

    The two high counter words hold the address and the two low words count
    draws, so streams never overlap and do not depend on scheduling.
    """
    counter = np.array([0, 0, tag, replicate], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(master_seed), counter=counter))


def draw_centered(dist: EffectDistribution, stream: np.random.Generator, size=None):
    """Draw from ``dist``; the n-th value of a stream is the n-th area's effect."""
    sd = dist.sd
    if dist.kind is Kind.NORMAL:
        out = stream.standard_normal(size) * sd
    elif dist.kind is Kind.DOUBLE_EXPONENTIAL:
        out = stream.laplace(0.0, sd / math.sqrt(2.0), size)
    else:
        out = (stream.standard_exponential(size) - 1.0) * sd
    return float(out) if size is None else out
