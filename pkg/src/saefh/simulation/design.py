"""Sampling-variance designs for the simulation study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidDatasetError

TYPE2_LEVELS = (2.0, 0.6, 0.5, 0.4, 0.2)


def design_type2(m: int) -> np.ndarray:
    """Five equal groups with D = 2.0, 0.6, 0.5, 0.4, 0.2 in that order."""
    if m < 5 or m % 5:
        raise InvalidDatasetError(f"type-II design needs m divisible by 5, got {m}")
    return np.repeat(np.array(TYPE2_LEVELS), m // 5)


@dataclass(frozen=True)
class Balanced:
    d: float = 1.0

    def variances(self, m: int) -> np.ndarray:
        if not self.d > 0:
            raise InvalidDatasetError(f"D must be > 0, got {self.d}")
        return np.full(m, float(self.d))

    def __str__(self) -> str:
        return f"balanced:{self.d:g}"


@dataclass(frozen=True)
class TypeII:
    def variances(self, m: int) -> np.ndarray:
        return design_type2(m)

    def __str__(self) -> str:
        return "type2"


def parse_design(text: str):
    """``"balanced:<D>"`` or ``"type2"``."""
    if isinstance(text, (Balanced, TypeII)):
        return text
    s = str(text).strip().lower()
    if s in ("type2", "type-ii", "typeii", "type_ii"):
        return TypeII()
    if s.startswith("balanced"):
        _, _, val = s.partition(":")
        return Balanced(float(val) if val else 1.0)
    raise ValueError(f"unknown design {text!r}; expected 'balanced:<D>' or 'type2'")


def group_labels(d: np.ndarray, atol: float = 1e-12):
    """Group areas by equal D (within ``atol``), in first-appearance order.

    Returns ``(labels, levels, index_lists)``.
    """
    levels: list[float] = []
    members: list[list[int]] = []
    for i, di in enumerate(np.asarray(d, dtype=float)):
        for g, lev in enumerate(levels):
            if abs(di - lev) <= atol:
                members[g].append(i)
                break
        else:
            levels.append(float(di))
            members.append([i])
    labels = [f"G{g + 1}" for g in range(len(levels))]
    return labels, levels, [np.array(ix) for ix in members]
