"""Design-based moments of a weighted area mean under Poisson sampling.

Units enter the sample independently with probability ``pi_k``; the direct
estimator is the Hajek mean ``ybar = sum w_k y_k / sum w_k`` with
``w_k = 1 / pi_k``.  Its variance and fourth central moment are estimated
from the linearised total of ``z_k = (y_k - ybar) / N``, giving a plug-in
estimate of the sampling kurtosis that feeds the area-level model.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidDatasetError, UndefinedKurtosisError

KAPPA_FLOOR = -2.0


@dataclass(frozen=True)
class UnitRecord:
    y: float
    pi: float

    def __post_init__(self):
        if not 0 < self.pi <= 1:
            raise InvalidDatasetError(f"inclusion probability must be in (0, 1], got {self.pi}")


class AreaUnitSample:
    """Sampled units of one area (``y`` values and inclusion probabilities)."""

    __slots__ = ("area_id", "y", "pi")

    def __init__(self, y: ArrayLike, pi: ArrayLike, area_id: str = ""):
        y = np.asarray(y, dtype=float).ravel()
        pi = np.broadcast_to(np.asarray(pi, dtype=float), y.shape).copy()
        if y.size == 0:
            raise InvalidDatasetError(f"area {area_id!r}: empty sample")
        if not np.all(np.isfinite(y)):
            raise InvalidDatasetError(f"area {area_id!r}: y must be finite")
        if not np.all((pi > 0) & (pi <= 1)):
            raise InvalidDatasetError(f"area {area_id!r}: inclusion probabilities must be in (0, 1]")
        self.area_id = area_id
        self.y = y
        self.pi = pi

    @classmethod
    def from_units(cls, units: Iterable[UnitRecord], area_id: str = "") -> "AreaUnitSample":
        units = list(units)
        return cls([u.y for u in units], [u.pi for u in units], area_id)

    def __len__(self) -> int:
        return self.y.size


def _require_two(sample: AreaUnitSample):
    if len(sample) < 2:
        raise InvalidDatasetError(
            f"area {sample.area_id!r}: at least 2 units are needed, got {len(sample)}"
        )


def direct_mean(sample: AreaUnitSample) -> tuple[float, float]:
    """Weighted mean and estimated population size ``(ybar, N_hat)``."""
    w = 1.0 / sample.pi
    n_hat = w.sum()
    # a weighted mean lies in [min y, max y]; clipping keeps constant samples exact
    ybar = np.clip(np.dot(w, sample.y) / n_hat, sample.y.min(), sample.y.max())
    return float(ybar), float(n_hat)


def _zhat(sample: AreaUnitSample) -> NDArray:
    ybar, n_hat = direct_mean(sample)
    return (sample.y - ybar) / n_hat


def variance_from_z(z: ArrayLike, pi: ArrayLike) -> float:
    """``sum_s (1 - pi_k) z_k^2 / pi_k^2``: design-unbiased for Var(sum_U z_k)."""
    z = np.asarray(z, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return float(np.sum((1.0 - pi) * z * z / (pi * pi)))


def fourth_moment_from_z(z: ArrayLike, pi: ArrayLike) -> float:
    """Design-unbiased estimate of ``E(sum_U (delta_k - pi_k) z_k / pi_k)^4``.

    Single-unit terms use ``E(delta - pi)^4 = pi (1 - pi) (pi^3 + (1 - pi)^3)``
    and pairs use ``E(delta - pi)^2 = pi (1 - pi)``, each divided by the
    inclusion probability of the sampled units involved.
    """
    z2 = np.asarray(z, dtype=float) ** 2
    pi = np.asarray(pi, dtype=float)
    q = 1.0 - pi
    single = q * (pi**3 + q**3) * z2 * z2 / pi**4
    a = q * z2 / pi**2
    return float(np.sum(single) + 6.0 * pair_sum(a))


def poisson_variance(sample: AreaUnitSample) -> float:
    """``N_hat^-2 sum_s w_k (w_k - 1) (y_k - ybar)^2``."""
    _require_two(sample)
    return variance_from_z(_zhat(sample), sample.pi)


def pair_sum(a: ArrayLike) -> float:
    """``sum_{k<l} a_k a_l`` in O(n) via ``((sum a)^2 - sum a^2) / 2``.

    Evaluated in exact rational arithmetic and rounded once, so the result
    is the correctly rounded pair sum (no cancellation when one term
    dominates) and equals :func:`pair_sum_naive` bit for bit.
    """
    fr = [Fraction(v) for v in np.asarray(a, dtype=float).ravel().tolist()]
    s = sum(fr, Fraction(0))
    sq = sum((f * f for f in fr), Fraction(0))
    return float((s * s - sq) / 2)


def pair_sum_naive(a: ArrayLike) -> float:
    """Quadratic double loop over ``k < l`` (exact, rounded once); reference for :func:`pair_sum`."""
    fr = [Fraction(v) for v in np.asarray(a, dtype=float).ravel().tolist()]
    total = Fraction(0)
    for k in range(len(fr)):
        for l in range(k + 1, len(fr)):
            total += fr[k] * fr[l]
    return float(total)


def poisson_fourth_moment(sample: AreaUnitSample) -> float:
    """Estimated fourth central moment of the weighted mean."""
    _require_two(sample)
    return fourth_moment_from_z(_zhat(sample), sample.pi)


def sampling_kurtosis(sample: AreaUnitSample) -> float:
    """``mu4_hat / v^2 - 3``, clamped below at -2."""
    v = poisson_variance(sample)
    if not v > 0:
        raise UndefinedKurtosisError(
            f"area {sample.area_id!r}: estimated variance is zero, kurtosis undefined"
        )
    mu4 = poisson_fourth_moment(sample)
    return max(mu4 / (v * v) - 3.0, KAPPA_FLOOR)


@dataclass(frozen=True)
class AreaMoments:
    area_id: str
    y_bar: float
    n_hat: float
    v: float
    mu4: float
    kappa_e: float


def area_moments(sample: AreaUnitSample) -> AreaMoments:
    ybar, n_hat = direct_mean(sample)
    return AreaMoments(
        area_id=sample.area_id, y_bar=ybar, n_hat=n_hat,
        v=poisson_variance(sample), mu4=poisson_fourth_moment(sample),
        kappa_e=sampling_kurtosis(sample),
    )


def group_units(area_ids: Iterable[str], y: Iterable[float], pi: Iterable[float]) -> list[AreaUnitSample]:
    """Split a unit-level table into per-area samples, first-appearance order."""
    groups: dict[str, tuple[list, list]] = {}
    for a, yk, pk in zip(area_ids, y, pi):
        ys, ps = groups.setdefault(a, ([], []))
        ys.append(yk)
        ps.append(pk)
    return [AreaUnitSample(ys, ps, a) for a, (ys, ps) in groups.items()]


# -- exact design expectations ----------------------------------------------


def enumerate_poisson_samples(pi: ArrayLike) -> Iterator[tuple[NDArray, float]]:
    """Every subset of the population with its Poisson-sampling probability.

    Yields ``(mask, probability)``; there are ``2**N`` outcomes so keep
    ``N`` small.
    """
    pi = np.asarray(pi, dtype=float)
    for bits in itertools.product((False, True), repeat=pi.size):
        mask = np.array(bits, dtype=bool)
        prob = float(np.prod(np.where(mask, pi, 1.0 - pi)))
        yield mask, prob


def design_expectation(pi: ArrayLike, statistic: Callable[[NDArray], float]) -> float:
    """Exact ``E[statistic(mask)]`` over all Poisson samples, via ``math.fsum``."""
    return math.fsum(prob * statistic(mask) for mask, prob in enumerate_poisson_samples(pi))
