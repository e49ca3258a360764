"""Area-level data model, OLS/GLS fits and (E)BLUP predictions.

The model is ``Y_i = x_i' beta + v_i + e_i`` with ``var(v_i) = psi`` and a
known sampling variance ``D_i``.  Nothing here assumes normality.

Every numerical kernel in this module works on stacks of problems: arrays
carry an optional leading batch shape, and the area axis is always the last
axis of ``y``/``d`` (second to last of ``x``).  The public functions wrap the
kernels for a single :class:`AreaDataset`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidDatasetError, RegularityWarning, SingularDesignError

PIVOT_TOL = 1e-12
LEVERAGE_WARN_FACTOR = 4.0
D_RATIO_WARN = 1e4


@dataclass(frozen=True)
class AreaRecord:
    """One small area: direct estimate, covariates, sampling variance and kurtosis."""

    id: str
    y: float
    x: tuple[float, ...]
    d: float
    kappa_e: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.y):
            raise InvalidDatasetError(f"area {self.id!r}: y must be finite")
        if not all(math.isfinite(v) for v in self.x):
            raise InvalidDatasetError(f"area {self.id!r}: covariates must be finite")
        if not (math.isfinite(self.d) and self.d > 0):
            raise InvalidDatasetError(f"area {self.id!r}: D must be > 0, got {self.d}")
        if not (self.kappa_e >= -2):
            raise InvalidDatasetError(
                f"area {self.id!r}: kappa_e must be >= -2, got {self.kappa_e}"
            )


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class AreaDataset:
    """Ordered collection of m areas sharing a covariate dimension p.

    Parameters
    ----------
    y : array-like, shape (m,)
        Direct estimates.
    x : array-like, shape (m, p) or (m,)
        Covariates; a 1-d array is read as a single column.
    d : array-like, shape (m,)
        Known sampling variances, all > 0.
    kappa_e : array-like, shape (m,), optional
        Known sampling kurtoses (default 0, i.e. normal-like errors).
    ids : sequence of str, optional
        Area labels; defaults to ``"1".."m"``.
    """

    __slots__ = ("_y", "_x", "_d", "_kappa_e", "_ids")

    def __init__(
        self,
        y: ArrayLike,
        x: ArrayLike,
        d: ArrayLike,
        kappa_e: ArrayLike | None = None,
        ids: Sequence[str] | None = None,
    ):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        d = np.broadcast_to(np.asarray(d, dtype=float), y.shape)
        if kappa_e is None:
            kappa_e = np.zeros_like(y)
        kappa_e = np.broadcast_to(np.asarray(kappa_e, dtype=float), y.shape)

        if y.ndim != 1:
            raise InvalidDatasetError("y must be one-dimensional")
        m = y.shape[0]
        if x.ndim != 2 or x.shape[0] != m:
            raise InvalidDatasetError(f"x must have shape ({m}, p), got {x.shape}")
        p = x.shape[1]
        if p < 1:
            raise InvalidDatasetError("at least one covariate column is required")
        if m <= p:
            raise InvalidDatasetError(f"need m > p, got m={m}, p={p}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InvalidDatasetError("y and x must be finite")
        bad = np.flatnonzero(~(np.isfinite(d) & (d > 0)))
        if bad.size:
            raise InvalidDatasetError(f"D must be finite and > 0 (area index {bad[0]})")
        bad = np.flatnonzero(~(kappa_e >= -2))
        if bad.size:
            raise InvalidDatasetError(f"kappa_e must be >= -2 (area index {bad[0]})")
        if ids is None:
            ids = [str(i + 1) for i in range(m)]
        ids = tuple(str(i) for i in ids)
        if len(ids) != m:
            raise InvalidDatasetError("ids must have one entry per area")

        self._y = _frozen(y)
        self._x = _frozen(x)
        self._d = _frozen(d)
        self._kappa_e = _frozen(kappa_e)
        self._ids = ids

    @classmethod
    def from_records(cls, records: Iterable[AreaRecord]) -> "AreaDataset":
        records = list(records)
        if not records:
            raise InvalidDatasetError("empty dataset")
        p = len(records[0].x)
        if any(len(r.x) != p for r in records):
            raise InvalidDatasetError("all records must share the same covariate dimension")
        return cls(
            y=[r.y for r in records],
            x=[r.x for r in records],
            d=[r.d for r in records],
            kappa_e=[r.kappa_e for r in records],
            ids=[r.id for r in records],
        )

    @property
    def y(self) -> NDArray:
        return self._y

    @property
    def x(self) -> NDArray:
        return self._x

    @property
    def d(self) -> NDArray:
        return self._d

    @property
    def kappa_e(self) -> NDArray:
        return self._kappa_e

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def m(self) -> int:
        return self._y.shape[0]

    @property
    def p(self) -> int:
        return self._x.shape[1]

    @property
    def records(self) -> list[AreaRecord]:
        return [
            AreaRecord(self._ids[i], float(self._y[i]), tuple(map(float, self._x[i])),
                       float(self._d[i]), float(self._kappa_e[i]))
            for i in range(self.m)
        ]

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        return f"AreaDataset(m={self.m}, p={self.p})"

    def replace(self, **changes) -> "AreaDataset":
        """Copy with some of ``y``, ``x``, ``d``, ``kappa_e``, ``ids`` replaced."""
        kw = dict(y=self._y, x=self._x, d=self._d, kappa_e=self._kappa_e, ids=self._ids)
        kw.update(changes)
        return AreaDataset(**kw)

    def take(self, index: ArrayLike) -> "AreaDataset":
        index = np.asarray(index, dtype=int)
        return AreaDataset(
            self._y[index], self._x[index], self._d[index], self._kappa_e[index],
            [self._ids[i] for i in index],
        )

    def drop(self, u: int) -> "AreaDataset":
        """Dataset with area ``u`` removed."""
        if not 0 <= u < self.m:
            raise IndexError(f"area index {u} out of range for m={self.m}")
        return self.take(np.delete(np.arange(self.m), u))


@dataclass(frozen=True)
class OlsFit:
    beta: NDArray
    leverages: NDArray
    residuals: NDArray


@dataclass(frozen=True)
class BetaFit:
    """Weighted least squares fit for a given psi; ``cov = (X' Sigma^-1 X)^-1``."""

    beta: NDArray
    cov: NDArray
    psi_used: float


@dataclass(frozen=True)
class Prediction:
    theta_hat: NDArray
    shrinkage: NDArray
    synthetic: NDArray
    fit: BetaFit


# -- kernels ---------------------------------------------------------------


def spd_inverse(M: NDArray) -> NDArray:
    """Inverse of a stack of small symmetric positive-definite matrices.

    Cholesky factorisation with a relative pivot test: the k-th pivot must
    exceed ``PIVOT_TOL * M[k, k]``, otherwise :class:`SingularDesignError`.
    """
    M = np.asarray(M, dtype=float)
    p = M.shape[-1]
    if p == 1:
        piv = M[..., 0, 0]
        if not np.all(piv > 0):
            raise SingularDesignError("design matrix is rank deficient")
        return (1.0 / piv)[..., None, None]

    L = np.zeros_like(M)
    for j in range(p):
        mjj = M[..., j, j]
        s = mjj - np.sum(L[..., j, :j] ** 2, axis=-1)
        if not np.all((s > PIVOT_TOL * mjj) & (mjj > 0)):
            raise SingularDesignError(
                f"design matrix is rank deficient (pivot {j} below tolerance)"
            )
        L[..., j, j] = np.sqrt(s)
        for i in range(j + 1, p):
            L[..., i, j] = (
                M[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            ) / L[..., j, j]

    # forward substitution for L^{-1}, then M^{-1} = L^{-T} L^{-1}
    Linv = np.zeros_like(M)
    for i in range(p):
        Linv[..., i, i] = 1.0 / L[..., i, i]
        for j in range(i):
            acc = np.sum(L[..., i, j:i] * Linv[..., j:i, j], axis=-1)
            Linv[..., i, j] = -acc / L[..., i, i]
    inv = np.swapaxes(Linv, -1, -2) @ Linv
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def gls_kernel(y, x, d, psi):
    """Batched GLS with diagonal ``Sigma = diag(psi + d)``.

    Returns ``(beta, cov, weights)`` where ``weights = 1 / (psi + d)``.
    ``psi`` has the batch shape; ``y``/``d`` broadcast to ``batch + (m,)`` and
    ``x`` to ``batch + (m, p)``.
    """
    psi = np.asarray(psi, dtype=float)
    w = 1.0 / (psi[..., None] + d)
    xw = x * w[..., None]
    xwt = np.swapaxes(xw, -1, -2)
    cov = spd_inverse(xwt @ x)
    beta = (cov @ (xwt @ y[..., None]))[..., 0]
    return beta, cov, w


def ols_kernel(y, x):
    """Batched OLS sharing one design; returns ``(beta, leverages, residuals)``."""
    xtx_inv = spd_inverse(x.T @ x)
    # same operation order as gls_kernel, so psi=0 with unit D reproduces it bit for bit
    beta = (xtx_inv @ (x.T @ y[..., None]))[..., 0]
    lev = np.einsum("jk,kl,jl->j", x, xtx_inv, x)
    resid = y - beta @ x.T
    return beta, lev, resid


# -- public API --------------------------------------------------------------


def leverages(data: AreaDataset) -> NDArray:
    """Diagonal of the OLS hat matrix, ``h_jj = x_j' (X'X)^-1 x_j``."""
    xtx_inv = spd_inverse(data.x.T @ data.x)
    return np.einsum("jk,kl,jl->j", data.x, xtx_inv, data.x)


def fit_ols(data: AreaDataset) -> OlsFit:
    beta, lev, resid = ols_kernel(data.y, data.x)
    return OlsFit(beta=beta, leverages=lev, residuals=resid)


def fit_gls(data: AreaDataset, psi: float) -> BetaFit:
    """Weighted least squares estimate of beta at a fixed psi >= 0."""
    psi = _check_psi(psi)
    beta, cov, _ = gls_kernel(data.y, data.x, data.d, np.float64(psi))
    return BetaFit(beta=beta, cov=cov, psi_used=psi)


def shrinkage(d: ArrayLike, psi) -> NDArray:
    """``B_i = psi / (psi + D_i)``; zero exactly when psi is zero."""
    psi = np.asarray(psi, dtype=float)
    return psi[..., None] / (psi[..., None] + d)


def predict(data: AreaDataset, psi: float) -> Prediction:
    """BLUP at a given psi, or EBLUP when psi is an estimate.

    ``theta_hat_i = B_i Y_i + (1 - B_i) x_i' beta_hat(psi)``.
    """
    fit = fit_gls(data, psi)
    synthetic = data.x @ fit.beta
    B = shrinkage(data.d, fit.psi_used)
    theta = B * data.y + (1.0 - B) * synthetic
    return Prediction(theta_hat=theta, shrinkage=B, synthetic=synthetic, fit=fit)


def check_regularity(data: AreaDataset) -> list[str]:
    """Warn (never raise) when the design is far from the bounded regime.

    Returns the list of issued messages.
    """
    msgs = []
    try:
        h = leverages(data)
    except SingularDesignError:
        return msgs
    limit = LEVERAGE_WARN_FACTOR * data.p / data.m
    if h.max() > limit:
        msgs.append(f"max leverage {h.max():.4g} exceeds 4p/m = {limit:.4g}")
    ratio = data.d.max() / data.d.min()
    if ratio > D_RATIO_WARN:
        msgs.append(f"sampling variance ratio max(D)/min(D) = {ratio:.4g} exceeds 1e4")
    for msg in msgs:
        warnings.warn(msg, RegularityWarning, stacklevel=2)
    return msgs


def _check_psi(psi) -> float:
    psi = float(psi)
    if not (psi >= 0 and math.isfinite(psi)):
        raise ValueError(f"psi must be finite and >= 0, got {psi}")
    return psi
