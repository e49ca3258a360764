"""Moment estimators of the random-effect variance psi and their moments.

Two estimators are provided: the simple closed-form moment estimator
(``Method.PR``) built from OLS residuals and leverages, and the iterative
weighted-residual estimator (``Method.FH``) that solves
``A(psi) = Y'Q(psi)Y / (m - p) - 1 = 0``.

:func:`psi_moments` returns the order-1/m bias and variance of either
estimator when the random effects and sampling errors have arbitrary
kurtosis.  All traces involve diagonal matrices only and are computed as
sums over the area axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import SolverFailureError
from .fh_model import AreaDataset, gls_kernel, ols_kernel
from .roots import bisect_decreasing


class Method(str, enum.Enum):
    PR = "PR"
    FH = "FH"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown method {value!r}; expected 'PR' or 'FH'") from None


@dataclass(frozen=True)
class SolverConfig:
    abs_tolerance: float = 1e-10
    max_iterations: int = 200
    bracket_ceiling_factor: float = 10.0

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise ValueError("abs_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.bracket_ceiling_factor > 1:
            raise ValueError("bracket_ceiling_factor must be > 1")


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True)
class PsiEstimate:
    value: float
    method: Method
    truncated: bool
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True)
class PsiMoments:
    bias_n: float
    alpha: float
    var_n: float
    eta: float

    @property
    def total_bias(self) -> float:
        return self.bias_n + self.alpha

    @property
    def total_var(self) -> float:
        return self.var_n + self.eta


# -- kernels ---------------------------------------------------------------


def psi_pr_kernel(y, x, d):
    """Closed-form moment estimate for a stack of response vectors.

    ``x`` and ``d`` are shared across the stack.  Returns
    ``(value, untruncated)``.
    """
    m, p = x.shape
    _, lev, resid = ols_kernel(y, x)
    raw = (np.sum(resid * resid, axis=-1) - np.sum((1.0 - lev) * d)) / (m - p)
    return np.maximum(raw, 0.0), raw


def fh_residual_kernel(y, x, d, psi):
    """``A(psi)`` for a stack of problems (see :func:`gls_kernel` for shapes)."""
    beta, _, w = gls_kernel(y, x, d, psi)
    r = y - (x @ beta[..., None])[..., 0]
    m, p = x.shape[-2:]
    return np.sum(w * r * r, axis=-1) / (m - p) - 1.0


@dataclass(frozen=True)
class FhSolution:
    value: NDArray
    truncated: NDArray
    iterations: NDArray
    residual: NDArray
    failed: NDArray
    lo: NDArray
    hi: NDArray


def psi_fh_kernel(y, x, d, cfg: SolverConfig = DEFAULT_SOLVER) -> FhSolution:
    """Solve ``A(psi) = 0`` for every problem in a stack.

    Problems with ``A(0) <= 0`` are truncated to 0.  Otherwise the bracket
    ``(0, hi]`` starts at the mean squared OLS residual and is grown by
    ``cfg.bracket_ceiling_factor`` until ``A(hi) < 0``; bisection then runs
    to ``|A| <= cfg.abs_tolerance``.  Entries that cannot be bracketed or do
    not converge are flagged in ``failed`` rather than raised, so callers
    decide the policy.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    batch = np.broadcast_shapes(y.shape[:-1], x.shape[:-2], d.shape[:-1])
    y = np.broadcast_to(y, batch + y.shape[-1:])

    def A(psi):
        return fh_residual_kernel(y, x, d, psi)

    a0 = A(np.zeros(batch))
    truncated = a0 <= 0

    # starting ceiling from OLS residuals (per problem; x may differ per problem)
    beta0, _, _ = gls_kernel(y, x, np.ones_like(d), np.zeros(batch))
    r0 = y - (x @ beta0[..., None])[..., 0]
    hi = np.mean(r0 * r0, axis=-1)
    hi = np.where(hi > 0, hi, 1.0)
    a_hi = A(hi)
    need = ~truncated & (a_hi >= 0)
    grow = 0
    while need.any() and grow < cfg.max_iterations:
        hi = np.where(need, hi * cfg.bracket_ceiling_factor, hi)
        a_hi = np.where(need, A(hi), a_hi)
        need = need & (a_hi >= 0)
        grow += 1
    unbracketed = need

    active_hi = np.where(truncated | unbracketed, 1.0, hi)
    lo = np.zeros(batch)

    def f(psi):
        out = A(psi)
        # frozen problems: report a converged zero so bisection ignores them
        return np.where(truncated | unbracketed, 0.0, out)

    res = bisect_decreasing(f, lo, active_hi, cfg.abs_tolerance, cfg.max_iterations,
                            f_lo=np.where(truncated | unbracketed, 1.0, a0),
                            f_hi=np.where(truncated | unbracketed, -1.0, a_hi))
    value = np.where(truncated, 0.0, res.root)
    residual = np.where(truncated, np.abs(a0), np.abs(res.residual))
    iters = np.where(truncated, 0, res.iterations)
    failed = unbracketed | (~truncated & ~res.converged)
    value = np.where(failed, np.nan, value)
    return FhSolution(value=value, truncated=truncated, iterations=iters,
                      residual=residual, failed=failed,
                      lo=np.where(unbracketed, hi, res.lo), hi=np.where(unbracketed, np.inf, res.hi))


def traces(psi, d, kappa_e):
    """Trace quantities used by the bias/variance formulas.

    Returns a dict of arrays with the batch shape of ``psi``: ``t1``, ``t2``,
    ``t3`` (traces of Sigma^-1, ^-2, ^-3), ``dp`` (tr D^2 Phi), ``dp2``,
    ``dp3`` (tr D^2 Phi Sigma^-2, ^-3) and ``s2`` (tr Sigma^2).
    """
    psi = np.asarray(psi, dtype=float)
    s = psi[..., None] + d
    inv = 1.0 / s
    inv2 = inv * inv
    dphi = d * d * kappa_e
    return {
        "t1": np.sum(inv, axis=-1),
        "t2": np.sum(inv2, axis=-1),
        "t3": np.sum(inv2 * inv, axis=-1),
        "dp": np.sum(np.broadcast_to(dphi, s.shape), axis=-1),
        "dp2": np.sum(dphi * inv2, axis=-1),
        "dp3": np.sum(dphi * inv2 * inv, axis=-1),
        "s2": np.sum(s * s, axis=-1),
    }


def moments_kernel(method: Method, psi, kappa_v, d, kappa_e):
    """``(bias_n, alpha, var_n, eta)`` arrays with the batch shape of ``psi``."""
    psi = np.asarray(psi, dtype=float)
    kappa_v = np.asarray(kappa_v, dtype=float)
    m = d.shape[-1]
    t = traces(psi, d, kappa_e)
    if method is Method.PR:
        var_n = 2.0 * t["s2"] / m**2
        eta = (kappa_v * psi**2 + t["dp"] / m) / m
        zero = np.zeros_like(var_n)
        return zero, zero, var_n, eta
    t1, t2, t3 = t["t1"], t["t2"], t["t3"]
    t1_cubed = t1**3
    bias_n = 2.0 * (m * t2 - t1 * t1) / t1_cubed
    alpha = ((t2 * t2 - t3 * t1) / t1_cubed) * psi**2 * kappa_v + (
        t["dp2"] * t2 - t1 * t["dp3"]
    ) / t1_cubed
    var_n = 2.0 * m / (t1 * t1)
    eta = (t2 * kappa_v * psi**2 + t["dp2"]) / (t1 * t1)
    return bias_n, alpha, var_n, eta


def c_factor_kernel(method: Method, psi, d):
    """Per-area cross-product factor; shape ``batch + (m,)``."""
    psi = np.asarray(psi, dtype=float)
    if method is Method.PR:
        return np.ones(psi.shape + d.shape[-1:])
    m = d.shape[-1]
    t1 = np.sum(1.0 / (psi[..., None] + d), axis=-1)
    return m / ((psi[..., None] + d) * t1[..., None])


# -- public API --------------------------------------------------------------


def estimate_psi_pr(data: AreaDataset) -> PsiEstimate:
    value, raw = psi_pr_kernel(data.y, data.x, data.d)
    return PsiEstimate(value=float(value), method=Method.PR, truncated=bool(raw < 0))


def fh_moment_residual(data: AreaDataset, psi: float) -> float:
    """``A(psi) = (m-p)^-1 sum_j (D_j+psi)^-1 (Y_j - x_j' beta(psi))^2 - 1``."""
    psi = float(psi)
    if not psi >= 0:
        raise ValueError(f"psi must be >= 0, got {psi}")
    return float(fh_residual_kernel(data.y, data.x, data.d, np.float64(psi)))


def estimate_psi_fh(data: AreaDataset, cfg: SolverConfig = DEFAULT_SOLVER) -> PsiEstimate:
    sol = psi_fh_kernel(data.y, data.x, data.d, cfg)
    if sol.failed:
        raise SolverFailureError(
            f"FH moment equation did not converge in {cfg.max_iterations} iterations; "
            f"last bracket [{float(sol.lo)}, {float(sol.hi)}]",
            bracket=(float(sol.lo), float(sol.hi)),
        )
    return PsiEstimate(
        value=float(sol.value), method=Method.FH, truncated=bool(sol.truncated),
        iterations=int(sol.iterations), residual=float(sol.residual),
    )


def estimate_psi(data: AreaDataset, method, cfg: SolverConfig = DEFAULT_SOLVER) -> PsiEstimate:
    method = Method.parse(method)
    if method is Method.PR:
        return estimate_psi_pr(data)
    return estimate_psi_fh(data, cfg)


def psi_moments(method, psi: float, kappa_v: float, data: AreaDataset) -> PsiMoments:
    """Order-1/m bias and variance of the psi estimator at true (psi, kappa_v).

    For ``PR`` the bias is of smaller order and reported as zero.  The
    non-normal parts ``alpha`` and ``eta`` vanish when every kurtosis is 0.
    """
    method = Method.parse(method)
    if not psi >= 0:
        raise ValueError(f"psi must be >= 0, got {psi}")
    if not kappa_v >= -2:
        raise ValueError(f"kappa_v must be >= -2, got {kappa_v}")
    b, a, v, e = moments_kernel(method, np.float64(psi), kappa_v, data.d, data.kappa_e)
    return PsiMoments(bias_n=float(b), alpha=float(a), var_n=float(v), eta=float(e))


def c_factor(method, psi: float, i: int, data: AreaDataset) -> float:
    method = Method.parse(method)
    if not 0 <= i < data.m:
        raise IndexError(f"area index {i} out of range for m={data.m}")
    return float(c_factor_kernel(method, np.float64(psi), data.d)[i])
