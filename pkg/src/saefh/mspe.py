"""Second-order MSPE approximation and MSPE estimators for the EBLUP.

Per area ``i`` the approximation is ``g1 + g2 + g3 + 2*g4`` where

* ``g1 = psi D_i / (psi + D_i)`` and ``g2`` is the synthetic-part variance,
* ``g3 = D_i^2 / (psi + D_i)^3 * var(psi_hat)``,
* ``g4 = psi D_i^2 / (m (psi + D_i)^3) * (D_i kappa_ei - psi kappa_v) * c_i``,

and the estimator replaces psi by its estimate and corrects the bias of
``g1(psi_hat)`` with ``g5 = D_i^2 / (psi + D_i)^2 * bias(psi_hat)``::

    mspe_i = g1 + g2 + 2*g3 + 2*g4 - g5

Three families are reported: ``naive`` (g1 + g2), ``normal`` (the
normality-based estimator: Prasad-Rao for PR, Datta-Rao-Smith for FH) and
``robust`` (the kurtosis-corrected estimator above).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .fh_model import AreaDataset, check_regularity, fit_gls, gls_kernel, shrinkage
from .kurtosis import estimate_kappa_v
from .variance_components import (
    DEFAULT_SOLVER,
    Method,
    PsiEstimate,
    SolverConfig,
    c_factor_kernel,
    estimate_psi,
    moments_kernel,
)


@dataclass(frozen=True)
class GTerms:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float


@dataclass(frozen=True)
class MspeReport:
    """Per-area EBLUP and MSPE estimates, index-aligned with the dataset.

    ``naive``/``normal``/``robust`` are the published estimates; the
    ``*_raw`` arrays keep the unfloored values for diagnostics.
    """

    ids: tuple[str, ...]
    theta_hat: NDArray
    shrinkage: NDArray
    naive: NDArray
    normal: NDArray
    robust: NDArray
    normal_raw: NDArray
    robust_raw: NDArray
    method: Method
    psi_hat: PsiEstimate
    kappa_v_used: float

    def rows(self):
        for i, area in enumerate(self.ids):
            yield {
                "id": area,
                "theta_hat": float(self.theta_hat[i]),
                "B": float(self.shrinkage[i]),
                "psi_hat": self.psi_hat.value,
                "mspe_naive": float(self.naive[i]),
                "mspe_normal": float(self.normal[i]),
                "mspe_robust": float(self.robust[i]),
            }


def g_terms_kernel(method: Method, x, d, kappa_e, psi, kappa_v, cov):
    """All g-terms for every area, batched over ``psi``.

    ``cov`` is ``(X' Sigma^-1(psi) X)^-1`` with shape ``batch + (p, p)``.
    Returns a dict of arrays shaped ``batch + (m,)`` holding ``g1``..``g5``
    plus the split of ``var(psi_hat)`` and ``bias(psi_hat)`` into normal and
    non-normal parts (``var_n``, ``eta``, ``bias_n``, ``alpha``; batch shape).
    """
    psi = np.asarray(psi, dtype=float)
    kappa_v = np.asarray(kappa_v, dtype=float)
    m = d.shape[-1]
    ps = psi[..., None]
    s = ps + d
    d2 = d * d
    a5 = d2 / (s * s)
    a3 = a5 / s
    q = np.einsum("...jk,...kl,...jl->...j", x, cov, x)
    bias_n, alpha, var_n, eta = moments_kernel(method, psi, kappa_v, d, kappa_e)
    c = c_factor_kernel(method, psi, d)
    return {
        "g1": ps * (d / s),  # d / s <= 1 keeps g1 <= psi even for subnormal psi
        "g2": a5 * q,
        "g3": a3 * (var_n + eta)[..., None],
        "g4": ps * a3 / m * (d * kappa_e - ps * kappa_v[..., None]) * c,
        "g5": a5 * (bias_n + alpha)[..., None],
        "a3": a3,
        "a5": a5,
        "var_n": var_n,
        "eta": eta,
        "bias_n": bias_n,
        "alpha": alpha,
    }


def mspe_kernel(method: Method, x, d, kappa_e, psi_hat, kappa_v_hat, cov):
    """Naive, normality-based and robust estimates (raw, unfloored).

    The robust estimate is built as the normality-based one plus the
    non-normal corrections so that it coincides bit-for-bit with it
    whenever those corrections vanish.
    """
    g = g_terms_kernel(method, x, d, kappa_e, psi_hat, kappa_v_hat, cov)
    a3, a5 = g["a3"], g["a5"]
    naive = g["g1"] + g["g2"]
    normal = naive + 2.0 * a3 * g["var_n"][..., None] - a5 * g["bias_n"][..., None]
    robust = normal + (
        2.0 * a3 * g["eta"][..., None] + 2.0 * g["g4"] - a5 * g["alpha"][..., None]
    )
    return naive, normal, robust


def apply_floor(raw, naive):
    """Replace negative estimates by the (nonnegative) naive value."""
    return np.where(raw >= 0, raw, naive)


def g_terms(data: AreaDataset, i: int, psi: float, kappa_v: float, method) -> GTerms:
    method = Method.parse(method)
    if not 0 <= i < data.m:
        raise IndexError(f"area index {i} out of range for m={data.m}")
    fit = fit_gls(data, psi)
    g = g_terms_kernel(method, data.x, data.d, data.kappa_e, np.float64(psi),
                       np.float64(kappa_v), fit.cov)
    return GTerms(*(float(g[k][i]) for k in ("g1", "g2", "g3", "g4", "g5")))


def amspe(data: AreaDataset, i: int, psi: float, kappa_v: float, method) -> float:
    """Second-order MSPE approximation ``g1 + g2 + g3 + 2*g4`` at true parameters."""
    g = g_terms(data, i, psi, kappa_v, method)
    return g.g1 + g.g2 + g.g3 + 2.0 * g.g4


def estimate_mspe(
    data: AreaDataset,
    method,
    kappa_v_hat: float | str | None = None,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> MspeReport:
    """EBLUP and all three MSPE estimator families for every area.

    For ``PR`` the robust estimator does not depend on ``kappa_v`` and
    ``kappa_v_hat`` is ignored (recorded as 0).  For ``FH`` pass an estimate,
    or ``None``/``"auto"`` to estimate it by the weighted jackknife.
    """
    method = Method.parse(method)
    check_regularity(data)
    est = estimate_psi(data, method, cfg)
    if method is Method.PR:
        kv = 0.0
    elif kappa_v_hat is None or kappa_v_hat == "auto":
        kv = estimate_kappa_v(data, cfg)
    else:
        kv = float(kappa_v_hat)

    psi = np.float64(est.value)
    beta, cov, _ = gls_kernel(data.y, data.x, data.d, psi)
    B = shrinkage(data.d, psi)
    theta = B * data.y + (1.0 - B) * (data.x @ beta)
    naive, normal, robust = mspe_kernel(method, data.x, data.d, data.kappa_e, psi, kv, cov)
    return MspeReport(
        ids=data.ids,
        theta_hat=theta,
        shrinkage=B,
        naive=naive,
        normal=apply_floor(normal, naive),
        robust=apply_floor(robust, naive),
        normal_raw=normal,
        robust_raw=robust,
        method=method,
        psi_hat=est,
        kappa_v_used=kv,
    )
