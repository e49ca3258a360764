"""Random-effect kurtosis from a weighted delete-one jackknife.

The jackknife variance ``v_WJ = sum_u (1 - h_uu) (psi_(-u) - psi)^2`` of the
FH estimate is matched to its asymptotic variance, which is linear in
``kappa_v``; solving gives a closed form for the kurtosis estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidDatasetError, SolverFailureError
from .fh_model import AreaDataset, leverages
from .variance_components import DEFAULT_SOLVER, SolverConfig, psi_fh_kernel, traces

KAPPA_FLOOR = -2.0
UNSTABLE_L = 1e-12


@dataclass(frozen=True)
class JackknifeResult:
    v_wj: float
    leave_one_out: NDArray
    weights: NDArray
    psi_full: float


@dataclass(frozen=True)
class KappaSolution:
    value: float
    unclamped: float
    unstable: bool


def _deletion_index(m: int) -> NDArray:
    """Row u lists every area index except u."""
    idx = np.broadcast_to(np.arange(m), (m, m))
    return idx[~np.eye(m, dtype=bool)].reshape(m, m - 1)


def jackknife_kernel(y, x, d, psi_full, weights, cfg: SolverConfig = DEFAULT_SOLVER):
    """Leave-one-out FH estimates for a stack of response vectors.

    ``y`` has shape ``batch + (m,)`` while ``x`` (m, p) and ``d`` (m,) are
    shared.  Returns ``(loo, v_wj, failed)`` with ``loo``/``failed`` of shape
    ``batch + (m,)``.
    """
    m = x.shape[0]
    idx = _deletion_index(m)
    y_del = y[..., idx]                        # batch + (m, m-1)
    sol = psi_fh_kernel(y_del, x[idx], d[idx], cfg)
    loo = sol.value
    diff = loo - np.asarray(psi_full)[..., None]
    v_wj = np.sum(weights * diff * diff, axis=-1)
    return loo, v_wj, sol.failed


def kappa_v_kernel(psi_hat, v_wj, d, kappa_e):
    """Closed-form ``kappa_v = -k / l`` (0 when ``psi_hat`` is 0).

    Returns ``(clamped, unclamped, unstable)``.
    """
    psi_hat = np.asarray(psi_hat, dtype=float)
    m = d.shape[-1]
    t = traces(psi_hat, d, kappa_e)
    k = 2.0 * m + t["dp2"] - t["t1"] ** 2 * v_wj
    l = t["t2"] * psi_hat**2
    pos = psi_hat > 0
    with np.errstate(divide="ignore"):  # l underflows only for subnormal psi; flagged below
        raw = np.where(pos, -k / np.where(pos, l, 1.0), 0.0)
    unstable = pos & (np.abs(l) < UNSTABLE_L)
    return np.maximum(raw, KAPPA_FLOOR), raw, unstable


def jackknife_variance(data: AreaDataset, cfg: SolverConfig = DEFAULT_SOLVER) -> JackknifeResult:
    """Weighted jackknife variance of the FH estimate of psi.

    Every leave-one-out estimate is a full re-solve of the moment equation;
    the weights ``1 - h_uu`` use the full-data leverages.
    """
    if data.m - 1 <= data.p:
        raise InvalidDatasetError(
            f"jackknife needs m - 1 > p, got m={data.m}, p={data.p}"
        )
    full = psi_fh_kernel(data.y, data.x, data.d, cfg)
    if full.failed:
        raise SolverFailureError("FH moment equation did not converge on the full data",
                                 bracket=(float(full.lo), float(full.hi)))
    weights = 1.0 - leverages(data)
    loo, v_wj, failed = jackknife_kernel(data.y, data.x, data.d, full.value, weights, cfg)
    if failed.any():
        u = int(np.flatnonzero(failed)[0])
        raise SolverFailureError(
            f"FH moment equation did not converge with area {data.ids[u]!r} deleted",
            area=data.ids[u],
        )
    return JackknifeResult(v_wj=float(v_wj), leave_one_out=loo, weights=weights,
                           psi_full=float(full.value))


def solve_kappa_v(data: AreaDataset, psi_hat: float, v_wj: float) -> KappaSolution:
    value, raw, unstable = kappa_v_kernel(np.float64(psi_hat), v_wj, data.d, data.kappa_e)
    return KappaSolution(value=float(value), unclamped=float(raw), unstable=bool(unstable))


def kappa_v_details(data: AreaDataset, cfg: SolverConfig = DEFAULT_SOLVER):
    """``(KappaSolution, JackknifeResult)`` for the dataset."""
    jk = jackknife_variance(data, cfg)
    return solve_kappa_v(data, jk.psi_full, jk.v_wj), jk


def estimate_kappa_v(data: AreaDataset, cfg: SolverConfig = DEFAULT_SOLVER) -> float:
    """Kurtosis of the random effects, clamped below at -2."""
    sol, _ = kappa_v_details(data, cfg)
    return sol.value
