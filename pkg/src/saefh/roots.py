"""Vectorised bisection for stacks of decreasing scalar equations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class BisectionResult:
    root: NDArray
    residual: NDArray
    iterations: NDArray
    converged: NDArray
    lo: NDArray
    hi: NDArray


def bisect_decreasing(f, lo, hi, tol: float, max_iter: int, f_lo=None, f_hi=None,
                      polish: bool = True) -> BisectionResult:
    """Find ``x`` with ``|f(x)| <= tol`` on brackets where ``f(lo) > 0 > f(hi)``.

    ``f`` maps an array of abscissae to an array of the same shape and must
    act elementwise, so each problem's iterates are independent of the
    others in the stack.  Converged entries are frozen; the loop stops when
    all have converged, a bracket collapses to adjacent floats, or
    ``max_iter`` halvings have been spent.

    With ``polish`` (and endpoint values ``f_lo``/``f_hi`` supplied), each
    converged root gets one secant step inside its final sign-change
    bracket; the step is kept only if it lowers ``|f|``.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    polish = polish and f_lo is not None and f_hi is not None
    if polish:
        flo = np.array(np.broadcast_to(f_lo, lo.shape), dtype=float)
        fhi = np.array(np.broadcast_to(f_hi, lo.shape), dtype=float)
    root = 0.5 * (lo + hi)
    resid = np.full(lo.shape, np.inf)
    iters = np.zeros(lo.shape, dtype=np.int64)
    done = np.zeros(lo.shape, dtype=bool)
    stuck = np.zeros(lo.shape, dtype=bool)

    for _ in range(max_iter):
        active = ~(done | stuck)
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        # bracket already at adjacent doubles: no further progress possible
        collapsed = active & ((mid <= lo) | (mid >= hi))
        stuck |= collapsed
        active &= ~collapsed
        fm = f(mid)
        iters += active
        root = np.where(active, mid, root)
        resid = np.where(active, fm, resid)
        done |= active & (np.abs(fm) <= tol)
        step = active & ~done
        right = step & (fm > 0)
        left = step & (fm <= 0)
        lo = np.where(right, mid, lo)
        hi = np.where(left, mid, hi)
        if polish:
            flo = np.where(right, fm, flo)
            fhi = np.where(left, fm, fhi)

    if polish and done.any():
        # sub-bracket around the accepted midpoint
        a = np.where(resid > 0, root, lo)
        fa = np.where(resid > 0, resid, flo)
        b = np.where(resid > 0, hi, root)
        fb = np.where(resid > 0, fhi, resid)
        denom = fa - fb
        ok = done & (denom > 0) & np.isfinite(denom)
        cand = np.where(ok, a + fa * (b - a) / np.where(ok, denom, 1.0), root)
        cand = np.clip(cand, a, b)
        fc = f(cand)
        better = ok & (np.abs(fc) < np.abs(resid))
        root = np.where(better, cand, root)
        resid = np.where(better, fc, resid)

    return BisectionResult(root=root, residual=resid, iterations=iters,
                           converged=done, lo=lo, hi=hi)
