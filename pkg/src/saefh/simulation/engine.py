"""Monte Carlo engine: replicate generation, estimation and aggregation.

Replicates are processed in fixed-size chunks.  Each chunk draws its
effects from per-replicate counter-based streams and runs the same
vectorised estimation kernels the library uses for a single dataset, so a
replicate's numbers depend only on ``(master_seed, replicate index)``.
Chunks may run on a thread pool; results are written by replicate index and
reduced in index order, which keeps output bit-identical for any thread
count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import StudyAbortedError
from ..fh_model import gls_kernel, ols_kernel, shrinkage
from ..kurtosis import jackknife_kernel, kappa_v_kernel
from ..mspe import apply_floor, mspe_kernel
from ..variance_components import (
    DEFAULT_SOLVER,
    Method,
    SolverConfig,
    psi_fh_kernel,
    psi_pr_kernel,
)
from .design import Balanced, TypeII, parse_design
from .distributions import TAG_E, TAG_V, EffectDistribution, draw_centered, make_stream
from .summary import ESTIMATORS, LOW_PRECISION_REPLICATES, StudyResult, summarize

log = logging.getLogger(__name__)

FAILURE_LIMIT = 0.001
_JACKKNIFE_CELLS = 1_500_000


@dataclass(frozen=True)
class StudyConfig:
    m: int
    design: object = field(default_factory=Balanced)
    psi_true: float = 1.0
    dist_v: EffectDistribution = field(default_factory=lambda: EffectDistribution("normal"))
    dist_e: EffectDistribution = field(default_factory=lambda: EffectDistribution("normal"))
    replicates: int = 10_000
    method: Method = Method.PR
    master_seed: int = 0
    solver: SolverConfig = DEFAULT_SOLVER

    def __post_init__(self):
        object.__setattr__(self, "design", parse_design(self.design))
        object.__setattr__(self, "method", Method.parse(self.method))
        for name in ("dist_v", "dist_e"):
            val = getattr(self, name)
            if not isinstance(val, EffectDistribution):
                object.__setattr__(self, name, EffectDistribution(val))
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.psi_true > 0:
            raise ValueError("psi_true must be > 0")
        if self.m < 3:
            raise ValueError("m must be at least 3")
        if isinstance(self.design, TypeII) and self.m % 5:
            raise ValueError(f"type-II design needs m divisible by 5, got {self.m}")


def default_threads() -> int:
    env = os.environ.get("SAE_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            log.warning("ignoring non-integer SAE_THREADS=%r", env)
    return n


def chunk_size(cfg: StudyConfig) -> int:
    if cfg.method is Method.FH:
        return max(1, _JACKKNIFE_CELLS // (cfg.m * cfg.m))
    return 1000


def draw_effects(cfg: StudyConfig, start: int, stop: int):
    """``(v, e)`` arrays of shape ``(stop - start, m)``.

    ``v`` has variance ``psi_true`` and ``e_i`` variance ``D_i``; only the
    shape (kind) of the configured distributions is used.
    """
    n = stop - start
    v = np.empty((n, cfg.m))
    e = np.empty((n, cfg.m))
    unit_v = EffectDistribution(cfg.dist_v.kind, 1.0)
    unit_e = EffectDistribution(cfg.dist_e.kind, 1.0)
    for j, r in enumerate(range(start, stop)):
        v[j] = draw_centered(unit_v, make_stream(cfg.master_seed, r, TAG_V), cfg.m)
        e[j] = draw_centered(unit_e, make_stream(cfg.master_seed, r, TAG_E), cfg.m)
    v *= np.sqrt(cfg.psi_true)
    e *= np.sqrt(cfg.design.variances(cfg.m))
    return v, e


def run_chunk(cfg: StudyConfig, start: int, stop: int) -> dict:
    """Estimate everything for replicates ``start..stop-1``."""
    m = cfg.m
    d = cfg.design.variances(m)
    kappa_e = np.full(m, cfg.dist_e.kurtosis)
    x = np.ones((m, 1))
    v, e = draw_effects(cfg, start, stop)
    y = v + e  # mean zero, intercept still estimated

    if cfg.method is Method.PR:
        psi, raw = psi_pr_kernel(y, x, d)
        truncated = raw < 0
        failed = np.zeros(y.shape[0], dtype=bool)
    else:
        sol = psi_fh_kernel(y, x, d, cfg.solver)
        failed = sol.failed.copy()
        psi = np.where(failed, 0.0, sol.value)
        truncated = sol.truncated

    beta, cov, _ = gls_kernel(y, x, d, psi)
    B = shrinkage(d, psi)
    theta_hat = B * y + (1.0 - B) * (x @ beta[..., None])[..., 0]
    sq_err = (theta_hat - v) ** 2

    if cfg.method is Method.FH:
        weights = 1.0 - ols_kernel(y[:1], x)[1]
        _, v_wj, jfail = jackknife_kernel(y, x, d, psi, weights, cfg.solver)
        failed |= jfail.any(axis=-1)
        kv = kappa_v_kernel(psi, np.where(failed, 0.0, v_wj), d, kappa_e)[0]
    else:
        kv = np.zeros(y.shape[0])

    naive, normal, robust = mspe_kernel(cfg.method, x, d, kappa_e, psi, kv, cov)
    return {
        "sq_err": sq_err,
        "naive": naive,
        "normal": apply_floor(normal, naive),
        "robust": apply_floor(robust, naive),
        "psi_hat": psi,
        "truncated": truncated,
        "kappa_v_hat": kv,
        "failed": failed,
    }


def simulate_replicates(cfg: StudyConfig, threads: int | None = None) -> dict:
    """Per-replicate arrays for the whole study, in replicate order."""
    R, m = cfg.replicates, cfg.m
    out = {
        "sq_err": np.empty((R, m)),
        "naive": np.empty((R, m)),
        "normal": np.empty((R, m)),
        "robust": np.empty((R, m)),
        "psi_hat": np.empty(R),
        "truncated": np.empty(R, dtype=bool),
        "kappa_v_hat": np.empty(R),
        "failed": np.empty(R, dtype=bool),
    }
    size = chunk_size(cfg)
    bounds = [(s, min(s + size, R)) for s in range(0, R, size)]

    def work(bound):
        s, t = bound
        res = run_chunk(cfg, s, t)
        for k, arr in res.items():
            out[k][s:t] = arr

    threads = threads or default_threads()
    if threads <= 1 or len(bounds) == 1:
        for b in bounds:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    return out


def run_study(cfg: StudyConfig, threads: int | None = None, keep_draws: bool = False) -> StudyResult:
    """Run the Monte Carlo study and summarise RB/RRMSE per group and estimator.

    Replicates whose moment equation fails to converge are dropped and
    counted; if they reach 0.1% of the replicates the study is aborted.
    """
    draws = simulate_replicates(cfg, threads)
    failed = draws["failed"]
    n_failed = int(failed.sum())
    if n_failed and n_failed >= FAILURE_LIMIT * cfg.replicates:
        first = int(np.flatnonzero(failed)[0])
        raise StudyAbortedError(
            f"{n_failed} of {cfg.replicates} replicates failed (first at replicate {first})"
        )
    if n_failed:
        log.warning("skipping %d failed replicates", n_failed)
        keep = ~failed
        draws = {k: a[keep] for k, a in draws.items()}

    d = cfg.design.variances(cfg.m)
    truth = draws["sq_err"].mean(axis=0)
    summaries = []
    for est in ESTIMATORS:
        summaries += summarize(draws[est], truth, d, draws["sq_err"], estimator=est)
    # order rows group-major so each group's estimators sit together
    order = {lab: i for i, lab in enumerate(dict.fromkeys(s.group for s in summaries))}
    summaries.sort(key=lambda s: (order[s.group], ESTIMATORS.index(s.estimator)))

    used = int(draws["psi_hat"].shape[0])
    return StudyResult(
        config=cfg,
        summaries=summaries,
        true_mspe=truth,
        mean_mspe={est: draws[est].mean(axis=0) for est in ESTIMATORS},
        d=d,
        replicates_used=used,
        n_failed=n_failed,
        mean_psi_hat=float(draws["psi_hat"].mean()),
        truncation_rate=float(draws["truncated"].mean()),
        mean_kappa_v=float(draws["kappa_v_hat"].mean()) if cfg.method is Method.FH else float("nan"),
        low_precision=used < LOW_PRECISION_REPLICATES,
        draws=draws if keep_draws else {},
    )
