"""Relative bias / relative RMSE summaries and report formatting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..errors import UndefinedRatioError
from .design import group_labels

ESTIMATORS = ("naive", "normal", "robust")
LOW_PRECISION_REPLICATES = 1000


@dataclass(frozen=True)
class GroupSummary:
    """Group-averaged accuracy of one MSPE estimator, all in percent.

    ``rel_mse`` is ``100 * E(mspe - MSPE)^2 / MSPE`` (no square root), kept
    alongside ``rrmse`` for comparison with published tables.
    """

    group: str
    d: float
    estimator: str
    rb: float
    rrmse: float
    mc_se_rb: float
    rel_mse: float


def summarize(mspe_draws, truth, d, squared_errors=None, estimator: str = "") -> list[GroupSummary]:
    """Per-area RB/RRMSE averaged over areas with equal D.

    ``RB_i = 100 (E mspe_i - MSPE_i) / MSPE_i`` and
    ``RRMSE_i = 100 sqrt(E (mspe_i - MSPE_i)^2) / MSPE_i`` with ``E`` the
    mean over replicates (axis 0).  When the per-replicate squared errors
    that produced ``truth`` are supplied, the Monte Carlo standard error of
    the group RB accounts for ``truth`` being estimated from the same
    replicates (delta method); otherwise ``truth`` is treated as fixed.
    """
    draws = np.atleast_2d(np.asarray(mspe_draws, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if draws.shape[1:] != truth.shape:
        raise ValueError(f"draws {draws.shape} and truth {truth.shape} are not aligned")
    if np.any(truth == 0):
        raise UndefinedRatioError("true MSPE is zero for at least one area")
    R = draws.shape[0]
    mean = draws.mean(axis=0)
    dev = draws - truth
    mse = np.mean(dev * dev, axis=0)
    rb = 100.0 * (mean - truth) / truth
    rrmse = 100.0 * np.sqrt(mse) / truth
    rel_mse = 100.0 * mse / truth

    if squared_errors is not None:
        ratio = mean / truth
        lin = 100.0 * (draws - ratio * np.asarray(squared_errors, dtype=float)) / truth
    else:
        lin = 100.0 * draws / truth

    out = []
    labels, levels, members = group_labels(d)
    for label, level, ix in zip(labels, levels, members):
        u = lin[:, ix].mean(axis=1)
        se = float(np.std(u, ddof=1) / math.sqrt(R)) if R > 1 else math.nan
        out.append(GroupSummary(
            group=label, d=level, estimator=estimator,
            rb=float(rb[ix].mean()), rrmse=float(rrmse[ix].mean()),
            mc_se_rb=se, rel_mse=float(rel_mse[ix].mean()),
        ))
    return out


@dataclass
class StudyResult:
    config: object
    summaries: list[GroupSummary]
    true_mspe: NDArray
    mean_mspe: dict[str, NDArray]
    d: NDArray
    replicates_used: int
    n_failed: int
    mean_psi_hat: float
    truncation_rate: float
    mean_kappa_v: float
    low_precision: bool
    draws: dict[str, NDArray] = field(default_factory=dict, repr=False)

    def get(self, group: str, estimator: str) -> GroupSummary:
        for s in self.summaries:
            if s.group == group and s.estimator == estimator:
                return s
        raise KeyError((group, estimator))

    def csv_rows(self):
        for s in self.summaries:
            yield {
                "group": s.group, "D": s.d, "estimator": s.estimator,
                "rb_pct": s.rb, "rrmse_pct": s.rrmse, "mc_se_rb": s.mc_se_rb,
            }

    def text_table(self) -> str:
        cfg = self.config
        normal_name = "PR" if str(getattr(cfg.method, "value", cfg.method)) == "PR" else "DRS"
        heads = ("Naive", normal_name, "Proposed")
        lines = [
            "Percent relative bias (relative RMSE) of MSPE estimators",
            f"m={cfg.m}  design={cfg.design}  psi={cfg.psi_true:g}  "
            f"v~{cfg.dist_v.kind.value}  e~{cfg.dist_e.kind.value}  "
            f"method={getattr(cfg.method, 'value', cfg.method)}  R={self.replicates_used}  "
            f"seed={cfg.master_seed}",
            "",
            f"{'Group':<7}{'D':>6}  " + "".join(f"{h:>18}" for h in heads),
        ]
        groups = []
        for s in self.summaries:
            if (s.group, s.d) not in groups:
                groups.append((s.group, s.d))
        for g, dval in groups:
            cells = []
            for est in ESTIMATORS:
                s = self.get(g, est)
                cells.append(f"{s.rb:8.2f} ({s.rrmse:6.2f})")
            lines.append(f"{g:<7}{dval:>6g}  " + "".join(f"{c:>18}" for c in cells))
        lines += [
            "",
            f"mean psi_hat={self.mean_psi_hat:.6g}  truncation rate={self.truncation_rate:.4g}"
            + ("" if math.isnan(self.mean_kappa_v) else f"  mean kappa_v_hat={self.mean_kappa_v:.6g}"),
            f"failed replicates={self.n_failed}"
            + ("  [low precision: few replicates]" if self.low_precision else ""),
        ]
        return "\n".join(lines) + "\n"
