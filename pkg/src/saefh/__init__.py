"""Empirical best linear unbiased prediction under the Fay-Herriot model
with MSPE estimators that stay second-order unbiased when the random
effects and sampling errors are not normal."""

from .errors import (
    InvalidDatasetError,
    RegularityWarning,
    SaeError,
    SingularDesignError,
    SolverFailureError,
    StudyAbortedError,
    UndefinedKurtosisError,
    UndefinedRatioError,
)
from .fh_model import AreaDataset, AreaRecord, fit_gls, fit_ols, leverages, predict, shrinkage
from .kurtosis import estimate_kappa_v, jackknife_variance, kappa_v_details, solve_kappa_v
from .mspe import GTerms, MspeReport, amspe, estimate_mspe, g_terms
from .survey_moments import (
    AreaUnitSample,
    area_moments,
    direct_mean,
    poisson_fourth_moment,
    poisson_variance,
    sampling_kurtosis,
)
from .variance_components import (
    Method,
    PsiEstimate,
    PsiMoments,
    SolverConfig,
    c_factor,
    estimate_psi,
    estimate_psi_fh,
    estimate_psi_pr,
    fh_moment_residual,
    psi_moments,
)

__version__ = "0.1.0"

__all__ = [
    "AreaDataset", "AreaRecord", "AreaUnitSample", "GTerms", "InvalidDatasetError",
    "Method", "MspeReport", "PsiEstimate", "PsiMoments", "RegularityWarning", "SaeError",
    "SingularDesignError", "SolverConfig", "SolverFailureError", "StudyAbortedError",
    "UndefinedKurtosisError", "UndefinedRatioError", "amspe", "area_moments", "c_factor",
    "direct_mean", "estimate_kappa_v", "estimate_mspe", "estimate_psi", "estimate_psi_fh",
    "estimate_psi_pr", "fh_moment_residual", "fit_gls", "fit_ols", "g_terms",
    "jackknife_variance", "kappa_v_details", "leverages", "poisson_fourth_moment",
    "poisson_variance", "predict", "psi_moments", "sampling_kurtosis", "shrinkage",
    "solve_kappa_v",
]
