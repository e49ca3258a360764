"""Monte Carlo study of MSPE estimators under non-normal effects."""

from .design import Balanced, TypeII, design_type2, parse_design
from .distributions import EffectDistribution, Kind, draw_centered, make_stream
from .engine import StudyConfig, run_study, simulate_replicates
from .summary import GroupSummary, StudyResult, summarize

__all__ = [
    "Balanced",
    "EffectDistribution",
    "GroupSummary",
    "Kind",
    "StudyConfig",
    "StudyResult",
    "TypeII",
    "design_type2",
    "draw_centered",
    "make_stream",
    "parse_design",
    "run_study",
    "simulate_replicates",
    "summarize",
]
