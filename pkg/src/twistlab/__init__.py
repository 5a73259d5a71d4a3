"""Numerical experiments on twisted central L-values of modular forms."""

from .afe import AFEConfig, CentralValueFamily, central_values_batch, family
from .analysis import (MollifierSpec, RankBoundSpec, ResonatorSpec, eta3_estimate, mollified_moments,
                       mollifier_coeffs, nonvanishing_report, rank_bound, resonator_run)
from .chargroup import CharacterGroup, build as character_group
from .config import RunConfig
from .hecke import Newform, get_form
from .moments import MomentReport, first_moment, second_moment

__version__ = "0.1.0"

__all__ = [
    "AFEConfig", "CentralValueFamily", "CharacterGroup", "MollifierSpec", "MomentReport", "Newform",
    "RankBoundSpec", "ResonatorSpec", "RunConfig", "central_values_batch", "character_group",
    "eta3_estimate", "family", "first_moment", "get_form", "mollified_moments", "mollifier_coeffs",
    "nonvanishing_report", "rank_bound", "resonator_run", "second_moment",
]
