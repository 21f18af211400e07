"""Panel construction, regressions, price indexes and validation statistics."""

from .models import (model_demand_lead, model_eq1, model_eq2, model_eq3, model_priceref, model_supply,
                     model_tom)
from .panel import Panel, ad_weeks_from_snapshots, build_panel, read_ad_weeks, write_ad_weeks, zone_aggregates
from .prices import PriceIndex, hedonic_index, implied_discount, implied_sale
from .regress import (NonConvergenceError, RankDeficiencyError, RegressionResult, SeparationError,
                      fit_logit, fit_ols_fe)
from .validation import ValidationReport, validation_stats

__all__ = [
    "NonConvergenceError", "Panel", "PriceIndex", "RankDeficiencyError", "RegressionResult",
    "SeparationError", "ValidationReport", "ad_weeks_from_snapshots", "build_panel", "fit_logit",
    "fit_ols_fe", "hedonic_index", "implied_discount", "implied_sale", "model_demand_lead", "model_eq1",
    "model_eq2", "model_eq3", "model_priceref", "model_supply", "model_tom", "read_ad_weeks",
    "validation_stats", "write_ad_weeks", "zone_aggregates",
]
