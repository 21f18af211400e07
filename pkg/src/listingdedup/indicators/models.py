"""Regression specifications on the unit panel and on zone aggregates."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .panel import CONTROLS, LEADS_LAGS, Panel, offset_name
from .regress import RegressionResult, fit_logit, fit_ols_fe

MIN_LISTINGS_SUPPLY = 50


def _weekly(panel) -> pd.DataFrame:
    return panel.weekly if isinstance(panel, Panel) else panel


def model_eq1(panel) -> RegressionResult:
    """DUPL on contemporaneous CLICKS and PRICE, controls, zone-by-week effects."""
    return fit_ols_fe(_weekly(panel), "DUPL", ["CLICKS", "PRICE", *CONTROLS], fe=["zone_week"])


def model_eq2(panel) -> RegressionResult:
    """NEWDUPL on last week's CLICKS and PRICE, controls and days listed."""
    return fit_ols_fe(_weekly(panel), "NEWDUPL", ["CLICKS_lag1", "PRICE_lag1", *CONTROLS, "z"],
                      fe=["zone_week"])


def model_eq3(panel) -> RegressionResult:
    """NEWDUPL on CLICKS at offsets -4..+4 weeks (``CLICKS_m1`` = previous week)."""
    clicks = [offset_name(k) for k in LEADS_LAGS]
    return fit_ols_fe(_weekly(panel), "NEWDUPL", [*clicks, "PRICE_lag1", *CONTROLS, "z"],
                      fe=["zone_week"])


def tom_sample(panel: Panel, single_ad=True, max_entry=None) -> pd.DataFrame:
    """Units listed within the window that have exited (optionally entered before ``max_entry``)."""
    u = panel.units
    keep = u["in_window"] & u["exit"].notna() & (u["TOM"] > 0) & (u["ONLINT"] > 0)
    if single_ad:
        keep &= u["n_ads"] == 1
    if max_entry is not None:
        keep &= u["entry"] <= pd.Timestamp(max_entry)
    out = u[keep].copy()
    out["log_TOM"] = np.log(out["TOM"])
    out["log_ONLINT"] = np.log(out["ONLINT"])
    return out


def model_tom(panel: Panel, max_entry=None) -> RegressionResult:
    """log TOM on log ONLINT, relative price and controls; zone and entry-quarter effects.

    Only single-ad units listed within the observation window enter. Quarter
    effects are keyed on entry: given entry, the exit quarter is a function of
    TOM itself and would absorb part of the outcome.
    """
    data = tom_sample(panel, True, max_entry)
    fe = ["zone"] + (["entry_quarter"] if data["entry_quarter"].nunique() > 1 else [])
    return fit_ols_fe(data, "log_TOM", ["log_ONLINT", "RELPRICE", *CONTROLS], fe=fe)


def priceref_sample(panel: Panel, min_weeks: int = 3) -> pd.DataFrame:
    """Single-ad units listed within the window, seen for at least ``min_weeks`` weeks."""
    u = panel.units
    keep = u["in_window"] & (u["n_ads"] == 1) & (u["weeks_listed"] >= min_weeks) & u["ONLINT2"].notna()
    return u[keep].copy()


def model_priceref(panel: Panel, min_weeks: int = 3) -> RegressionResult:
    """Logit of a downward revision on ONLINT2, relative price and controls.

    ``exp(0.01 * beta)`` is the odds ratio for a 0.01 (one percent of the
    zone average) increase in first-fortnight relative interest.
    """
    data = priceref_sample(panel, min_weeks)
    fe = ["zone"] + (["entry_quarter"] if data["entry_quarter"].nunique() > 1 else [])
    return fit_logit(data, "PRICEREF", ["ONLINT2", "RELPRICE", *CONTROLS], fe=fe)


def _lagged(agg: pd.DataFrame, col: str, k: int) -> pd.Series:
    order = {p: i for i, p in enumerate(sorted(agg["period"].unique()))}
    idx = agg["period"].map(order)
    key = pd.Series(agg[col].to_numpy(), index=pd.MultiIndex.from_arrays([agg["zone"], idx]))
    return pd.Series(key.reindex(pd.MultiIndex.from_arrays([agg["zone"], idx - k])).to_numpy(), index=agg.index)


def model_demand_lead(agg: pd.DataFrame, response: str = "AVPRICE") -> RegressionResult:
    """log Y on log DEMAND lagged one and two periods and lagged log Y; city and period effects."""
    d = agg.copy()
    d["log_Y"] = np.log(d[response])
    d["log_DEMAND"] = np.log(d["DEMAND"])
    d["log_DEMAND_lag1"] = _lagged(d, "log_DEMAND", 1)
    d["log_DEMAND_lag2"] = _lagged(d, "log_DEMAND", 2)
    d["log_Y_lag1"] = _lagged(d, "log_Y", 1)
    return fit_ols_fe(d, "log_Y", ["log_DEMAND_lag1", "log_DEMAND_lag2", "log_Y_lag1"], fe=["city", "period"])


def supply_sample(agg: pd.DataFrame, min_listings: int = MIN_LISTINGS_SUPPLY) -> pd.DataFrame:
    """Zones with at least ``min_listings`` listings in every period with listed homes."""
    agg = agg[agg["mean_area"].notna()]
    ok = agg.groupby("zone")["listings"].transform("min") >= min_listings
    return agg[ok]


def model_supply(agg: pd.DataFrame, response: str = "FLOORAREA",
                 min_listings: int = MIN_LISTINGS_SUPPLY) -> RegressionResult:
    """Composition measure on the city's log hedonic index (``HEDON``); city and period effects."""
    return fit_ols_fe(supply_sample(agg, min_listings), response, ["HEDON"], fe=["city", "period"])
