"""Comparison of listing-based measures with external statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..ingest import mean_zone_price
from ..time_machine import InsufficientDataError
from .panel import Panel, period_of

MIN_OVERLAP = 3


@dataclass
class ValidationReport:
    delistings_sales_corr: float
    n_city_quarters: int
    zone_price_corr: float
    n_zone_periods: int
    mean_discount: float
    tom: dict = field(default_factory=dict)
    survey: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "delistings_sales_corr": self.delistings_sales_corr,
            "n_city_quarters": self.n_city_quarters,
            "zone_price_corr": self.zone_price_corr,
            "n_zone_periods": self.n_zone_periods,
            "mean_discount": self.mean_discount,
            **{f"tom_{k}": v for k, v in self.tom.items()},
            **{f"survey_{k}": v for k, v in self.survey.items()},
        }


def _pearson(x, y, what) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < MIN_OVERLAP:
        raise InsufficientDataError(f"{what}: only {len(x)} aligned observations")
    if np.std(x) == 0 or np.std(y) == 0:
        raise InsufficientDataError(f"{what}: a series is constant")
    return float(np.corrcoef(x, y)[0, 1])


def _series(external, kind) -> pd.DataFrame:
    rows = [(e.period, e.key, e.value1, e.value2) for e in external if e.kind == kind]
    return pd.DataFrame(rows, columns=["period", "key", "value1", "value2"])


def delistings_vs_sales(units: pd.DataFrame, external) -> tuple:
    """Quarterly city delistings joined to reported sales; returns (corr, table)."""
    u = units.dropna(subset=["exit"])
    delist = u.assign(period=period_of(u["exit"], "Q")).groupby(["city", "period"]).size().rename("delistings")
    sales = _series(external, "city_sales").rename(columns={"key": "city", "value1": "sales"})
    t = sales.set_index(["city", "period"])[["sales"]].join(delist, how="inner").reset_index()
    return _pearson(t["delistings"], t["sales"], "delistings vs sales"), t


def zone_prices_vs_bounds(panel: Panel, external) -> tuple:
    """Zone mean asking price per m2 against the midpoint of published bounds, per semester."""
    w = panel.weekly
    sem = w["week"].dt.year.astype(str) + "S" + np.where(w["week"].dt.month <= 6, "1", "2")
    asking = w.assign(period=sem).groupby(["zone", "period"])["PRICE"].mean().rename("asking")
    b = _series(external, "zone_price_bounds")
    if len(b):
        b["value"] = [mean_zone_price(lo, hi) for lo, hi in zip(b["value1"], b["value2"])]
    b = b.rename(columns={"key": "zone"})
    t = b.set_index(["zone", "period"])[["value"]].join(asking, how="inner").reset_index()
    return _pearson(t["asking"], t["value"], "zone prices vs bounds"), t


def tom_summary(units: pd.DataFrame) -> dict:
    tom = units["TOM"].dropna()
    if len(tom) == 0:
        return {"n": 0}
    q = np.percentile(tom, [25, 50, 75])
    return {"n": int(len(tom)), "mean": float(tom.mean()), "p25": float(q[0]),
            "median": float(q[1]), "p75": float(q[2])}


def validation_stats(panel: Panel, external) -> ValidationReport:
    """Correlations and levels of listing measures against external series.

    Delistings of units per city and quarter are correlated with reported
    sales; zone asking prices with the midpoint of the published value
    bounds. The mean discount is ``mean(1 - P_zone / asking)``.
    """
    corr_s, ts = delistings_vs_sales(panel.units, external)
    corr_p, tp = zone_prices_vs_bounds(panel, external)
    survey = {}
    for kind, name in (("survey_discount", "discount"), ("survey_tom", "tom_months")):
        s = _series(external, kind)
        if len(s):
            survey[name] = float(s["value1"].mean())
    return ValidationReport(
        corr_s, len(ts), corr_p, len(tp),
        float(np.mean(1.0 - tp["value"] / tp["asking"])),
        tom_summary(panel.units), survey,
    )


__all__ = ["ValidationReport", "delistings_vs_sales", "tom_summary", "validation_stats",
           "zone_prices_vs_bounds"]
