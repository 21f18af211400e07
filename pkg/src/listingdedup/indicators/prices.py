"""Hedonic asking-price index and the discount implied by asking and sale indexes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..time_machine import InsufficientDataError
from .panel import CONTROLS, Panel, impute_by_zone, period_of
from .regress import fit_ols_fe


@dataclass
class PriceIndex:
    periods: list
    values: np.ndarray  # base period = 100
    base: str
    n_obs: int

    def as_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.periods, name="index")

    def log_changes(self) -> np.ndarray:
        return np.diff(np.log(self.values))


def unit_period_prices(panel: Panel, freq: str = "Q") -> pd.DataFrame:
    """One row per unit and period with the mean asking price per square meter."""
    w = panel.weekly.copy()
    w["period"] = period_of(w["week"], freq)
    rows = w.groupby(["unit_id", "period"], as_index=False).agg(
        PRICE=("PRICE", "mean"), zone=("zone", "first"), city=("city", "first"))
    return rows.merge(panel.units[["unit_id", *CONTROLS]], on="unit_id", how="left")


def hedonic_index(rows: pd.DataFrame, city=None, periods=None, controls=CONTROLS,
                  min_obs: int = 30, base=None) -> PriceIndex:
    """Time-dummy hedonic index of asking price per square meter.

    ``log(PRICE)`` is regressed on ``controls``, zone effects and period
    dummies; the index is ``100 * exp(delta_t - delta_base)``. ``rows`` needs
    columns ``PRICE``, ``zone``, ``period`` and the controls (and ``city`` when
    ``city`` is given). Missing controls are filled with zone medians.
    """
    d = rows
    if city is not None:
        d = d[d["city"] == city]
    if periods is not None:
        d = d[d["period"].isin(list(periods))]
    d = d[d["PRICE"] > 0]
    plist = sorted(d["period"].unique()) if periods is None else [p for p in periods if p in set(d["period"])]
    counts = d["period"].value_counts()
    thin = [p for p in plist if counts.get(p, 0) < min_obs]
    if len(plist) < 2:
        raise InsufficientDataError(f"need at least two periods, found {len(plist)}")
    if thin:
        raise InsufficientDataError(f"need >= {min_obs} units per period; short: {thin}")
    if base is None:
        base = plist[0]
    if base not in plist:
        raise ValueError(f"base period {base!r} has no data")
    d = impute_by_zone(d, [c for c in controls if c in d.columns])
    d = d.assign(log_price=np.log(d["PRICE"].to_numpy(dtype=float)))
    others = [p for p in plist if p != base]
    dummies = []
    for p in others:
        col = f"period_{p}"
        d[col] = (d["period"] == p).astype(float)
        dummies.append(col)
    varying = [c for c in controls if c in d.columns and d[c].nunique() > 1]
    res = fit_ols_fe(d, "log_price", [*dummies, *varying], fe=["zone"])
    delta = {base: 0.0}
    delta.update({p: res[f"period_{p}"] for p in others})
    values = np.array([100.0 * np.exp(delta[p]) for p in plist])
    return PriceIndex(plist, values, base, res.n_obs)


def _check_path(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError(f"{name} must be a non-empty 1-d path")
    if not np.all(x > 0):
        raise ValueError(f"{name} must be positive")
    return x


def implied_discount(asking, sale, d0: float, literal: bool = False) -> np.ndarray:
    """Average discount path implied by an asking and a sale price index.

    With the buyer convention ``P_sale = (1 - d) * P_ask`` the discount is
    ``d_t = 1 - (1 - d0) * (S_t / S_0) / (A_t / A_0)``. ``literal=True`` swaps
    the roles of the two indexes.
    """
    a, s = _check_path(asking, "asking index"), _check_path(sale, "sale index")
    if a.shape != s.shape:
        raise ValueError("index paths differ in length")
    if not 0 <= d0 < 1:
        raise ValueError("d0 must lie in [0, 1)")
    ra, rs = a / a[0], s / s[0]
    ratio = ra / rs if literal else rs / ra
    return 1.0 - (1.0 - d0) * ratio


def implied_sale(asking, discount, d0: float, sale0: float = 100.0, literal: bool = False) -> np.ndarray:
    """Inverse of :func:`implied_discount`: the sale index path starting at ``sale0``."""
    a = _check_path(asking, "asking index")
    d = np.asarray(discount, dtype=float)
    if d.shape != a.shape:
        raise ValueError("index paths differ in length")
    if not 0 <= d0 < 1 or np.any(d >= 1):
        raise ValueError("discounts must be below 1")
    ra = a / a[0]
    ratio = (1.0 - d) / (1.0 - d0)
    rs = ra / ratio if literal else ra * ratio
    return sale0 * rs


__all__ = ["PriceIndex", "hedonic_index", "implied_discount", "implied_sale", "unit_period_prices"]
