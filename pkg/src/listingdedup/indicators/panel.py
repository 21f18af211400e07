"""Unit-week panel, unit-level outcomes and zone aggregates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..model import city_of

# physical characteristics used as controls
CONTROLS = ("floor_area", "rooms", "bathrooms", "floor", "maintenance", "elevator")
LEADS_LAGS = tuple(range(-4, 5))
AD_WEEK_COLUMNS = ("ad_id", "week", "clicks", "price")


def offset_name(k: int) -> str:
    """Column holding CLICKS at week t+k (``CLICKS_m1`` is the previous week)."""
    if k == 0:
        return "CLICKS_0"
    return f"CLICKS_{'m' if k < 0 else 'p'}{abs(k)}"


# --- ad-week records --------------------------------------------------------


def ad_weeks_from_snapshots(snapshots) -> pd.DataFrame:
    rows = [(ad.id, s.week, ad.clicks_by_week.get(s.week, 0), ad.asking_price)
            for s in snapshots for ad in s.ads]
    df = pd.DataFrame(rows, columns=list(AD_WEEK_COLUMNS))
    df["week"] = pd.to_datetime(df["week"])
    return df


def write_ad_weeks(df: pd.DataFrame, path) -> None:
    out = df.copy()
    out["week"] = pd.to_datetime(out["week"]).dt.date.astype(str)
    out.to_csv(path, index=False, columns=list(AD_WEEK_COLUMNS))


def read_ad_weeks(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"ad_id": str})
    missing = set(AD_WEEK_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"clicks file lacks columns {sorted(missing)}")
    df["week"] = pd.to_datetime(df["week"])
    return df


def units_frame(units) -> pd.DataFrame:
    rows = []
    for u in units:
        rec = {
            "unit_id": u.id, "zone": u.zone_id or "", "city": city_of(u.zone_id),
            "entry": pd.Timestamp(u.entry_date),
            "exit": pd.Timestamp(u.exit_date) if u.exit_date else pd.NaT,
            "n_ads": len(u.member_ad_ids), "unit_area": u.floor_area,
        }
        for c in CONTROLS:
            v = getattr(u, c)
            rec[c] = np.nan if v is None else float(v)
        for c in ("garden", "terrace"):
            v = getattr(u, c)
            rec[c] = np.nan if v is None else float(v)
        rows.append(rec)
    return pd.DataFrame(rows)


def impute_by_zone(df: pd.DataFrame, columns, zone="zone") -> pd.DataFrame:
    """Fill gaps with the zone median (overall median when a zone has none)."""
    df = df.copy()
    with warnings.catch_warnings():
        # zones where a control is entirely missing fall back to the overall median
        warnings.simplefilter("ignore", RuntimeWarning)
        for c in columns:
            med = df.groupby(zone)[c].transform("median")
            df[c] = df[c].fillna(med).fillna(df[c].median())
    return df


# --- panel ------------------------------------------------------------------


@dataclass
class Panel:
    weekly: pd.DataFrame  # one row per live unit and week
    units: pd.DataFrame  # one row per unit
    first_week: pd.Timestamp
    members: pd.DataFrame  # ad_id, unit_id


def _membership(units) -> pd.DataFrame:
    pairs = [(a, u.id) for u in units for a in u.member_ad_ids]
    return pd.DataFrame(pairs, columns=["ad_id", "unit_id"])


def build_panel(units, ad_weeks: pd.DataFrame) -> Panel:
    """Weekly unit observations and unit outcomes from units and ad-week records.

    CLICKS is the mean over a unit's live ads of average daily clicks
    (weekly clicks / 7); PRICE the mean asking price of live ads per square
    meter. The zone average ``ZAVG`` is the mean CLICKS over live units of the
    zone in that week. ONLINT is the unit's summed CLICKS over its listed
    weeks divided by the summed zone averages over the same weeks; ONLINT2
    does the same over the unit's first two listed weeks (its first 14 days).
    """
    units = list(units)
    uf = units_frame(units)
    mem = _membership(units)
    aw = ad_weeks.merge(mem, on="ad_id", how="inner")
    if len(aw) == 0:
        raise ValueError("no ad-week record belongs to a unit")
    aw["daily"] = aw["clicks"] / 7.0
    g = aw.groupby(["unit_id", "week"], sort=True)
    weekly = g.agg(CLICKS=("daily", "mean"), ad_price=("price", "mean"), n_live=("ad_id", "size")).reset_index()
    weekly = weekly.merge(uf, on="unit_id", how="left")
    weekly["PRICE"] = weekly["ad_price"] / weekly["unit_area"]
    weekly["DUPL"] = (weekly["n_live"] > 1).astype(float)
    weekly["z"] = (weekly["week"] - weekly["entry"]).dt.days.astype(float)
    weekly["zone_week"] = weekly["zone"] + "|" + weekly["week"].dt.strftime("%Y-%m-%d")
    weekly["ZAVG"] = weekly.groupby(["zone", "week"])["CLICKS"].transform("mean")
    weekly["ZPRICE"] = weekly.groupby(["zone", "week"])["PRICE"].transform("mean")

    weekly = weekly.sort_values(["unit_id", "week"]).reset_index(drop=True)
    by_unit = weekly.groupby("unit_id", sort=False)
    prev_week = by_unit["week"].shift(1)
    contiguous = (weekly["week"] - prev_week) == pd.Timedelta(days=7)
    prev_n = by_unit["n_live"].shift(1)
    weekly["NEWDUPL"] = np.where(contiguous, (weekly["n_live"] > prev_n).astype(float), np.nan)
    week_index = {w: i for i, w in enumerate(sorted(weekly["week"].unique()))}
    weekly["t"] = weekly["week"].map(week_index).astype(int)
    key = weekly.set_index(["unit_id", "t"])
    for k in LEADS_LAGS:
        shifted = pd.MultiIndex.from_arrays([weekly["unit_id"], weekly["t"] + k])
        weekly[offset_name(k)] = key["CLICKS"].reindex(shifted).to_numpy()
        if k == -1:
            weekly["PRICE_lag1"] = key["PRICE"].reindex(shifted).to_numpy()
    weekly["CLICKS_lag1"] = weekly[offset_name(-1)]
    weekly = impute_by_zone(weekly, CONTROLS)

    # unit-level outcomes
    weekly["order"] = by_unit.cumcount()
    life = weekly.groupby("unit_id").agg(
        clicks_sum=("CLICKS", "sum"), zavg_sum=("ZAVG", "sum"), weeks_listed=("week", "size"),
        price_mean=("PRICE", "mean"), zprice_mean=("ZPRICE", "mean"),
    )
    first2 = weekly[weekly["order"] < 2].groupby("unit_id").agg(
        c2=("CLICKS", "sum"), z2=("ZAVG", "sum"), n2=("week", "size"))
    life = life.join(first2)
    life["ONLINT"] = life["clicks_sum"] / life["zavg_sum"]
    life["ONLINT2"] = np.where(life["n2"] == 2, life["c2"] / life["z2"], np.nan)
    life["RELPRICE"] = life["price_mean"] / life["zprice_mean"]
    ad_cut = aw.sort_values(["ad_id", "week"]).groupby("ad_id")["price"].apply(
        lambda p: bool((np.diff(p.to_numpy()) < 0).any()))
    cut = mem.assign(cut=mem["ad_id"].map(ad_cut).fillna(False).astype(bool)).groupby("unit_id")["cut"].any()
    ut = uf.set_index("unit_id").join(life, how="inner")
    ut["PRICEREF"] = cut.reindex(ut.index).fillna(False).astype(float)
    ut["TOM"] = (ut["exit"] - ut["entry"]).dt.days.astype(float)
    first = weekly["week"].min()
    ut["in_window"] = ut["entry"] > first - pd.Timedelta(days=7)
    ut["exit_quarter"] = ut["exit"].dt.to_period("Q").astype(str).where(ut["exit"].notna())
    ut["entry_quarter"] = ut["entry"].dt.to_period("Q").astype(str)
    ut = impute_by_zone(ut.reset_index(), CONTROLS)
    return Panel(weekly.drop(columns=["order"]), ut, first, mem)


# --- zone aggregates --------------------------------------------------------


def period_of(weeks: pd.Series, freq: str = "Q") -> pd.Series:
    return weeks.dt.to_period(freq).astype(str)


def zone_aggregates(panel: Panel, ad_weeks: pd.DataFrame | None = None, freq: str = "Q") -> pd.DataFrame:
    """Per zone and period: demand, prices, liquidity and supply composition.

    DEMAND is mean daily clicks per ad (over ad-weeks when ``ad_weeks`` is
    given, else over unit-weeks); LIQUIDITY is units delisted in the period
    over units on the market in it. A unit whose exit falls in a period after
    its last listed week counts in that period's stock as well.
    """
    w = panel.weekly.copy()
    w["period"] = period_of(w["week"], freq)
    units = panel.units.set_index("unit_id")
    u_exit = units.dropna(subset=["exit"]).copy()
    u_exit["period"] = period_of(u_exit["exit"], freq)
    stock = pd.concat([w[["zone", "period", "unit_id"]],
                       u_exit.reset_index()[["zone", "period", "unit_id"]]])
    listed = stock.groupby(["zone", "period"])["unit_id"].nunique().rename("listings")
    delist = u_exit.groupby(["zone", "period"]).size().rename("delistings")
    agg = w.groupby(["zone", "period"]).agg(AVPRICE=("PRICE", "mean"), DEMAND=("CLICKS", "mean"))
    if ad_weeks is not None:
        aw = ad_weeks.merge(panel.members, on="ad_id").join(units["zone"], on="unit_id")
        aw["period"] = period_of(aw["week"], freq)
        aw["daily"] = aw["clicks"] / 7.0
        agg["DEMAND"] = aw.groupby(["zone", "period"])["daily"].mean().reindex(agg.index)
    comp = w.drop_duplicates(["unit_id", "period"]).merge(
        units[["garden", "terrace"]].rename(columns={"garden": "g", "terrace": "tr"}),
        left_on="unit_id", right_index=True, how="left")
    comp["bath2"] = (comp["bathrooms"] >= 2).astype(float)
    comp["private_garden"] = (comp["g"] == 3).astype(float)
    comp["has_terrace"] = (comp["tr"] == 1).astype(float)
    c = comp.groupby(["zone", "period"]).agg(
        mean_area=("floor_area", "mean"), BATH=("bath2", "mean"),
        GARDEN=("private_garden", "mean"), TERRACE=("has_terrace", "mean"))
    out = listed.to_frame().join(agg).join(delist).join(c)
    out["delistings"] = out["delistings"].fillna(0).astype(int)
    out["LIQUIDITY"] = out["delistings"] / out["listings"]
    out["FLOORAREA"] = np.log(out["mean_area"])
    out = out.reset_index()
    out["city"] = out["zone"].map(city_of)
    return out


def relative_interest(unit_clicks, zone_averages) -> float:
    """Summed unit clicks over summed zone averages for the same weeks."""
    unit_clicks = np.asarray(unit_clicks, dtype=float)
    zone_averages = np.asarray(zone_averages, dtype=float)
    if unit_clicks.shape != zone_averages.shape or len(unit_clicks) == 0:
        raise ValueError("need matching, non-empty click and zone-average series")
    return float(unit_clicks.sum() / zone_averages.sum())


__all__ = [
    "CONTROLS", "Panel", "ad_weeks_from_snapshots", "build_panel", "impute_by_zone",
    "offset_name", "read_ad_weeks", "relative_interest", "units_frame", "write_ad_weeks",
    "zone_aggregates",
]
