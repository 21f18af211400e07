"""Weekly snapshot files, week-over-week deltas and external reference series."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .model import Ad, ValidationError, ad_to_record, validate_ad

log = logging.getLogger(__name__)

SNAPSHOT_FIELDS = (
    "id", "agency_id", "zone_id", "lat", "lon", "price", "floor_area", "floor",
    "rooms", "bathrooms", "maintenance", "energy_class", "garage", "garden",
    "kitchen", "elevator", "balcony", "terrace", "janitor", "utility_room",
    "air_conditioning", "basement", "heating", "property_type", "description",
    "created_on", "clicks",
)
EXTERNAL_FIELDS = ("kind", "period", "zone_or_city", "value1", "value2")
EXTERNAL_KINDS = ("zone_price_bounds", "city_sales", "survey_discount", "survey_tom")

_DATE_IN_NAME = re.compile(r"(\d{4}-\d{2}-\d{2})")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True)
class Snapshot:
    week: dt.date
    ads: tuple = ()
    errors: tuple = ()

    def __post_init__(self):
        ids = [ad.id for ad in self.ads]
        if len(ids) != len(set(ids)):
            raise ValueError("ad ids must be unique within a snapshot")

    @property
    def ids(self) -> frozenset:
        return frozenset(ad.id for ad in self.ads)

    def by_id(self) -> dict:
        return {ad.id: ad for ad in self.ads}


@dataclass(frozen=True)
class WeekDelta:
    week: dt.date
    new_ads: tuple = ()
    updated_ads: tuple = ()
    removed_ad_ids: frozenset = frozenset()
    click_updates: dict = field(default_factory=dict)

    def __post_init__(self):
        new = {a.id for a in self.new_ads}
        upd = {a.id for a in self.updated_ads}
        if new & upd or new & self.removed_ad_ids or upd & self.removed_ad_ids:
            raise ValueError("delta id sets must be pairwise disjoint")

    @property
    def empty(self) -> bool:
        return not (self.new_ads or self.updated_ads or self.removed_ad_ids)


@dataclass(frozen=True)
class ExternalSeries:
    kind: str
    period: str
    key: str
    value1: float
    value2: Optional[float] = None

    def __post_init__(self):
        if self.kind not in EXTERNAL_KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")
        if self.kind == "zone_price_bounds":
            if self.value2 is None or not 0 < self.value1 <= self.value2:
                raise ValueError("zone price bounds need 0 < P_l <= P_h")
        if self.kind == "city_sales" and self.value1 < 0:
            raise ValueError("sales counts must be nonnegative")


# --- snapshots --------------------------------------------------------------


def week_from_path(path) -> dt.date:
    m = _DATE_IN_NAME.search(Path(path).name)
    if not m:
        raise ValueError(f"cannot infer snapshot week from file name {Path(path).name!r}")
    return dt.date.fromisoformat(m.group(1))


def parse_snapshot(path, week: Optional[dt.date] = None, schemes=None) -> Snapshot:
    """Read a JSON-lines snapshot; bad rows are skipped and reported in ``errors``."""
    week = week_from_path(path) if week is None else week
    ads, errors, seen = [], [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(RowError(lineno, f"malformed row: {exc.msg}"))
                continue
            if not isinstance(raw, dict):
                errors.append(RowError(lineno, "malformed row: not an object"))
                continue
            try:
                ad = validate_ad(raw, week=week, schemes=schemes)
            except ValidationError as exc:
                errors.append(RowError(lineno, str(exc)))
                continue
            if ad.id in seen:
                errors.append(RowError(lineno, f"duplicate id {ad.id}"))
                continue
            seen.add(ad.id)
            ads.append(ad)
    for err in errors:
        log.warning("%s:%d: %s", path, err.line, err.message)
    return Snapshot(week, tuple(ads), tuple(errors))


def write_snapshot(snapshot: Snapshot, path, schemes=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ad in snapshot.ads:
            rec = ad_to_record(ad, week=snapshot.week, schemes=schemes, full=False)
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=False) + "\n")


def snapshot_filename(week: dt.date) -> str:
    return f"snapshot_{week.isoformat()}.jsonl"


def load_stream(directory, schemes=None) -> list:
    """All snapshots in ``directory``, oldest first."""
    paths = sorted(Path(directory).glob("snapshot_*.jsonl"), key=week_from_path)
    return [parse_snapshot(p, schemes=schemes) for p in paths]


def diff_snapshots(prev: Snapshot, nxt: Snapshot) -> WeekDelta:
    if not prev.week < nxt.week:
        raise ValueError("snapshots out of order")
    before = prev.by_id()
    new, updated, clicks = [], [], {}
    for ad in nxt.ads:
        old = before.get(ad.id)
        if old is None:
            new.append(ad)
            continue
        if not ad.same_content(old):
            updated.append(ad)
        clicks[ad.id] = ad.clicks_by_week.get(nxt.week, 0)
    removed = frozenset(before) - nxt.ids
    return WeekDelta(nxt.week, tuple(new), tuple(updated), removed, clicks)


def apply_delta(ids, delta: WeekDelta) -> frozenset:
    return (frozenset(ids) - delta.removed_ad_ids) | {a.id for a in delta.new_ads}


def assemble_ads(snapshots) -> dict:
    """Merge a stream into one :class:`Ad` per id with full history.

    Characteristics come from the last snapshot showing the ad; ``removed_on``
    is the first snapshot date after the last sighting (absent if still live).
    """
    latest, clicks, prices, last_seen = {}, {}, {}, {}
    weeks = [s.week for s in snapshots]
    for snap in snapshots:
        for ad in snap.ads:
            latest[ad.id] = ad
            clicks.setdefault(ad.id, {}).update(ad.clicks_by_week)
            hist = prices.setdefault(ad.id, [])
            if not hist or hist[-1][1] != ad.asking_price:
                hist.append((snap.week, ad.asking_price))
            last_seen[ad.id] = snap.week
    out = {}
    final = weeks[-1] if weeks else None
    for ad_id, ad in latest.items():
        removed = None
        if last_seen[ad_id] != final:
            removed = weeks[weeks.index(last_seen[ad_id]) + 1]
        out[ad_id] = replace(
            ad,
            removed_on=removed,
            clicks_by_week=clicks[ad_id],
            price_history=tuple(prices[ad_id]),
        )
    return out


# --- external series --------------------------------------------------------


def mean_zone_price(p_low: float, p_high: float) -> float:
    """Average home value of a zone from its published bounds."""
    if not 0 < p_low <= p_high:
        raise ValueError("zone price bounds need 0 < P_l <= P_h")
    return (p_low + p_high) / 2.0


def read_external(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            v2 = row.get("value2")
            out.append(
                ExternalSeries(
                    row["kind"],
                    row["period"],
                    row["zone_or_city"],
                    float(row["value1"]),
                    None if v2 in (None, "") else float(v2),
                )
            )
    return out


def write_external(series, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EXTERNAL_FIELDS)
        for s in series:
            w.writerow([s.kind, s.period, s.key, repr(float(s.value1)),
                        "" if s.value2 is None else repr(float(s.value2))])
