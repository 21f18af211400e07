"""Synthetic listing streams with known duplicate structure.

Dwellings enter each city at a Poisson rate, are advertised by one or more
agencies, receive weekly clicks and leave after a drawn time on market.
Duplicate ads arise three ways: open mandates (several agencies from the
start), same-agency reposts (more likely after a week of weak interest and
when the home is overpriced) and mandate turnover (a new agency replaces the
old one, with or without overlap). Each ad re-describes the dwelling with
bounded noise so that matching is hard but learnable.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .ingest import (
    ExternalSeries,
    Snapshot,
    snapshot_filename,
    write_external,
    write_snapshot,
)
from .model import Ad, DEFAULT_SCHEMES, GeoPoint, ORDERED_TRAITS

START = dt.date(2016, 1, 4)
M_PER_DEG_LAT = 111_195.0


@dataclass(frozen=True)
class GeneratorConfig:
    n_cities: int = 5
    zones_per_city: int = 6
    city_scale: tuple = (0.5, 0.75, 1.0, 1.3, 1.6)
    entries_per_week: float = 90.0
    weeks: int = 26
    burn_in_weeks: int = 30
    start: dt.date = START
    zone_size_m: float = 1600.0
    units_per_building: float = 2.5
    agencies_per_city: int = 40
    private_share: float = 0.05
    # duplicate processes
    open_mandate_prob: float = 0.16
    open_mandate_extra: tuple = (0.50, 0.30, 0.20)
    repost_rate: float = 0.007
    repost_click_sensitivity: float = 10.0
    repost_price_sensitivity: float = 3.0
    turnover_rate: float = 0.004
    turnover_overlap_prob: float = 0.5
    turnover_gap_max_weeks: int = 3
    max_live_ads: int = 4
    # re-description noise across agencies
    jitter_m: float = 40.0
    max_jitter_m: float = 150.0
    area_noise: float = 0.04
    price_noise: float = 0.03
    level_noise_prob: float = 0.15
    binary_flip_prob: float = 0.05
    count_noise_prob: float = 0.08
    missing_prob: float = 0.08
    synonym_prob: float = 0.3
    # clicks
    click_base: float = 10.0
    interest_sd: float = 0.35
    click_price_elasticity: float = 1.0
    shock_sd: float = 0.10
    shock_rho: float = 0.5
    zone_demand_sd: float = 0.05
    new_ad_boost: float = 3.0
    # prices
    overpricing_sd: float = 0.12
    asking_markup: float = 1.12
    # time on market: log TOM = log(median) + elasticity * log(relative interest) + noise
    tom_median_days: float = 56.0
    tom_elasticity: float = -0.6
    tom_sd: float = 0.20
    min_tom_days: float = 8.0
    # downward revisions after two listed weeks
    revision_odds_ratio: float = 0.88  # per 0.01 of first-two-week relative interest
    revision_base_prob: float = 0.3  # at relative interest 1
    revision_cut: float = 0.05
    # validation series
    sales_share: float = 0.6
    target_shares: tuple = (0.77, 0.13, 0.10)

    def __post_init__(self):
        probs = {
            "private_share": self.private_share,
            "open_mandate_prob": self.open_mandate_prob,
            "turnover_overlap_prob": self.turnover_overlap_prob,
            "level_noise_prob": self.level_noise_prob,
            "binary_flip_prob": self.binary_flip_prob,
            "count_noise_prob": self.count_noise_prob,
            "missing_prob": self.missing_prob,
            "synonym_prob": self.synonym_prob,
            "revision_base_prob": self.revision_base_prob,
            "sales_share": self.sales_share,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        rates = ("entries_per_week", "repost_rate", "turnover_rate", "click_base", "tom_median_days",
                 "shock_sd", "interest_sd", "overpricing_sd", "zone_demand_sd", "tom_sd")
        for name in rates:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if len(self.city_scale) != self.n_cities:
            raise ValueError("city_scale needs one entry per city")
        for name in ("open_mandate_extra", "target_shares"):
            v = getattr(self, name)
            if any(x < 0 for x in v) or abs(sum(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a distribution summing to 1")
        if not 0.0 < self.revision_odds_ratio:
            raise ValueError("revision_odds_ratio must be positive")
        if self.weeks < 1 or self.zones_per_city < 1 or self.agencies_per_city < 2:
            raise ValueError("need at least one week, one zone and two agencies")

    @property
    def revision_slope(self) -> float:
        """Logit slope on relative interest implied by the odds ratio per 0.01."""
        return math.log(self.revision_odds_ratio) / 0.01

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        return d

    @classmethod
    def from_dict(cls, d) -> "GeneratorConfig":
        d = dict(d)
        if "start" in d and isinstance(d["start"], str):
            d["start"] = dt.date.fromisoformat(d["start"])
        for k in ("city_scale", "open_mandate_extra", "target_shares"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def no_duplicates(config: GeneratorConfig) -> GeneratorConfig:
    return replace(config, open_mandate_prob=0.0, repost_rate=0.0, turnover_rate=0.0)


# --- text -------------------------------------------------------------------

FEATURE_WORDS = (
    "parquet bright quiet view courtyard loft fireplace cellar attic doorman metro park school "
    "renovated spacious luminous panoramic silent elegant modern classic historic period vintage "
    "marble terracotta beams arches frescoes vaulted double-exposure corner walk-in storage laundry "
    "closet studio office veranda loggia patio pergola porch solarium greenhouse pool gym sauna "
    "playground bike-room intercom alarm shutters armoured-door triple-glazing underfloor boiler "
    "solar-panels heat-pump insulated soundproofed kitchen-island open-plan dining lounge library "
    "mezzanine duplex triplex skylight bay-window french-doors stucco granite oak walnut cherry "
    "ceramic mosaic travertine porcelain brushed-steel copper brass canal tram river hill church "
    "market square station university hospital stadium museum theatre gardens boulevard avenue"
).split()

SYNONYMS = {
    "bright": "luminous", "luminous": "bright", "quiet": "silent", "silent": "quiet",
    "spacious": "roomy", "modern": "contemporary", "classic": "traditional", "view": "panorama",
    "renovated": "refurbished", "elegant": "refined", "historic": "old-town", "metro": "subway",
    "park": "green-area", "school": "schools", "storage": "box-room", "closet": "wardrobe",
    "station": "railway", "market": "shops", "square": "piazza", "lounge": "living-room",
}

INTROS = (
    "for sale", "we offer", "exclusive listing", "in a prime location", "splendid opportunity",
    "we propose", "on sale", "new on the market", "rare find", "great investment",
)
FILLERS = (
    "call us for a viewing", "no agency fees for the buyer", "available immediately",
    "ideal for families", "perfect for investors", "visits by appointment", "documents in order",
    "mortgage assistance available", "energy certificate available", "virtual tour online",
    "contact our office", "close to all services", "well connected", "must see",
)
FLOOR_WORDS = ("ground", "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth")


def _agency_style(agency: str, seed: int):
    rng = np.random.default_rng([seed, abs(hash_str(agency)) % (2**31)])
    intro = INTROS[rng.integers(len(INTROS))]
    fill = tuple(FILLERS[i] for i in rng.choice(len(FILLERS), size=3, replace=False))
    order = int(rng.integers(3))
    return intro, fill, order


def hash_str(s: str) -> int:
    h = 0
    for ch in s:
        h = (h * 131 + ord(ch)) % 2_147_483_647
    return h


def _describe(unit, ad_chars, style, rng, synonym_prob, keep=0.8):
    intro, fill, order = style
    words = [w for w in unit.signature if rng.random() < keep] or [unit.signature[0]]
    words = [SYNONYMS.get(w, w) if rng.random() < synonym_prob else w for w in words]
    rng.shuffle(words)
    rooms = ad_chars.get("rooms")
    area = ad_chars.get("floor_area")
    floor = ad_chars.get("floor")
    core = [f"{unit.property_type}"]
    if rooms is not None:
        core.append(f"{rooms} rooms")
    if area is not None:
        core.append(f"{int(area)} sqm")
    if floor is not None:
        core.append(f"{FLOOR_WORDS[min(floor, 9)]} floor")
    parts = [intro, " ".join(core), ", ".join(words), ". ".join(fill)]
    if order == 1:
        parts = [parts[1], parts[0], parts[2], parts[3]]
    elif order == 2:
        parts = [parts[0], parts[2], parts[1], parts[3]]
    return ". ".join(parts)


def _edit_text(text: str, rng, n_edits: int) -> str:
    tokens = text.split(" ")
    for _ in range(n_edits):
        kind = rng.integers(3)
        pos = int(rng.integers(len(tokens)))
        if kind == 0 and len(tokens) > 3:
            del tokens[pos]
        elif kind == 1:
            tokens.insert(pos, FEATURE_WORDS[rng.integers(len(FEATURE_WORDS))])
        else:
            tokens[pos] = FILLERS[rng.integers(len(FILLERS))].split(" ")[0]
    return " ".join(tokens)


# --- simulation state -------------------------------------------------------

HEATING = ("autonomous", "centralized", "none")
PROPERTY_TYPES = ("apartment", "penthouse", "loft", "studio flat", "terraced house")


@dataclass
class _Unit:
    id: str
    city: int
    zone: str
    lat: float
    lon: float
    chars: dict
    signature: tuple
    property_type: str
    value_ppm2: float
    overpricing: float
    interest: float
    multiplier: float
    entry: dt.date
    tom_days: float
    primary: str
    price_factor: float = 1.0
    shock: float = 0.0
    shock_prev: float = 0.0
    live_ads: list = field(default_factory=list)
    agencies: list = field(default_factory=list)
    pending: list = field(default_factory=list)  # (week index, agency)
    live_weeks: list = field(default_factory=list)
    unit_clicks: list = field(default_factory=list)
    zone_avgs: list = field(default_factory=list)
    revision_checked: bool = False
    revised: bool = False
    cut_pending: bool = False
    onlint2: Optional[float] = None
    exit: Optional[dt.date] = None

    @property
    def asking_price(self) -> float:
        area = self.chars["floor_area"]
        return self.value_ppm2 * area * math.exp(self.overpricing) * self.price_factor


@dataclass
class _Ad:
    id: str
    unit: _Unit
    agency: str
    static: dict
    price_mult: float
    created_on: dt.date
    first_week: int
    boosted: bool = False
    removal_week: Optional[int] = None


@dataclass
class UnitTruth:
    unit_id: str
    city: str
    zone_id: str
    entry: dt.date
    exit: Optional[dt.date]
    value_ppm2: float
    overpricing: float
    interest: float
    tom_days: float
    revised: bool
    onlint2: Optional[float]


@dataclass
class GroundTruth:
    ad_unit: dict  # ad id -> unit id
    units: dict  # unit id -> UnitTruth

    def partition(self) -> list:
        groups = {}
        for ad, unit in self.ad_unit.items():
            groups.setdefault(unit, set()).add(ad)
        return sorted((frozenset(g) for g in groups.values()), key=min)

    def shares(self) -> tuple:
        """Share of units with 1, 2 and 3+ ads."""
        sizes = np.array([len(g) for g in self.partition()])
        if len(sizes) == 0:
            return (0.0, 0.0, 0.0)
        return (float(np.mean(sizes == 1)), float(np.mean(sizes == 2)), float(np.mean(sizes >= 3)))

    def label(self, a: str, b: str) -> bool:
        return self.ad_unit[a] == self.ad_unit[b]


@dataclass
class Synthetic:
    snapshots: list
    truth: GroundTruth
    external: list
    config: GeneratorConfig


class _Sim:
    def __init__(self, config: GeneratorConfig, seed: int):
        self.cfg = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.units = []
        self.live = []
        self.ads = {}
        self.n_units = 0
        self.n_ads = 0
        self.styles = {}
        self.zone_demand = {}
        self._setup_geography()

    # geography and agencies
    def _setup_geography(self):
        cfg, rng = self.cfg, self.rng
        self.zones = []  # (city, zone id, lat0, lon0, base ppm2)
        self.buildings = {}
        self.agencies = {}
        side = int(math.ceil(math.sqrt(cfg.zones_per_city)))
        for c in range(cfg.n_cities):
            lat_c, lon_c = 41.0 + 1.2 * c, 9.0 + 0.9 * (c % 3)
            city_base = float(rng.uniform(2200, 4200))
            for z in range(cfg.zones_per_city):
                r, q = divmod(z, side)
                dlat = r * cfg.zone_size_m / M_PER_DEG_LAT
                dlon = q * cfg.zone_size_m / (M_PER_DEG_LAT * math.cos(math.radians(lat_c)))
                base = city_base * float(np.exp(rng.normal(0, 0.25)))
                self.zones.append((c, f"C{c}:Z{z}", lat_c + dlat, lon_c + dlon, base))
                self.buildings[f"C{c}:Z{z}"] = []
                self.zone_demand[f"C{c}:Z{z}"] = 0.0
            self.agencies[c] = [f"AG{c:02d}{k:03d}" for k in range(cfg.agencies_per_city)]

    def style(self, agency):
        s = self.styles.get(agency)
        if s is None:
            s = self.styles[agency] = _agency_style(agency, self.seed)
        return s

    def date(self, k: int) -> dt.date:
        return self.cfg.start + dt.timedelta(weeks=k)

    # entries
    def _building(self, zone):
        cfg, rng = self.cfg, self.rng
        c, zid, lat0, lon0, _ = zone
        existing = self.buildings[zid]
        p_new = 1.0 / cfg.units_per_building
        if existing and rng.random() > p_new:
            return existing[int(rng.integers(len(existing)))]
        m_lon = M_PER_DEG_LAT * math.cos(math.radians(lat0))
        b = (lat0 + rng.uniform(0, cfg.zone_size_m) / M_PER_DEG_LAT,
             lon0 + rng.uniform(0, cfg.zone_size_m) / m_lon)
        existing.append(b)
        return b

    def _characteristics(self):
        rng = self.rng
        area = float(np.clip(np.round(np.exp(rng.normal(math.log(85), 0.38))), 25, 400))
        rooms = int(np.clip(round(area / 28 + rng.normal(0, 0.6)), 1, 9))
        baths = int(np.clip(1 + (area > 95) + (area > 160) + (rng.random() < 0.1), 1, 4))
        chars = {
            "floor_area": area,
            "rooms": rooms,
            "bathrooms": baths,
            "floor": int(rng.integers(0, 9)),
            "heating": HEATING[int(rng.choice(3, p=(0.5, 0.4, 0.1)))],
            "property_type": PROPERTY_TYPES[int(rng.choice(5, p=(0.75, 0.08, 0.05, 0.07, 0.05)))],
        }
        for t in ORDERED_TRAITS:
            chars[t] = int(rng.integers(1, DEFAULT_SCHEMES[t].k + 1))
        for t, p in (("elevator", 0.6), ("balcony", 0.55), ("terrace", 0.25), ("janitor", 0.2),
                     ("utility_room", 0.2), ("air_conditioning", 0.35), ("basement", 0.4)):
            chars[t] = bool(rng.random() < p)
        return chars

    @staticmethod
    def _quality(chars) -> float:
        q = 0.06 * (chars["maintenance"] - 2.5) + 0.015 * chars["floor"] + 0.05 * chars["elevator"]
        q += 0.02 * (chars["energy_class"] - 4.5) - 0.08 * math.log(chars["floor_area"] / 85)
        return math.exp(q)

    def _enter(self, k: int, city: int):
        cfg, rng = self.cfg, self.rng
        zones = [z for z in self.zones if z[0] == city]
        zone = zones[int(rng.integers(len(zones)))]
        lat, lon = self._building(zone)
        chars = self._characteristics()
        ptype = chars.pop("property_type")
        u = float(rng.normal(0, cfg.overpricing_sd))
        eta = float(rng.normal(0, cfg.interest_sd))
        mult = math.exp(eta - cfg.click_price_elasticity * u)
        entry = self.date(k) - dt.timedelta(days=int(rng.integers(0, 7)))
        log_tom = math.log(cfg.tom_median_days) + cfg.tom_elasticity * math.log(mult) + rng.normal(0, cfg.tom_sd)
        tom = max(cfg.min_tom_days, math.exp(log_tom))
        primary = "" if rng.random() < cfg.private_share else self.agencies[city][int(rng.integers(cfg.agencies_per_city))]
        sig = tuple(FEATURE_WORDS[i] for i in rng.choice(len(FEATURE_WORDS), size=7, replace=False))
        unit = _Unit(
            id=f"H{self.n_units:06d}", city=city, zone=zone[1], lat=lat, lon=lon, chars=chars,
            signature=sig, property_type=ptype,
            value_ppm2=zone[4] * self._quality(chars) * cfg.asking_markup, overpricing=u,
            interest=eta, multiplier=mult, entry=entry, tom_days=tom, primary=primary,
        )
        sd = cfg.shock_sd / math.sqrt(max(1e-12, 1 - cfg.shock_rho**2))
        unit.shock = float(rng.normal(0, sd)) if sd > 0 else 0.0
        self.n_units += 1
        self.units.append(unit)
        self.live.append(unit)
        self._post(unit, k, primary, entry, boosted=False)
        if primary and rng.random() < cfg.open_mandate_prob:
            extra = 1 + int(rng.choice(len(cfg.open_mandate_extra), p=cfg.open_mandate_extra))
            others = [a for a in self.agencies[city] if a != primary]
            for a in rng.choice(len(others), size=min(extra, len(others)), replace=False):
                self._post(unit, k, others[int(a)], entry, boosted=False)

    # ads
    def _noisy_static(self, unit: _Unit, agency: str, reuse: Optional[_Ad] = None):
        cfg, rng = self.cfg, self.rng
        if reuse is not None:
            static = dict(reuse.static)
            static["description"] = _edit_text(static["description"] or "", rng, int(rng.integers(1, 4)))
            return static, reuse.price_mult
        ch = dict(unit.chars)
        ch["floor_area"] = float(max(15, round(ch["floor_area"] * (1 + rng.normal(0, cfg.area_noise)))))
        for t in ("rooms", "bathrooms", "floor"):
            if rng.random() < cfg.count_noise_prob:
                ch[t] = int(max(0 if t == "floor" else 1, ch[t] + (1 if rng.random() < 0.5 else -1)))
        for t in ORDERED_TRAITS:
            if rng.random() < cfg.level_noise_prob:
                ch[t] = int(np.clip(ch[t] + (1 if rng.random() < 0.5 else -1), 1, DEFAULT_SCHEMES[t].k))
        for t in ("elevator", "balcony", "terrace", "janitor", "utility_room", "air_conditioning", "basement"):
            if rng.random() < cfg.binary_flip_prob:
                ch[t] = not ch[t]
        for t in list(ch):
            if t != "floor_area" and rng.random() < cfg.missing_prob:
                ch[t] = None
        desc = _describe(unit, ch, self.style(agency or "private"), rng, cfg.synonym_prob)
        jit = np.clip(rng.normal(0, cfg.jitter_m, size=2), -cfg.max_jitter_m, cfg.max_jitter_m)
        lat = unit.lat + jit[0] / M_PER_DEG_LAT
        lon = unit.lon + jit[1] / (M_PER_DEG_LAT * math.cos(math.radians(unit.lat)))
        static = dict(ch)
        static.update(
            property_type=unit.property_type if rng.random() > cfg.missing_prob else None,
            description=desc,
            location=GeoPoint(round(lat, 6), round(lon, 6)),
            zone_id=unit.zone,
            agency_id=agency,
        )
        price_mult = float(math.exp(rng.normal(0, cfg.price_noise)))
        return static, price_mult

    def _post(self, unit, k, agency, created_on, boosted, reuse=None):
        static, mult = self._noisy_static(unit, agency, reuse)
        ad = _Ad(f"A{self.n_ads:07d}", unit, agency, static, mult, created_on, k, boosted)
        self.n_ads += 1
        self.ads[ad.id] = ad
        unit.live_ads.append(ad)
        if agency not in unit.agencies:
            unit.agencies.append(agency)
        return ad

    def _remove(self, unit, ad, k):
        ad.removal_week = k
        unit.live_ads.remove(ad)

    # weekly step
    def step(self, k: int):
        cfg, rng = self.cfg, self.rng
        today = self.date(k)
        for unit in self.live:
            if unit.cut_pending:
                unit.price_factor *= 1.0 - cfg.revision_cut
                unit.cut_pending = False
        # exits and scheduled removals
        still = []
        for unit in self.live:
            # exit at the snapshot nearest to entry + tom, not the next one after it
            if (today - unit.entry).days + 3.5 >= unit.tom_days:
                for ad in list(unit.live_ads):
                    self._remove(unit, ad, k)
                unit.pending.clear()
                unit.exit = today
                continue
            for ad in list(unit.live_ads):
                if ad.removal_week is not None and ad.removal_week <= k:
                    unit.live_ads.remove(ad)
            still.append(unit)
        self.live = still
        # delayed postings after a mandate gap
        for unit in self.live:
            due = [p for p in unit.pending if p[0] <= k]
            for p in due:
                unit.pending.remove(p)
                self._post(unit, k, p[1], today - dt.timedelta(days=int(rng.integers(0, 7))), boosted=True)
        # duplicate events driven by last week's interest and overpricing
        for unit in self.live:
            n_live = len(unit.live_ads)
            if n_live == 0 or n_live >= cfg.max_live_ads or unit.pending:
                continue
            created = today - dt.timedelta(days=int(rng.integers(0, 7)))
            h = cfg.repost_rate * math.exp(-cfg.repost_click_sensitivity * unit.shock_prev
                                           + cfg.repost_price_sensitivity * unit.overpricing)
            if unit.primary and rng.random() < h:
                own = [a for a in unit.live_ads if a.agency == unit.primary] or unit.live_ads
                old = own[0]
                self._post(unit, k, old.agency, created, boosted=True, reuse=old)
                old.removal_week = k + 1 + int(rng.geometric(0.5))
                continue
            if rng.random() < cfg.turnover_rate:
                city_ag = self.agencies[unit.city]
                choices = [a for a in city_ag if a not in unit.agencies] or city_ag
                new_ag = choices[int(rng.integers(len(choices)))]
                old = unit.live_ads[0]
                if rng.random() < cfg.turnover_overlap_prob:
                    self._post(unit, k, new_ag, created, boosted=True)
                    old.removal_week = k + int(rng.integers(1, 3))
                else:
                    for ad in list(unit.live_ads):
                        self._remove(unit, ad, k)
                    gap = int(rng.integers(1, cfg.turnover_gap_max_weeks + 1))
                    unit.pending.append((k + gap, new_ag))
        # entries
        for c in range(cfg.n_cities):
            for _ in range(int(rng.poisson(cfg.entries_per_week * cfg.city_scale[c]))):
                self._enter(k, c)
        # zone demand and transitory shocks
        for z in self.zone_demand:
            self.zone_demand[z] = 0.7 * self.zone_demand[z] + float(rng.normal(0, cfg.zone_demand_sd))
        live = [u for u in self.live if u.live_ads]
        eps = rng.normal(0, cfg.shock_sd, size=len(live))
        for u, e in zip(live, eps):
            u.shock_prev = u.shock
            u.shock = cfg.shock_rho * u.shock + float(e)
        # clicks
        clicks = {}
        ads = [a for u in live for a in u.live_ads]
        rates = np.array([
            cfg.click_base * 7 * math.exp(self.zone_demand[a.unit.zone] + a.unit.shock) * a.unit.multiplier
            * (cfg.new_ad_boost if a.boosted and a.first_week == k else 1.0)
            for a in ads
        ])
        counts = rng.poisson(rates) if len(ads) else np.zeros(0, dtype=int)
        for a, n in zip(ads, counts):
            clicks[a.id] = int(n)
        # unit-level interest and zone averages, as the panel computes them
        zone_vals = {}
        for u in live:
            v = float(np.mean([clicks[a.id] / 7.0 for a in u.live_ads]))
            u.live_weeks.append(k)
            u.unit_clicks.append(v)
            zone_vals.setdefault(u.zone, []).append(v)
        zone_avg = {z: float(np.mean(v)) for z, v in zone_vals.items()}
        for u in live:
            u.zone_avgs.append(zone_avg[u.zone])
        # downward revisions decided after two listed weeks
        slope = cfg.revision_slope
        intercept = None
        if 0 < cfg.revision_base_prob < 1:
            intercept = math.log(cfg.revision_base_prob / (1 - cfg.revision_base_prob)) - slope
        for u in live:
            if u.revision_checked or len(u.live_weeks) < 2:
                continue
            u.revision_checked = True
            u.onlint2 = (u.unit_clicks[0] + u.unit_clicks[1]) / (u.zone_avgs[0] + u.zone_avgs[1])
            if intercept is None:
                u.revised = cfg.revision_base_prob >= 1
            else:
                z = intercept + slope * u.onlint2
                u.revised = bool(rng.random() < 1.0 / (1.0 + math.exp(-z)))
            u.cut_pending = u.revised
        return live, clicks

    def snapshot(self, k, live, clicks) -> Snapshot:
        today = self.date(k)
        rows = []
        for u in live:
            for a in u.live_ads:
                price = float(round(u.asking_price * a.price_mult, -3))
                rows.append(Ad(
                    id=a.id,
                    asking_price=max(price, 1000.0),
                    created_on=a.created_on,
                    clicks_by_week={today: clicks[a.id]},
                    **a.static,
                ))
        rows.sort(key=lambda ad: ad.id)
        return Snapshot(today, tuple(rows))


def generate(config: GeneratorConfig = GeneratorConfig(), seed: int = 0) -> Synthetic:
    """Simulate the market and return weekly snapshots, ground truth and external series."""
    cfg = config
    sim = _Sim(cfg, seed)
    snapshots = []
    seen_ads = {}
    exits_by = {}
    for k in range(-cfg.burn_in_weeks, cfg.weeks):
        live, clicks = sim.step(k)
        if k < 0:
            continue
        snap = sim.snapshot(k, live, clicks)
        snapshots.append(snap)
        for ad in snap.ads:
            seen_ads[ad.id] = sim.ads[ad.id].unit.id
    units_seen = {}
    for u in sim.units:
        units_seen[u.id] = u
    ad_unit = dict(sorted(seen_ads.items()))
    visible = set(ad_unit.values())
    # unit exit = first snapshot date without any of its ads, inside the window
    last_seen = {}
    for snap in snapshots:
        for ad in snap.ads:
            last_seen[ad_unit[ad.id]] = snap.week
    final = snapshots[-1].week
    truth_units = {}
    for uid in sorted(visible):
        u = units_seen[uid]
        exit_date = None if last_seen[uid] == final else last_seen[uid] + dt.timedelta(weeks=1)
        truth_units[uid] = UnitTruth(
            uid, f"C{u.city}", u.zone, u.entry, exit_date, u.value_ppm2 / cfg.asking_markup,
            u.overpricing, u.interest, u.tom_days, u.revised, u.onlint2,
        )
        if exit_date is not None:
            exits_by.setdefault((f"C{u.city}", quarter(exit_date)), 0)
            exits_by[(f"C{u.city}", quarter(exit_date))] += 1
    truth = GroundTruth(ad_unit, truth_units)
    external = _external_series(sim, truth, exits_by, snapshots)
    return Synthetic(snapshots, truth, external, cfg)


def quarter(day: dt.date) -> str:
    return f"{day.year}Q{(day.month - 1) // 3 + 1}"


def semester(day: dt.date) -> str:
    return f"{day.year}S{1 if day.month <= 6 else 2}"


def _external_series(sim, truth, exits_by, snapshots):
    cfg = sim.cfg
    rng = np.random.default_rng([sim.seed, 7])
    out = []
    for (city, q), n in sorted(exits_by.items()):
        out.append(ExternalSeries("city_sales", q, city, float(rng.binomial(n, cfg.sales_share))))
    # zone value bounds per semester from the true values of listed units
    vals = {}
    for snap in snapshots:
        sem = semester(snap.week)
        for ad in snap.ads:
            t = truth.units[truth.ad_unit[ad.id]]
            vals.setdefault((t.zone_id, sem), {})[t.unit_id] = t.value_ppm2
    for (zone, sem), d in sorted(vals.items()):
        mean = float(np.mean(list(d.values()))) * float(np.exp(rng.normal(0, 0.02)))
        out.append(ExternalSeries("zone_price_bounds", sem, zone, round(mean * 0.8, 2), round(mean * 1.2, 2)))
    for q in sorted({quarter(s.week) for s in snapshots}):
        out.append(ExternalSeries("survey_discount", q, "ALL", round(1 - 1 / cfg.asking_markup, 4)))
        out.append(ExternalSeries("survey_tom", q, "ALL", cfg.tom_median_days / 30.4))
    return out


# --- output -----------------------------------------------------------------


def write_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["ad_id", "unit_id"])
        for ad, unit in truth.ad_unit.items():
            w.writerow([ad, unit])


def read_truth(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["ad_id"]: row["unit_id"] for row in csv.DictReader(fh)}


def write_unit_truth(truth: GroundTruth, path) -> None:
    names = list(UnitTruth.__dataclass_fields__)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for u in truth.units.values():
            row = []
            for n in names:
                v = getattr(u, n)
                row.append("" if v is None else v.isoformat() if isinstance(v, dt.date) else v)
            w.writerow(row)


def write_dataset(data: Synthetic, out_dir) -> Path:
    """Snapshots (one JSON-lines file per week), truth.csv, units_truth.csv, external.csv."""
    out = Path(out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    for snap in data.snapshots:
        write_snapshot(snap, out / "snapshots" / snapshot_filename(snap.week))
    write_truth(data.truth, out / "truth.csv")
    write_unit_truth(data.truth, out / "units_truth.csv")
    write_external(data.external, out / "external.csv")
    return out


# --- scoring ----------------------------------------------------------------


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f_measure: float
    predicted_pairs: int
    true_pairs: int
    correct_pairs: int
    unit_ratio: float
    true_unit_ratio: float
    no_predicted_pairs: bool


def _pairs(sizes) -> int:
    sizes = np.asarray(list(sizes), dtype=np.int64)
    return int(np.sum(sizes * (sizes - 1) // 2))


def score(predicted, truth) -> ScoreReport:
    """Pairwise agreement between a predicted partition and the true one.

    ``predicted`` is an iterable of ad-id sets; ``truth`` a :class:`GroundTruth`
    or an ``ad id -> unit id`` mapping. Both must cover the same ads.
    """
    ad_unit = truth.ad_unit if isinstance(truth, GroundTruth) else dict(truth)
    predicted = [frozenset(c) for c in predicted]
    pred_ids = [a for c in predicted for a in c]
    if len(pred_ids) != len(set(pred_ids)):
        raise ValueError("predicted clusters overlap")
    if set(pred_ids) != set(ad_unit):
        raise ValueError("predicted partition and truth cover different ad ids")
    joint = {}
    for k, c in enumerate(predicted):
        for a in c:
            key = (k, ad_unit[a])
            joint[key] = joint.get(key, 0) + 1
    tp = _pairs(joint.values())
    pp = _pairs(len(c) for c in predicted)
    true_sizes = {}
    for u in ad_unit.values():
        true_sizes[u] = true_sizes.get(u, 0) + 1
    tt = _pairs(true_sizes.values())
    precision = tp / pp if pp else 1.0
    recall = tp / tt if tt else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    n = len(ad_unit)
    return ScoreReport(precision, recall, f, pp, tt, tp, len(predicted) / n if n else 0.0,
                       len(true_sizes) / n if n else 0.0, pp == 0)


def truth_units(data: Synthetic) -> list:
    """Housing units built from the true ad grouping (unit ids from the generator)."""
    from .cluster import aggregate_unit
    from .ingest import assemble_ads

    ads = assemble_ads(data.snapshots)
    groups = {}
    for ad_id, uid in data.truth.ad_unit.items():
        groups.setdefault(uid, []).append(ads[ad_id])
    return [aggregate_unit(members, uid) for uid, members in sorted(groups.items())]
