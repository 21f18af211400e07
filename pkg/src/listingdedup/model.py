"""Domain types shared by every stage: ads, housing units, level schemes."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional

ORDERED_TRAITS = ("maintenance", "energy_class", "garage", "garden", "kitchen")
BINARY_TRAITS = (
    "elevator",
    "balcony",
    "terrace",
    "janitor",
    "utility_room",
    "air_conditioning",
    "basement",
)
UNORDERED_TRAITS = ("heating", "property_type")
COUNT_TRAITS = ("floor", "rooms", "bathrooms")

# characteristics compared/aggregated across ads of one dwelling
CHARACTERISTICS = (
    ("floor_area",) + COUNT_TRAITS + ORDERED_TRAITS + BINARY_TRAITS + UNORDERED_TRAITS
)


class ValidationError(ValueError):
    """Raised when a raw record cannot be turned into an :class:`Ad`.

    ``errors`` holds one message per violated rule.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinate out of range")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError("coordinate out of range")


@dataclass(frozen=True)
class OrderedLevelScheme:
    """Ordered category labels mapped to 1..K, worst first."""

    trait: str
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 2:
            raise ValueError(f"{self.trait}: a level scheme needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"{self.trait}: duplicate labels")

    @property
    def k(self) -> int:
        return len(self.labels)

    def level(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise KeyError(f"unknown {self.trait} label {label!r}") from None

    def label(self, level: int) -> str:
        if not 1 <= level <= self.k:
            raise KeyError(f"{self.trait} level {level} outside 1..{self.k}")
        return self.labels[level - 1]


DEFAULT_SCHEMES = {
    "maintenance": OrderedLevelScheme(
        "maintenance",
        ("to be fully renovated", "to be partially renovated", "good", "new"),
    ),
    "energy_class": OrderedLevelScheme(
        "energy_class", ("G", "F", "E", "D", "C", "B", "A", "A+")
    ),
    "garage": OrderedLevelScheme("garage", ("none", "single", "double")),
    "garden": OrderedLevelScheme("garden", ("none", "shared", "private")),
    "kitchen": OrderedLevelScheme("kitchen", ("kitchenette", "semi-habitable", "habitable")),
}


@dataclass(frozen=True)
class Ad:
    id: str
    location: GeoPoint
    asking_price: float
    created_on: dt.date
    agency_id: str = ""
    zone_id: Optional[str] = None
    floor_area: Optional[float] = None
    floor: Optional[int] = None
    rooms: Optional[int] = None
    bathrooms: Optional[int] = None
    maintenance: Optional[int] = None
    energy_class: Optional[int] = None
    garage: Optional[int] = None
    garden: Optional[int] = None
    kitchen: Optional[int] = None
    elevator: Optional[bool] = None
    balcony: Optional[bool] = None
    terrace: Optional[bool] = None
    janitor: Optional[bool] = None
    utility_room: Optional[bool] = None
    air_conditioning: Optional[bool] = None
    basement: Optional[bool] = None
    heating: Optional[str] = None
    property_type: Optional[str] = None
    description: Optional[str] = None
    removed_on: Optional[dt.date] = None
    clicks_by_week: dict = field(default_factory=dict, compare=True)
    price_history: tuple = ()

    @property
    def city(self) -> str:
        return city_of(self.zone_id)

    @property
    def is_private(self) -> bool:
        return not self.agency_id

    def missing(self) -> tuple:
        """Names of optional fields that are missing."""
        optional = ("zone_id", "description") + CHARACTERISTICS
        return tuple(name for name in optional if getattr(self, name) is None)

    def characteristics(self) -> dict:
        return {name: getattr(self, name) for name in CHARACTERISTICS}

    def same_content(self, other: "Ad") -> bool:
        """True when price and every characteristic match (clicks ignored)."""
        if self.asking_price != other.asking_price:
            return False
        if self.location != other.location or self.description != other.description:
            return False
        return self.characteristics() == other.characteristics()


@dataclass(frozen=True)
class HousingUnit:
    id: str
    member_ad_ids: frozenset
    location: GeoPoint
    asking_price: float
    entry_date: dt.date
    exit_date: Optional[dt.date] = None
    zone_id: Optional[str] = None
    floor_area: Optional[float] = None
    floor: Optional[int] = None
    rooms: Optional[int] = None
    bathrooms: Optional[int] = None
    maintenance: Optional[int] = None
    energy_class: Optional[int] = None
    garage: Optional[int] = None
    garden: Optional[int] = None
    kitchen: Optional[int] = None
    elevator: Optional[bool] = None
    balcony: Optional[bool] = None
    terrace: Optional[bool] = None
    janitor: Optional[bool] = None
    utility_room: Optional[bool] = None
    air_conditioning: Optional[bool] = None
    basement: Optional[bool] = None
    heating: Optional[str] = None
    property_type: Optional[str] = None

    def __post_init__(self):
        if not self.member_ad_ids:
            raise ValueError("a housing unit needs at least one ad")
        object.__setattr__(self, "member_ad_ids", frozenset(self.member_ad_ids))

    @property
    def active(self) -> bool:
        return self.exit_date is None

    @property
    def city(self) -> str:
        return city_of(self.zone_id)


def city_of(zone_id: Optional[str]) -> str:
    """City part of a ``city:zone`` identifier; empty when not encoded."""
    if not zone_id or ":" not in zone_id:
        return ""
    return zone_id.split(":", 1)[0]


def iso_week(day: dt.date) -> str:
    year, week, _ = day.isocalendar()
    return f"{year}-W{week:02d}"


def week_monday(day: dt.date) -> dt.date:
    return day - dt.timedelta(days=day.weekday())


# --- validation -------------------------------------------------------------

_MANDATORY = ("id", "price", "lat", "lon", "created_on")


def _parse_date(value, name, errors):
    if value is None or value == "":
        return None
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value)[:10])
    except ValueError:
        errors.append(f"{name}: bad date {value!r}")
        return None


def _parse_number(value, name, errors, integer=False, positive=False):
    if value is None or value == "":
        return None
    try:
        number = float(value)
    except (TypeError, ValueError):
        errors.append(f"{name}: not a number {value!r}")
        return None
    if not math.isfinite(number):
        errors.append(f"{name}: not finite")
        return None
    if positive and number <= 0:
        errors.append(f"{name}: must be positive")
        return None
    if integer:
        if number != int(number):
            errors.append(f"{name}: not an integer {value!r}")
            return None
        return int(number)
    return number


def _parse_bool(value, name, errors):
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "y"):
        return True
    if text in ("0", "false", "no", "n"):
        return False
    errors.append(f"{name}: not a yes/no value {value!r}")
    return None


def _parse_level(value, name, scheme, errors):
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value != int(value) or not 1 <= int(value) <= scheme.k:
            errors.append(f"{name}: level {value!r} outside 1..{scheme.k}")
            return None
        return int(value)
    try:
        return scheme.level(str(value))
    except KeyError as exc:
        errors.append(str(exc.args[0]))
        return None


def _parse_clicks(value, week, errors):
    if value is None or value == "":
        return {}
    if isinstance(value, Mapping):
        out = {}
        for key, count in value.items():
            day = _parse_date(key, "clicks", errors)
            n = _parse_number(count, "clicks", errors, integer=True)
            if day is not None and n is not None:
                out[day] = n
        return out
    n = _parse_number(value, "clicks", errors, integer=True)
    if n is None:
        return {}
    if n < 0:
        errors.append("clicks: negative count")
        return {}
    if week is None:
        errors.append("clicks: weekly count given without a snapshot week")
        return {}
    return {week: n}


def validate_ad(raw: Mapping[str, Any], week: Optional[dt.date] = None, schemes=None) -> Ad:
    """Build a typed :class:`Ad` from a raw field map.

    Missing optional fields stay ``None``. A scalar ``clicks`` value is the
    count for ``week``; a mapping is a full week -> count history.
    Raises :class:`ValidationError` listing every problem found.
    """
    schemes = DEFAULT_SCHEMES if schemes is None else schemes
    errors = []
    for name in _MANDATORY:
        if raw.get(name) is None or raw.get(name) == "":
            errors.append(f"missing mandatory field {name}")
    if errors:
        raise ValidationError(errors)

    location = None
    lat = _parse_number(raw["lat"], "lat", errors)
    lon = _parse_number(raw["lon"], "lon", errors)
    if lat is not None and lon is not None:
        try:
            location = GeoPoint(lat, lon)
        except ValueError as exc:
            errors.append(str(exc))
    price = _parse_number(raw["price"], "price", errors, positive=True)
    created = _parse_date(raw["created_on"], "created_on", errors)
    removed = _parse_date(raw.get("removed_on"), "removed_on", errors)
    if created is not None and removed is not None and removed < created:
        errors.append("removed_on precedes created_on")

    values = {
        "floor_area": _parse_number(raw.get("floor_area"), "floor_area", errors, positive=True),
    }
    for name in COUNT_TRAITS:
        values[name] = _parse_number(raw.get(name), name, errors, integer=True)
    for name in ("rooms", "bathrooms"):
        if values[name] is not None and values[name] < 0:
            errors.append(f"{name}: negative count")
    for name in ORDERED_TRAITS:
        values[name] = _parse_level(raw.get(name), name, schemes[name], errors)
    for name in BINARY_TRAITS:
        values[name] = _parse_bool(raw.get(name), name, errors)
    for name in UNORDERED_TRAITS:
        value = raw.get(name)
        values[name] = None if value in (None, "") else str(value)

    history = []
    for item in raw.get("price_history") or ():
        day = _parse_date(item[0], "price_history", errors)
        p = _parse_number(item[1], "price_history", errors, positive=True)
        if day is not None and p is not None:
            history.append((day, p))
    clicks = _parse_clicks(raw.get("clicks"), week, errors)

    if errors:
        raise ValidationError(errors)
    agency = raw.get("agency_id")
    zone = raw.get("zone_id")
    description = raw.get("description")
    return Ad(
        id=str(raw["id"]),
        location=location,
        asking_price=price,
        created_on=created,
        agency_id="" if agency is None else str(agency),
        zone_id=None if zone in (None, "") else str(zone),
        description=None if description is None else str(description),
        removed_on=removed,
        clicks_by_week=clicks,
        price_history=tuple(history),
        **values,
    )


def ad_to_record(ad: Ad, week: Optional[dt.date] = None, schemes=None, full=True) -> dict:
    """Serialize an ad to the snapshot field map.

    With ``week`` the ``clicks`` field is that week's count (snapshot rows);
    otherwise the full history is written so :func:`validate_ad` round-trips.
    """
    schemes = DEFAULT_SCHEMES if schemes is None else schemes
    rec = {
        "id": ad.id,
        "agency_id": ad.agency_id,
        "zone_id": ad.zone_id,
        "lat": ad.location.lat,
        "lon": ad.location.lon,
        "price": ad.asking_price,
    }
    for name in ("floor_area",) + COUNT_TRAITS:
        rec[name] = getattr(ad, name)
    for name in ORDERED_TRAITS:
        level = getattr(ad, name)
        rec[name] = None if level is None else schemes[name].label(level)
    for name in BINARY_TRAITS + UNORDERED_TRAITS:
        rec[name] = getattr(ad, name)
    rec["description"] = ad.description
    rec["created_on"] = ad.created_on.isoformat()
    if week is not None:
        rec["clicks"] = ad.clicks_by_week.get(week, 0)
    else:
        rec["clicks"] = {d.isoformat(): n for d, n in sorted(ad.clicks_by_week.items())}
    if full:
        rec["removed_on"] = None if ad.removed_on is None else ad.removed_on.isoformat()
        rec["price_history"] = [[d.isoformat(), p] for d, p in ad.price_history]
    return rec


def unit_to_record(unit: HousingUnit) -> dict:
    rec = {}
    for f in fields(unit):
        value = getattr(unit, f.name)
        if f.name == "member_ad_ids":
            value = sorted(value)
        elif f.name == "location":
            rec["lat"], rec["lon"] = value.lat, value.lon
            continue
        elif isinstance(value, dt.date):
            value = value.isoformat()
        rec[f.name] = value
    return rec


def unit_from_record(rec: Mapping[str, Any]) -> HousingUnit:
    kwargs = {}
    for f in fields(HousingUnit):
        if f.name == "location":
            kwargs["location"] = GeoPoint(float(rec["lat"]), float(rec["lon"]))
        elif f.name == "member_ad_ids":
            kwargs[f.name] = frozenset(rec[f.name])
        elif f.name in ("entry_date", "exit_date"):
            value = rec.get(f.name)
            kwargs[f.name] = None if value is None else dt.date.fromisoformat(value)
        else:
            kwargs[f.name] = rec.get(f.name)
    return HousingUnit(**kwargs)


__all__ = [
    "Ad",
    "BINARY_TRAITS",
    "CHARACTERISTICS",
    "COUNT_TRAITS",
    "DEFAULT_SCHEMES",
    "GeoPoint",
    "HousingUnit",
    "ORDERED_TRAITS",
    "OrderedLevelScheme",
    "UNORDERED_TRAITS",
    "ValidationError",
    "ad_to_record",
    "city_of",
    "iso_week",
    "unit_from_record",
    "unit_to_record",
    "validate_ad",
    "week_monday",
]
