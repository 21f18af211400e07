import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from listingdedup.model import (
    DEFAULT_SCHEMES,
    GeoPoint,
    HousingUnit,
    OrderedLevelScheme,
    ValidationError,
    ad_to_record,
    city_of,
    iso_week,
    unit_from_record,
    unit_to_record,
    validate_ad,
    week_monday,
)

RAW = {"id": "a1", "lat": 45.46, "lon": 9.19, "price": 250000, "created_on": "2016-01-04"}


def test_minimal_record_validates_with_missing_optionals():
    ad = validate_ad(RAW)
    assert ad.asking_price == 250000.0
    assert ad.agency_id == "" and ad.is_private
    assert ad.floor_area is None and "floor_area" in ad.missing()
    assert ad.city == ""


def test_missing_mandatory_fields_are_all_reported():
    with pytest.raises(ValidationError) as err:
        validate_ad({"id": "x"})
    msgs = " ".join(err.value.errors)
    for name in ("lat", "lon", "price", "created_on"):
        assert name in msgs


@pytest.mark.parametrize("field,value", [
    ("price", -5), ("price", 0), ("lat", 91.0), ("lon", "east"), ("created_on", "2016-13-01"),
    ("rooms", -1), ("maintenance", "shiny"), ("elevator", "maybe"),
])
def test_invalid_values_raise(field, value):
    with pytest.raises(ValidationError):
        validate_ad({**RAW, field: value})


def test_removed_before_created_is_rejected():
    with pytest.raises(ValidationError, match="precedes"):
        validate_ad({**RAW, "removed_on": "2015-12-01"})


def test_ordered_labels_map_to_levels_worst_first():
    ad = validate_ad({**RAW, "maintenance": "new", "energy_class": "G", "garage": "double"})
    assert ad.maintenance == 4 and ad.energy_class == 1 and ad.garage == 3


def test_scalar_clicks_need_a_week():
    with pytest.raises(ValidationError):
        validate_ad({**RAW, "clicks": 3})
    wk = dt.date(2016, 1, 11)
    assert validate_ad({**RAW, "clicks": 3}, week=wk).clicks_by_week == {wk: 3}


def test_level_scheme_round_trip_and_errors():
    s = OrderedLevelScheme("q", ("low", "mid", "high"))
    assert [s.level(x) for x in s.labels] == [1, 2, 3]
    assert s.label(2) == "mid"
    with pytest.raises(KeyError):
        s.level("top")
    with pytest.raises(KeyError):
        s.label(0)
    with pytest.raises(ValueError):
        OrderedLevelScheme("q", ("a", "a"))
    with pytest.raises(ValueError):
        OrderedLevelScheme("q", ("a",))


def test_geopoint_bounds():
    GeoPoint(-90, 180)
    with pytest.raises(ValueError):
        GeoPoint(0, 181)
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0)


def test_city_and_week_helpers():
    assert city_of("MI:Z03") == "MI"
    assert city_of(None) == "" and city_of("Z03") == ""
    assert iso_week(dt.date(2016, 1, 4)) == "2016-W01"
    assert week_monday(dt.date(2016, 1, 10)) == dt.date(2016, 1, 4)


def test_unit_needs_members():
    with pytest.raises(ValueError):
        HousingUnit("U1", frozenset(), GeoPoint(45, 9), 1.0, dt.date(2016, 1, 4))


def test_unit_record_round_trip():
    u = HousingUnit("U1", frozenset({"a", "b"}), GeoPoint(45.1, 9.2), 210000.0, dt.date(2016, 1, 4),
                    dt.date(2016, 3, 7), zone_id="MI:Z01", floor_area=75.0, elevator=True)
    assert unit_from_record(unit_to_record(u)) == u


labels = {t: st.one_of(st.none(), st.sampled_from(s.labels)) for t, s in DEFAULT_SCHEMES.items()}


@given(
    price=st.floats(1_000, 5e6, allow_nan=False),
    lat=st.floats(-89, 89), lon=st.floats(-179, 179),
    area=st.one_of(st.none(), st.floats(10, 500)),
    rooms=st.one_of(st.none(), st.integers(0, 10)),
    elevator=st.one_of(st.none(), st.booleans()),
    maintenance=labels["maintenance"], energy=labels["energy_class"],
    agency=st.sampled_from(["", "ag1", "ag2"]),
    desc=st.one_of(st.none(), st.text(max_size=40)),
    clicks=st.dictionaries(st.dates(dt.date(2015, 1, 1), dt.date(2017, 1, 1)), st.integers(0, 500), max_size=4),
)
def test_ad_record_round_trip(price, lat, lon, area, rooms, elevator, maintenance, energy, agency, desc, clicks):
    raw = {**RAW, "price": price, "lat": lat, "lon": lon, "floor_area": area, "rooms": rooms,
           "elevator": elevator, "maintenance": maintenance, "energy_class": energy,
           "agency_id": agency, "description": desc,
           "clicks": {d.isoformat(): n for d, n in clicks.items()}}
    ad = validate_ad(raw)
    assert validate_ad(ad_to_record(ad)) == ad
