import datetime as dt

import pytest
from hypothesis import settings

from listingdedup.model import Ad, GeoPoint

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

MONDAY = dt.date(2016, 1, 4)


def make_ad(id, lat=45.0, lon=9.0, price=200_000.0, created=MONDAY, **kw):
    """Ad with sensible defaults for hand-built test cases."""
    kw.setdefault("zone_id", "MI:Z01")
    kw.setdefault("floor_area", 80.0)
    kw.setdefault("description", f"flat {id}")
    return Ad(id=id, location=GeoPoint(lat, lon), asking_price=price, created_on=created, **kw)


@pytest.fixture
def ad_factory():
    return make_ad
