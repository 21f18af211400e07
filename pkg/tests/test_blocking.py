import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_ad
from listingdedup.blocking import (
    BlockingParams,
    CandidatePair,
    Points,
    brute_force_index_pairs,
    candidate_index_pairs,
    candidate_pairs,
)
from listingdedup.bench import random_points

M_PER_DEG_LAT = 6_371_008.8 * np.pi / 180


def north(m):
    return 45.0 + m / M_PER_DEG_LAT


def _pairs(ads):
    return {p.key for p in candidate_pairs(ads)}


def test_distance_threshold_is_strict():
    a = make_ad("a")
    assert _pairs([a, make_ad("b", lat=north(399.0))]) == {("a", "b")}
    assert _pairs([a, make_ad("b", lat=north(401.0))]) == set()


def test_price_rule_relative_or_absolute():
    a = make_ad("a", price=100_000.0)
    # 24% apart: relative rule holds
    assert _pairs([a, make_ad("b", price=124_000.0)])
    # 30% apart but only 30k: absolute rule holds
    assert _pairs([a, make_ad("b", price=130_000.0)])
    # 1M vs 1.3M: both rules fail
    hi = make_ad("c", price=1_000_000.0)
    assert not _pairs([hi, make_ad("d", price=1_300_000.0)])
    # 1M vs 1.2M: relative gap 0.2 passes though the absolute gap is 200k
    assert _pairs([hi, make_ad("d", price=1_200_000.0)])


def test_different_cities_never_pair():
    assert not _pairs([make_ad("a", zone_id="MI:Z01"), make_ad("b", zone_id="TO:Z01")])


def test_candidate_pair_is_ordered_and_not_reflexive():
    p = CandidatePair("b", "a", False, 1.0, 0.0, 0.0)
    assert p.key == ("a", "b")
    with pytest.raises(ValueError):
        CandidatePair("a", "a", False, 0, 0, 0)


def test_same_agency_flag():
    pairs = candidate_pairs([make_ad("a", agency_id="x"), make_ad("b", agency_id="x"),
                             make_ad("c", agency_id="")])
    flags = {p.key: p.same_agency for p in pairs}
    assert flags == {("a", "b"): True, ("a", "c"): False, ("b", "c"): False}


def test_cross_blocking_against_units():
    ads = [make_ad("a"), make_ad("b", lat=north(1000))]
    units = [make_ad("u1", lat=north(50)), make_ad("u2", lat=north(990))]
    assert {p.key for p in candidate_pairs(ads, units)} == {("a", "u1"), ("b", "u2")}


def test_empty_inputs():
    ia, ib, d = candidate_index_pairs(Points.from_records([]))
    assert len(ia) == len(ib) == len(d) == 0


@given(st.integers(0, 10_000), st.integers(2, 250), st.floats(50, 1500), st.floats(0.01, 0.5),
       st.floats(1_000, 200_000))
def test_grid_equals_brute_force(seed, n, radius, rel, ab):
    rng = np.random.default_rng(seed)
    pts = random_points(n, rng, span_m=2500.0)
    params = BlockingParams(radius, rel, ab)
    ia, ib, d = candidate_index_pairs(pts, None, params)
    ja, jb, e = brute_force_index_pairs(pts, None, params)
    assert set(zip(ia.tolist(), ib.tolist())) == set(zip(ja.tolist(), jb.tolist()))
    assert np.all(d < radius)


@given(st.integers(0, 10_000), st.integers(1, 120), st.integers(1, 120))
def test_cross_grid_equals_brute_force(seed, n, m):
    rng = np.random.default_rng(seed)
    left, right = random_points(n, rng), random_points(m, rng)
    ia, ib, _ = candidate_index_pairs(left, right)
    ja, jb, _ = brute_force_index_pairs(left, right)
    assert set(zip(ia.tolist(), ib.tolist())) == set(zip(ja.tolist(), jb.tolist()))


def test_spec_threshold_examples():
    assert _pairs([make_ad("a", price=100_000.0), make_ad("b", lat=north(350), price=110_000.0)])
    assert not _pairs([make_ad("a"), make_ad("b", lat=north(450))])
    assert _pairs([make_ad("a", price=40_000.0), make_ad("b", lat=north(100), price=80_000.0)])


def test_grid_lookup_superset_of_radius_query():
    from listingdedup.blocking import build_grid
    from listingdedup.normalize import haversine_m

    rng = np.random.default_rng(5)
    ads = [make_ad(f"a{i}", lat=45 + rng.uniform(0, 0.03), lon=9 + rng.uniform(0, 0.04)) for i in range(1000)]
    grid = build_grid(ads)
    lat = np.array([a.location.lat for a in ads])
    lon = np.array([a.location.lon for a in ads])
    for k in range(0, 1000, 50):
        near = set(np.nonzero(haversine_m(lat[k], lon[k], lat, lon) < 400)[0].tolist())
        assert near <= set(grid.lookup(lat[k], lon[k]).tolist())
    one = build_grid([ads[0]])
    assert len(one.cells) == 1
