import datetime as dt
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_ad
from listingdedup.cluster import aggregate_unit
from listingdedup.ingest import Snapshot, WeekDelta, assemble_ads
from listingdedup.pairs import FEATURE_NAMES
from listingdedup.time_machine import (
    DedupParams,
    InsufficientDataError,
    batch_clusters,
    filter_hedonic_ratio,
    filter_min_duration,
    hedonic_ratios,
    initial_state,
    merge_violations,
    process_week,
    run_stream,
    support_needed,
)

COL = {n: k for k, n in enumerate(FEATURE_NAMES)}
W = [dt.date(2016, 1, 4) + dt.timedelta(weeks=k) for k in range(12)]
M_PER_DEG_LAT = 6_371_008.8 * np.pi / 180
NOFILTER = DedupParams(apply_filters=False)


class RuleModel:
    """Classifier stub: probability from distance and room count only."""

    threshold = 0.5

    def predict_matrix(self, F):
        F = np.atleast_2d(F)
        d, rooms = F[:, COL["geo_dist"]], F[:, COL["rooms_diff"]]
        p = np.where(d < 5, 0.9, np.where(d < 200, 0.6, 0.1))
        return np.where(rooms >= 2, 0.1, p)


class ExactModel:
    """Duplicates are exactly the pairs with equal location, price and rooms."""

    threshold = 0.5

    def predict_matrix(self, F):
        F = np.atleast_2d(F)
        same = (F[:, COL["geo_dist"]] < 0.5) & (F[:, COL["price_abs"]] == 0) & (F[:, COL["rooms_diff"]] == 0)
        return np.where(same, 0.95, 0.05)


def north(m):
    return 45.0 + m / M_PER_DEG_LAT


def ad(id, week=0, **kw):
    kw.setdefault("rooms", 3)
    return make_ad(id, created=W[week], **kw)


def _parts(parts):
    return sorted(sorted(p) for p in parts)


def test_support_needed_values():
    assert [support_needed(n) for n in range(1, 12)] == [1, 2, 2, 3, 3, 3, 3, 2, 2, 1, 1]
    assert support_needed(4, (1, 1)) == 4
    assert support_needed(0) == 1


def test_empty_delta_only_moves_the_week():
    state = initial_state(Snapshot(W[0], (ad("a"), ad("b", lat=north(1000)))), RuleModel(), NOFILTER)
    units, mapping = dict(state.units), dict(state.ad_unit)
    process_week(state, WeekDelta(W[1]), RuleModel(), NOFILTER)
    assert state.week == W[1] and state.units == units and state.ad_unit == mapping


def test_delta_must_be_later():
    state = initial_state(Snapshot(W[1], (ad("a"),)), RuleModel(), NOFILTER)
    with pytest.raises(ValueError):
        process_week(state, WeekDelta(W[1]), RuleModel(), NOFILTER)


def test_new_ad_joins_matching_unit():
    state = initial_state(Snapshot(W[0], (ad("a"), ad("b", lat=north(1000)))), RuleModel(), NOFILTER)
    n_units = len(state.units)
    process_week(state, WeekDelta(W[1], new_ads=(ad("x", 1),)), RuleModel(), NOFILTER)
    assert len(state.units) == n_units
    assert state.ad_unit["x"] == state.ad_unit["a"]
    assert state.units[state.ad_unit["x"]].member_ad_ids == {"a", "x"}


def test_new_ad_between_two_units_takes_the_stronger_link():
    # a and b differ by two rooms so they stay apart; x links to a (0.9) and b (0.6)
    a, b = ad("a", rooms=3), ad("b", lat=north(120), rooms=5)
    state = initial_state(Snapshot(W[0], (a, b)), RuleModel(), NOFILTER)
    ua, ub = state.ad_unit["a"], state.ad_unit["b"]
    assert ua != ub
    process_week(state, WeekDelta(W[1], new_ads=(ad("x", 1, rooms=4),)), RuleModel(), NOFILTER)
    assert state.ad_unit["x"] == ua
    assert state.units[ub].member_ad_ids == {"b"}
    removed = [e for e in state.audit if e.kind == "edge_removed" and e.week == W[1]]
    assert removed[0].ad_ids == ("x", ub) and removed[0].detail.startswith("units:0.6")
    assert merge_violations(state.audit) == []


def test_updated_ad_is_detached_and_rematched():
    a, b = ad("a"), ad("b")
    state = initial_state(Snapshot(W[0], (a, b)), RuleModel(), NOFILTER)
    assert state.ad_unit["a"] == state.ad_unit["b"]
    moved = replace(b, location=a.location.__class__(north(5000), 9.0))
    process_week(state, WeekDelta(W[1], updated_ads=(moved,)), RuleModel(), NOFILTER)
    assert state.ad_unit["a"] != state.ad_unit["b"]
    assert [e.kind for e in state.audit if e.week == W[1]][:1] == ["detach"]
    assert state.ads["b"].created_on == W[0]
    state.check()


def test_unit_exits_when_every_member_is_removed():
    state = initial_state(Snapshot(W[0], (ad("a"), ad("b"))), RuleModel(), NOFILTER)
    uid = state.ad_unit["a"]
    process_week(state, WeekDelta(W[1], removed_ad_ids=frozenset({"a"})), RuleModel(), NOFILTER)
    assert state.units[uid].exit_date is None
    process_week(state, WeekDelta(W[2], removed_ad_ids=frozenset({"b"})), RuleModel(), NOFILTER)
    assert state.units[uid].exit_date == W[2]
    assert [e.unit_id for e in state.audit if e.kind == "exit"] == [uid]


def test_single_snapshot_without_duplicates_maps_one_to_one():
    ads = tuple(ad(f"a{k}", lat=north(1000 * k)) for k in range(5))
    res = run_stream([Snapshot(W[0], ads)], RuleModel(), NOFILTER)
    assert _parts(res.state.partition()) == [[f"a{k}"] for k in range(5)]


def _coexisting_stream(seed, weeks=8, homes_per_week=12):
    """Homes whose listings all appear in the same week; some later change price or vanish."""
    rng = np.random.default_rng(seed)
    live, snaps, k = {}, [], 0
    for w in range(weeks):
        for ad_id in list(live):
            r = rng.random()
            if r < 0.08:
                del live[ad_id]
            elif r < 0.12:
                live[ad_id] = replace(live[ad_id], asking_price=live[ad_id].asking_price * 0.95)
        for _ in range(homes_per_week):
            lat, lon = north(rng.uniform(0, 800)), 9.0 + rng.uniform(0, 0.01)
            price = float(rng.choice([150_000, 180_000, 200_000]))
            rooms = int(rng.integers(2, 5))
            for j in range(int(rng.integers(1, 4))):
                live[f"h{k}-{j}"] = ad(f"h{k}-{j}", w, lat=lat, lon=lon, price=price, rooms=rooms,
                                       agency_id=f"ag{j}")
            k += 1
        snaps.append(Snapshot(W[w], tuple(live[i] for i in sorted(live))))
    return snaps


@pytest.mark.parametrize("seed", range(4))
def test_incremental_equals_batch_with_exact_classifier(seed):
    snaps = _coexisting_stream(seed)
    inc = run_stream(snaps, ExactModel(), NOFILTER)
    inc.state.check()
    bat = batch_clusters(assemble_ads(snaps).values(), ExactModel(), NOFILTER)
    assert _parts(inc.state.partition()) == _parts(bat)
    assert merge_violations(inc.audit) == []


def test_partition_invariant_every_week():
    snaps = _coexisting_stream(9)
    from listingdedup.ingest import diff_snapshots

    state = initial_state(snaps[0], RuleModel(), NOFILTER)
    for prev, nxt in zip(snaps, snaps[1:]):
        process_week(state, diff_snapshots(prev, nxt), RuleModel(), NOFILTER)
        state.check()
        for u in state.units.values():
            members = [state.ads[m] for m in u.member_ad_ids]
            if all(m.removed_on is not None for m in members):
                assert u.exit_date == max(m.removed_on for m in members)
    assert merge_violations(state.audit) == []


# --- filters ----------------------------------------------------------------


def _unit(id, entry, exit=None, price=240_000.0, area=80.0, zone="MI:Z01", **kw):
    a = make_ad(id, created=entry, removed_on=exit, price=price, floor_area=area, zone_id=zone, **kw)
    return aggregate_unit([a], "U" + id)


def test_min_duration_filter():
    jan4 = dt.date(2016, 1, 4)
    units = [_unit("a", jan4, dt.date(2016, 1, 11)), _unit("b", jan4, dt.date(2016, 1, 18)), _unit("c", jan4)]
    assert [u.id for u in filter_min_duration(units)] == ["Ub", "Uc"]


def _homogeneous_city(n=40, outlier_factor=3.0):
    rng = np.random.default_rng(0)
    units = []
    for k in range(n):
        area = float(rng.uniform(50, 150))
        units.append(_unit(f"u{k:02d}", W[0], price=3000.0 * area, area=area, bathrooms=int(rng.integers(1, 3)),
                           maintenance=int(rng.integers(1, 5)), elevator=bool(k % 2), floor=int(k % 5)))
    units[7] = replace(units[7], asking_price=units[7].asking_price * outlier_factor)
    return units


def test_hedonic_ratio_at_exact_prediction_is_one():
    units = _homogeneous_city(outlier_factor=1.0)
    assert np.allclose(hedonic_ratios(units), 1.0)


def test_hedonic_filter_drops_only_the_overpriced_unit():
    units = _homogeneous_city()
    kept = filter_hedonic_ratio(units)
    assert [u.id for u in units if u not in kept] == ["Uu07"]
    low = _homogeneous_city(outlier_factor=0.4)
    assert [u.id for u in low if u not in filter_hedonic_ratio(low)] == ["Uu07"]


def test_hedonic_filter_small_city():
    units = _homogeneous_city(n=10)
    with pytest.raises(InsufficientDataError):
        filter_hedonic_ratio(units)
    assert filter_hedonic_ratio(units, small_city="keep") == units
