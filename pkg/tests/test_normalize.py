import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from listingdedup.model import GeoPoint
from listingdedup.normalize import (
    HashedEmbedding,
    cosine_distance,
    encode_ordered,
    geo_distance_m,
    haversine_m,
    levenshtein_norm,
    relative_difference,
)


def _lev(s, t):
    # textbook dynamic program, independent of the library used in the package
    prev = list(range(len(t) + 1))
    for i, a in enumerate(s, 1):
        cur = [i]
        for j, b in enumerate(t, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a != b)))
        prev = cur
    return prev[-1]


@pytest.mark.parametrize("s,t,want", [
    ("kitten", "sitting", 3 / 7), ("", "", 0.0), ("abc", "", 1.0), ("same", "same", 0.0), (None, "ab", 1.0),
])
def test_levenshtein_examples(s, t, want):
    assert levenshtein_norm(s, t) == pytest.approx(want)


@given(st.text(max_size=15), st.text(max_size=15))
def test_levenshtein_matches_dynamic_program(s, t):
    want = _lev(s, t) / max(len(s), len(t), 1)
    assert levenshtein_norm(s, t) == pytest.approx(want)
    assert levenshtein_norm(s, t) == levenshtein_norm(t, s)
    assert 0.0 <= levenshtein_norm(s, t) <= 1.0


def test_haversine_known_distances():
    # one degree of latitude on the mean-radius sphere
    assert geo_distance_m(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(6_371_008.8 * math.pi / 180)
    # quarter of the equator
    assert haversine_m(0.0, 0.0, 0.0, 90.0) == pytest.approx(6_371_008.8 * math.pi / 2)
    assert geo_distance_m(GeoPoint(45, 9), GeoPoint(45, 9)) == 0.0


@given(st.floats(-80, 80), st.floats(-170, 170), st.floats(-80, 80), st.floats(-170, 170))
def test_haversine_symmetric_nonnegative(a, b, c, d):
    assert haversine_m(a, b, c, d) == pytest.approx(haversine_m(c, d, a, b), abs=1e-6)
    assert haversine_m(a, b, c, d) >= 0


def test_encode_ordered():
    assert encode_ordered("energy_class", "A+") == 8
    assert encode_ordered("garden", None) is None
    with pytest.raises(KeyError):
        encode_ordered("garden", "huge")


def test_relative_difference_uses_lower_value():
    assert relative_difference(np.array([100.0]), np.array([125.0]))[0] == pytest.approx(0.25)
    assert relative_difference(np.array([125.0]), np.array([100.0]))[0] == pytest.approx(0.25)


def test_hashed_embedding_deterministic_and_text_sensitive():
    e = HashedEmbedding()
    a = e.embed("Bright flat with balcony").values
    assert np.array_equal(a, e.embed("bright FLAT with balcony").values)
    assert cosine_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert cosine_distance(a, e.embed("garage for rent").values) > 0.5


def test_cosine_distance_examples():
    a = np.array([1.0, 2.0, 0.0])
    assert cosine_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)
    assert cosine_distance(a, -a) == pytest.approx(2.0)
    assert cosine_distance(np.zeros(3), a) == 1.0
    with pytest.raises(ValueError):
        cosine_distance(np.ones(2), np.ones(3))


def test_embedding_of_empty_text_is_zero_and_disjoint_texts_are_orthogonal():
    e = HashedEmbedding()
    assert not e.embed("").values.any()
    u, v = e.embed("alpha beta"), e.embed("gamma delta")
    if not np.any((u.values > 0) & (v.values > 0)):  # no bucket collision for these tokens
        assert cosine_distance(u.values, v.values) == pytest.approx(1.0)


def test_small_latitude_step_at_equator():
    assert geo_distance_m(GeoPoint(0, 0), GeoPoint(0.001, 0)) == pytest.approx(111.2, abs=0.5)


def test_levenshtein_abd():
    assert levenshtein_norm("abc", "abd") == pytest.approx(1 / 3)


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(*[st.text("abc", min_size=n, max_size=n)] * 3)))
def test_levenshtein_triangle_inequality_equal_lengths(strings):
    a, b, c = strings
    assert levenshtein_norm(a, c) <= levenshtein_norm(a, b) + levenshtein_norm(b, c) + 1e-12


def test_encode_ordered_is_monotone():
    from listingdedup.model import DEFAULT_SCHEMES
    for trait, scheme in DEFAULT_SCHEMES.items():
        levels = [encode_ordered(trait, label) for label in scheme.labels]
        assert levels == sorted(levels) and len(set(levels)) == len(levels)
    assert encode_ordered("maintenance", "to be fully renovated") == 1
    assert encode_ordered("maintenance", "new") == 4
