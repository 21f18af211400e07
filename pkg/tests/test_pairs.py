import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_ad
from listingdedup.pairs import (
    FEATURE_NAMES,
    SAME_AGENCY_COL,
    PairFeatures,
    TrainedModelPair,
    UntrainedModelError,
    classify,
    evaluate_monte_carlo,
    extract_features,
    precision_recall_f,
    predict_proba,
    read_samples,
    train_model_pair,
    write_samples,
)
from listingdedup.tree import DecisionTree, Node, TreeParams

COL = {n: k for k, n in enumerate(FEATURE_NAMES)}


def test_identical_ads_same_agency():
    a = make_ad("a", agency_id="x", maintenance=2, elevator=True, heating="gas", rooms=3)
    f = extract_features(None, a, make_ad("b", agency_id="x", maintenance=2, elevator=True, heating="gas",
                                          rooms=3, description=a.description))
    assert f.same_agency
    assert f.price_rel == f.price_abs == f.geo_dist == f.maintenance_diff == f.rooms_diff == 0.0
    assert f.elevator_match == f.heating_match == 1.0
    assert f.text_dist == pytest.approx(0.0, abs=1e-12)
    assert f.balcony_match is None  # both missing stays missing


def test_price_and_ordered_differences():
    f = extract_features(None, make_ad("a", price=100_000.0, maintenance=2),
                         make_ad("b", price=120_000.0, maintenance=4))
    assert f.price_rel == pytest.approx(0.20) and f.price_abs == pytest.approx(20_000.0)
    assert f.maintenance_diff == 2.0 and not f.same_agency


def test_private_sellers_are_not_one_agency():
    assert not extract_features(None, make_ad("a"), make_ad("b")).same_agency


ads = st.builds(
    make_ad, st.sampled_from(["a", "b"]),
    lat=st.floats(45.0, 45.003), lon=st.floats(9.0, 9.003), price=st.floats(5e4, 5e5),
    floor=st.one_of(st.none(), st.integers(-1, 10)), rooms=st.one_of(st.none(), st.integers(1, 6)),
    maintenance=st.one_of(st.none(), st.integers(1, 4)), elevator=st.one_of(st.none(), st.booleans()),
    agency_id=st.sampled_from(["", "x", "y"]),
    description=st.one_of(st.none(), st.sampled_from(["bright flat", "flat with garden", "Bright flat!"])),
)


@given(ads, ads)
def test_features_symmetric(a, b):
    fa = extract_features(None, a, b).as_array()
    fb = extract_features(None, b, a).as_array()
    assert np.allclose(fa, fb, equal_nan=True, rtol=1e-12, atol=1e-9)


def test_feature_array_round_trip():
    f = PairFeatures(price_rel=0.1, geo_dist=12.0, same_agency=True)
    assert PairFeatures.from_array(f.as_array()) == f


def _stub_tree(counts):
    # single leaf with (negatives, positives) counts
    return DecisionTree(FEATURE_NAMES, [Node(np.array(counts, dtype=float))])


def test_leaf_probability_is_laplace_smoothed():
    model = TrainedModelPair(_stub_tree([1, 9]), _stub_tree([9, 1]))
    same = PairFeatures(same_agency=True)
    cross = PairFeatures(same_agency=False)
    assert predict_proba(model, same) == pytest.approx(10 / 12)
    assert predict_proba(model, cross) == pytest.approx(2 / 12)
    assert predict_proba(model, same) == predict_proba(model, same)


def test_classify_threshold_is_strict():
    # counts (12, 13) give exactly 14/27 > 0.5; (12, 12) gives 0.5
    keep = TrainedModelPair(_stub_tree([12, 13]), _stub_tree([12, 12]))
    F = np.vstack([PairFeatures(same_agency=True).as_array(), PairFeatures(same_agency=False).as_array()])
    out = classify(keep, [("a", "b"), ("c", "d")], F)
    assert list(out) == [("a", "b")] and out[("a", "b")] == pytest.approx(14 / 27)
    assert classify(keep, [], np.zeros((0, len(FEATURE_NAMES)))) == {}
    at_052 = TrainedModelPair(_stub_tree([11, 12]), _stub_tree([1, 1]))
    assert predict_proba(at_052, PairFeatures(same_agency=True)) == pytest.approx(0.52)
    assert classify(at_052, [("x", "y")], PairFeatures(same_agency=True).as_array()[None, :])


def test_untrained_model_raises():
    with pytest.raises(UntrainedModelError):
        predict_proba(TrainedModelPair(), PairFeatures())


def _separable(n=100, seed=0):
    rng = np.random.default_rng(seed)
    X = np.full((2 * n, len(FEATURE_NAMES)), np.nan)
    X[:, COL["geo_dist"]] = np.r_[rng.uniform(0, 20, n), rng.uniform(200, 400, n)]
    X[:, SAME_AGENCY_COL] = rng.integers(0, 2, 2 * n)
    y = np.r_[np.ones(n), np.zeros(n)].astype(int)
    return X, y


def test_noiseless_stump_on_distance():
    X = np.full((100, len(FEATURE_NAMES)), np.nan)
    X[:, COL["geo_dist"]] = np.r_[np.full(50, 10.0), np.full(50, 1000.0)]
    X[:, SAME_AGENCY_COL] = 0.0
    y = np.r_[np.ones(50), np.zeros(50)].astype(int)
    tree = DecisionTree.fit(X, y, FEATURE_NAMES)
    assert FEATURE_NAMES[tree.root.feature] == "geo_dist" and tree.root.threshold == 505.0
    p = tree.predict_proba(X)
    assert p[:50].min() > 0.98 and p[50:].max() < 0.02


def test_constant_features_give_prior_leaf():
    X = np.zeros((30, 3))
    y = np.r_[np.ones(10), np.zeros(20)].astype(int)
    tree = DecisionTree.fit(X, y)
    assert tree.root.is_leaf and tree.predict_proba(X[:1])[0] == pytest.approx(11 / 32)


def test_model_pair_routes_and_persists(tmp_path):
    X, y = _separable()
    model = train_model_pair(X, y, TreeParams(min_leaf=2))
    p = model.predict_matrix(X)
    assert np.all((p > 0.5) == (y == 1))
    assert np.all((p > 0) & (p < 1))
    model.save(tmp_path / "m.json")
    back = TrainedModelPair.load(tmp_path / "m.json")
    assert np.array_equal(back.predict_matrix(X), p)


def test_samples_file_round_trip(tmp_path):
    X, y = _separable(10)
    write_samples(tmp_path / "s.csv", X, y)
    X2, y2 = read_samples(tmp_path / "s.csv")
    assert np.array_equal(X2, X, equal_nan=True) and np.array_equal(y2, y)


@pytest.mark.parametrize("counts,want", [
    ((9, 1, 1), (0.9, 0.9, 0.9)),
    ((3, 0, 1), (1.0, 0.75, 6 / 7)),
    ((0, 0, 0), (1.0, 1.0, 1.0)),
    ((0, 2, 2), (0.0, 0.0, 0.0)),
])
def test_precision_recall_f_fixtures(counts, want):
    assert precision_recall_f(*counts) == pytest.approx(want)


@given(st.integers(0, 100), st.integers(0, 100), st.integers(0, 100))
def test_f_is_harmonic_mean(tp, fp, fn):
    p, r, f = precision_recall_f(tp, fp, fn)
    if p + r > 0:
        assert f == pytest.approx(2 * p * r / (p + r))


def test_monte_carlo_perfect_and_deterministic():
    X, y = _separable()
    rep = evaluate_monte_carlo(X, y, TreeParams(min_leaf=2), repetitions=10, seed=4)
    assert (rep.precision, rep.recall, rep.f_measure) == (1.0, 1.0, 1.0)
    again = evaluate_monte_carlo(X, y, TreeParams(min_leaf=2), repetitions=10, seed=4)
    assert again.per_repetition == rep.per_repetition


def test_monte_carlo_needs_both_classes_in_splits():
    X, y = _separable(20)
    y[:] = 0
    y[0] = 1
    with pytest.raises(ValueError):
        evaluate_monte_carlo(X, y, repetitions=2)
