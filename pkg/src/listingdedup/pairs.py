"""Pair comparison vectors, the same/cross-agency model pair and its evaluation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .model import BINARY_TRAITS, ORDERED_TRAITS, UNORDERED_TRAITS
from .normalize import (
    ExternalEmbeddings,
    HashedEmbedding,
    cosine_distance_rows,
    haversine_m,
    levenshtein_norm,
    relative_difference,
)
from .tree import DecisionTree, TreeParams, TrainingError

FEATURE_NAMES = (
    "price_rel", "price_abs", "area_rel", "area_abs", "floor_diff", "geo_dist",
    *(f"{t}_diff" for t in ORDERED_TRAITS),
    *(f"{t}_match" for t in BINARY_TRAITS),
    *(f"{t}_match" for t in UNORDERED_TRAITS),
    "bathrooms_diff", "rooms_diff", "text_dist", "same_agency",
)
SAME_AGENCY_COL = FEATURE_NAMES.index("same_agency")
DUPLICATE_THRESHOLD = 0.5


@dataclass(frozen=True)
class PairFeatures:
    """Comparison vector for one candidate pair; ``None`` marks a missing component."""

    price_rel: Optional[float] = None
    price_abs: Optional[float] = None
    area_rel: Optional[float] = None
    area_abs: Optional[float] = None
    floor_diff: Optional[float] = None
    geo_dist: Optional[float] = None
    maintenance_diff: Optional[float] = None
    energy_class_diff: Optional[float] = None
    garage_diff: Optional[float] = None
    garden_diff: Optional[float] = None
    kitchen_diff: Optional[float] = None
    elevator_match: Optional[float] = None
    balcony_match: Optional[float] = None
    terrace_match: Optional[float] = None
    janitor_match: Optional[float] = None
    utility_room_match: Optional[float] = None
    air_conditioning_match: Optional[float] = None
    basement_match: Optional[float] = None
    heating_match: Optional[float] = None
    property_type_match: Optional[float] = None
    bathrooms_diff: Optional[float] = None
    rooms_diff: Optional[float] = None
    text_dist: Optional[float] = None
    same_agency: bool = False

    def as_array(self) -> np.ndarray:
        return np.array(
            [np.nan if getattr(self, n) is None else float(getattr(self, n)) for n in FEATURE_NAMES]
        )

    @classmethod
    def from_array(cls, row) -> "PairFeatures":
        values = {}
        for name, v in zip(FEATURE_NAMES, row):
            values[name] = None if np.isnan(v) else float(v)
        values["same_agency"] = bool(values["same_agency"])
        return cls(**values)


assert tuple(f.name for f in fields(PairFeatures)) == FEATURE_NAMES


# --- columnar records -------------------------------------------------------


def _num(records, name):
    return np.array([np.nan if getattr(r, name) is None else float(getattr(r, name)) for r in records])


@dataclass
class RecordTable:
    """Column arrays for ads or unit pseudo-ads.

    ``texts[i]``/``emb[i]`` hold one entry per description available for the
    record (several for a unit); ``agencies[i]`` the set of posting agencies.
    """

    ids: list
    price: np.ndarray
    area: np.ndarray
    floor: np.ndarray
    rooms: np.ndarray
    bathrooms: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    ordered: np.ndarray
    binary: np.ndarray
    unordered: np.ndarray
    agencies: list
    texts: list
    emb: list
    index: dict = field(default_factory=dict)

    @classmethod
    def build(cls, records, texts=None, agencies=None, provider=None, embeddings=None):
        """``texts``/``agencies`` default to each ad's own description/agency.

        Pass them (one tuple/set per record) for housing units. ``embeddings``
        may give precomputed vectors aligned with ``texts``.
        """
        records = list(records)
        provider = HashedEmbedding() if provider is None else provider
        if texts is None:
            texts = [(r.description,) if r.description is not None else () for r in records]
        if agencies is None:
            agencies = [frozenset([r.agency_id]) for r in records]
        if embeddings is None:
            embeddings = []
            for r, tx in zip(records, texts):
                if isinstance(provider, ExternalEmbeddings):
                    embeddings.append(np.atleast_2d(provider.embed_id(r.id).values))
                else:
                    embeddings.append(provider.embed_many(list(tx)))
        binary = np.array(
            [[np.nan if getattr(r, t) is None else float(getattr(r, t)) for t in BINARY_TRAITS] for r in records]
        ).reshape(len(records), len(BINARY_TRAITS))
        ordered = np.column_stack([_num(records, t) for t in ORDERED_TRAITS]) if records else np.zeros((0, len(ORDERED_TRAITS)))
        unordered = np.array(
            [[getattr(r, t) for t in UNORDERED_TRAITS] for r in records], dtype=object
        ).reshape(len(records), len(UNORDERED_TRAITS))
        ids = [r.id for r in records]
        return cls(
            ids=ids,
            price=_num(records, "asking_price"),
            area=_num(records, "floor_area"),
            floor=_num(records, "floor"),
            rooms=_num(records, "rooms"),
            bathrooms=_num(records, "bathrooms"),
            lat=np.array([r.location.lat for r in records]),
            lon=np.array([r.location.lon for r in records]),
            ordered=ordered,
            binary=binary,
            unordered=unordered,
            agencies=[frozenset(a) for a in agencies],
            texts=[tuple(t) for t in texts],
            emb=list(embeddings),
            index={k: i for i, k in enumerate(ids)},
        )

    def __len__(self):
        return len(self.ids)


def same_agency_flags(A: RecordTable, B: RecordTable, ia, ib) -> np.ndarray:
    out = np.zeros(len(ia), dtype=bool)
    for k, (i, j) in enumerate(zip(ia, ib)):
        sa, sb = A.agencies[i], B.agencies[j]
        out[k] = len(sa) == 1 and sa == sb and "" not in sa
    return out


def _text_distance(A, B, i, j, same):
    if not A.texts[i] or not B.texts[j]:
        return np.nan
    if same:
        return min(levenshtein_norm(s, t) for s in A.texts[i] for t in B.texts[j])
    ea, eb = A.emb[i], B.emb[j]
    na = np.linalg.norm(ea, axis=1, keepdims=True)
    nb = np.linalg.norm(eb, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = (ea / np.where(na > 0, na, 1)) @ (eb / np.where(nb > 0, nb, 1)).T
    sim = np.where((na > 0) & (nb.T > 0), sim, 0.0)
    return float(np.clip(1.0 - sim.max(), 0.0, 2.0))


def feature_matrix(A: RecordTable, B: RecordTable, ia, ib) -> np.ndarray:
    """Comparison vectors for pairs ``(A[ia[k]], B[ib[k]])``; rows follow FEATURE_NAMES."""
    ia = np.asarray(ia, dtype=np.int64)
    ib = np.asarray(ib, dtype=np.int64)
    m = len(ia)
    F = np.full((m, len(FEATURE_NAMES)), np.nan)
    if m == 0:
        return F
    col = {n: k for k, n in enumerate(FEATURE_NAMES)}
    F[:, col["price_rel"]] = relative_difference(A.price[ia], B.price[ib])
    F[:, col["price_abs"]] = np.abs(A.price[ia] - B.price[ib])
    F[:, col["area_rel"]] = relative_difference(A.area[ia], B.area[ib])
    F[:, col["area_abs"]] = np.abs(A.area[ia] - B.area[ib])
    F[:, col["floor_diff"]] = np.abs(A.floor[ia] - B.floor[ib])
    F[:, col["geo_dist"]] = haversine_m(A.lat[ia], A.lon[ia], B.lat[ib], B.lon[ib])
    for k, t in enumerate(ORDERED_TRAITS):
        F[:, col[f"{t}_diff"]] = np.abs(A.ordered[ia, k] - B.ordered[ib, k])
    for k, t in enumerate(BINARY_TRAITS):
        a, b = A.binary[ia, k], B.binary[ib, k]
        F[:, col[f"{t}_match"]] = np.where(np.isnan(a) | np.isnan(b), np.nan, (a == b).astype(float))
    for k, t in enumerate(UNORDERED_TRAITS):
        a, b = A.unordered[ia, k], B.unordered[ib, k]
        known = np.array([x is not None and y is not None for x, y in zip(a, b)], dtype=bool)
        eq = np.array([x == y for x, y in zip(a, b)], dtype=float)
        F[:, col[f"{t}_match"]] = np.where(known, eq, np.nan)
    F[:, col["bathrooms_diff"]] = np.abs(A.bathrooms[ia] - B.bathrooms[ib])
    F[:, col["rooms_diff"]] = np.abs(A.rooms[ia] - B.rooms[ib])
    same = same_agency_flags(A, B, ia, ib)
    F[:, col["same_agency"]] = same.astype(float)

    text = np.full(m, np.nan)
    simple = np.array(
        [len(A.texts[i]) == 1 and len(B.texts[j]) == 1 for i, j in zip(ia, ib)], dtype=bool
    ) if m else np.zeros(0, bool)
    fast = simple & ~same
    if fast.any():
        ea = np.vstack([A.emb[i][0] for i in ia[fast]])
        eb = np.vstack([B.emb[j][0] for j in ib[fast]])
        text[fast] = cosine_distance_rows(ea, eb)
    for k in np.nonzero(~fast)[0]:
        text[k] = _text_distance(A, B, ia[k], ib[k], same[k])
    F[:, col["text_dist"]] = text
    return F


def extract_features(pair, ad_a, ad_b, provider=None) -> PairFeatures:
    """Comparison vector for one pair of ads (symmetric in argument order)."""
    if pair is not None and {pair.id_a, pair.id_b} != {ad_a.id, ad_b.id}:
        raise ValueError("pair does not match the ads given")
    ta = RecordTable.build([ad_a], provider=provider)
    tb = RecordTable.build([ad_b], provider=provider)
    return PairFeatures.from_array(feature_matrix(ta, tb, [0], [0])[0])


# --- model pair -------------------------------------------------------------


class UntrainedModelError(RuntimeError):
    pass


@dataclass
class TrainedModelPair:
    model_same_agency: Optional[DecisionTree] = None
    model_cross_agency: Optional[DecisionTree] = None
    threshold: float = DUPLICATE_THRESHOLD

    def check(self):
        if self.model_same_agency is None or self.model_cross_agency is None:
            raise UntrainedModelError("both same- and cross-agency models must be trained")

    def predict_matrix(self, F) -> np.ndarray:
        self.check()
        F = np.atleast_2d(np.asarray(F, dtype=float))
        out = np.empty(len(F))
        same = F[:, SAME_AGENCY_COL] == 1.0
        if same.any():
            out[same] = self.model_same_agency.predict_proba(F[same])
        if (~same).any():
            out[~same] = self.model_cross_agency.predict_proba(F[~same])
        return out

    def to_dict(self) -> dict:
        self.check()
        return {
            "format": "listingdedup-models/1",
            "threshold": self.threshold,
            "same_agency": self.model_same_agency.to_dict(),
            "cross_agency": self.model_cross_agency.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "TrainedModelPair":
        if d.get("format") != "listingdedup-models/1":
            raise ValueError("not a model-pair document")
        return cls(
            DecisionTree.from_dict(d["same_agency"]),
            DecisionTree.from_dict(d["cross_agency"]),
            float(d.get("threshold", DUPLICATE_THRESHOLD)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "TrainedModelPair":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def predict_proba(model: TrainedModelPair, f) -> float:
    row = f.as_array() if isinstance(f, PairFeatures) else np.asarray(f, dtype=float)
    return float(model.predict_matrix(row[None, :])[0])


def classify(model: TrainedModelPair, keys: Sequence, F) -> dict:
    """Pairs whose duplicate probability is strictly above the model threshold."""
    if len(keys) == 0:
        return {}
    p = model.predict_matrix(F)
    return {k: float(pk) for k, pk in zip(keys, p) if pk > model.threshold}


def train_model_pair(X, y, params=TreeParams(), threshold=DUPLICATE_THRESHOLD) -> TrainedModelPair:
    """Fit one tree on same-agency rows and one on cross-agency rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    same = X[:, SAME_AGENCY_COL] == 1.0
    models = []
    for mask, label in ((same, "same-agency"), (~same, "cross-agency")):
        try:
            models.append(DecisionTree.fit(X[mask], y[mask], FEATURE_NAMES, params))
        except TrainingError as exc:
            raise TrainingError(f"{label} model: {exc}") from None
    return TrainedModelPair(models[0], models[1], threshold)


# --- labelled samples -------------------------------------------------------


@dataclass(frozen=True)
class LabeledPair:
    features: PairFeatures
    duplicate: bool


def write_samples(path, X, y) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(FEATURE_NAMES) + ["label"])
        for row, label in zip(X, y):
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row] + [int(label)])


def read_samples(path):
    X, y = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            X.append([np.nan if rec[n] == "" else float(rec[n]) for n in FEATURE_NAMES])
            y.append(int(rec["label"]))
    return np.array(X).reshape(len(X), len(FEATURE_NAMES)), np.array(y, dtype=int)


# --- evaluation -------------------------------------------------------------


def precision_recall_f(tp: float, fp: float, fn: float):
    """Rates that ignore true negatives.

    With no predicted positives precision is reported as 1; with no actual
    positives recall is 1. F is the harmonic mean (0 when both rates are 0).
    """
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    repetitions: int
    train_fraction: float
    per_repetition: tuple = ()

    def __post_init__(self):
        for v in (self.precision, self.recall, self.f_measure):
            if not 0.0 <= v <= 1.0:
                raise ValueError("rates must lie in [0, 1]")


def stratified_split(y, train_fraction, rng):
    train, test = [], []
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < 2:
            raise ValueError("cannot stratify: a class has fewer than 2 samples")
        idx = rng.permutation(idx)
        k = int(round(train_fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1)
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def evaluate_monte_carlo(X, y, params=TreeParams(), repetitions=100, train_fraction=0.9,
                         seed=0, threshold=DUPLICATE_THRESHOLD) -> EvalReport:
    """Average out-of-sample precision/recall over random stratified splits.

    F is reported as the harmonic mean of the averaged precision and recall;
    per-repetition tuples ``(precision, recall, f)`` are kept as well.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    rng = np.random.default_rng(seed)
    reps = []
    for _ in range(repetitions):
        tr, te = stratified_split(y, train_fraction, rng)
        tree = DecisionTree.fit(X[tr], y[tr], params=params)
        pred = tree.predict_proba(X[te]) > threshold
        truth = y[te] == 1
        tp = int(np.sum(pred & truth))
        fp = int(np.sum(pred & ~truth))
        fn = int(np.sum(~pred & truth))
        reps.append(precision_recall_f(tp, fp, fn))
    if not reps:
        return EvalReport(1.0, 1.0, 1.0, 0, train_fraction, ())
    p = float(np.mean([r[0] for r in reps]))
    r = float(np.mean([r[1] for r in reps]))
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return EvalReport(p, r, f, repetitions, train_fraction, tuple(reps))
