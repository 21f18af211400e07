"""Labelled pair samples for fitting the duplicate classifiers."""

from __future__ import annotations

import numpy as np

from .blocking import BlockingParams, Points, candidate_index_pairs
from .ingest import assemble_ads
from .pairs import TrainedModelPair, feature_matrix, train_model_pair
from .time_machine import _Embedder
from .tree import TreeParams


def labelled_pairs(ads, ad_unit: dict, blocking=BlockingParams(), provider=None):
    """Features and labels for every candidate pair of ``ads``.

    A pair is positive when both ads belong to the same unit in ``ad_unit``.
    Returns ``(X, y, keys)`` with ``keys`` the ``(id_a, id_b)`` tuples.
    """
    ads = sorted(ads, key=lambda a: a.id)
    missing = [a.id for a in ads if a.id not in ad_unit]
    if missing:
        raise KeyError(f"{len(missing)} ads lack a label, e.g. {missing[0]}")
    table = _Embedder(provider).ad_table(ads)
    ia, ib, _ = candidate_index_pairs(Points.from_records(ads), None, blocking)
    X = feature_matrix(table, table, ia, ib)
    y = np.array([ad_unit[ads[i].id] == ad_unit[ads[j].id] for i, j in zip(ia, ib)], dtype=int)
    keys = [(ads[i].id, ads[j].id) for i, j in zip(ia, ib)]
    return X, y, keys


def stream_pairs(snapshots, ad_unit: dict, blocking=BlockingParams(), provider=None):
    """:func:`labelled_pairs` over the union of ads seen in a snapshot stream."""
    return labelled_pairs(assemble_ads(snapshots).values(), ad_unit, blocking, provider)


def train_from_stream(snapshots, ad_unit: dict, tree=TreeParams(), blocking=BlockingParams(),
                      provider=None) -> TrainedModelPair:
    X, y, _ = stream_pairs(snapshots, ad_unit, blocking, provider)
    return train_model_pair(X, y, tree)
