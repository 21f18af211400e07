"""Deduplication of real-estate listing streams and listing-based market indicators."""

from .blocking import BlockingParams, candidate_pairs
from .cluster import DuplicateGraph, aggregate_unit, resolve_clusters
from .model import Ad, GeoPoint, HousingUnit
from .pairs import TrainedModelPair, classify, train_model_pair
from .time_machine import DedupParams, batch_dedup, process_week, run_stream
from .tree import DecisionTree, TreeParams

__version__ = "0.1.0"

__all__ = [
    "Ad", "BlockingParams", "DecisionTree", "DedupParams", "DuplicateGraph", "GeoPoint", "HousingUnit",
    "TrainedModelPair", "TreeParams", "aggregate_unit", "batch_dedup", "candidate_pairs", "classify",
    "process_week", "resolve_clusters", "run_stream", "train_model_pair",
]
