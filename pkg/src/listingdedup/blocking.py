"""Candidate-pair generation with a spatial grid.

A pair of records is a candidate when they are closer than ``radius_m`` and
their asking prices differ by less than ``max_rel_gap`` (relative to the
lower price) or by less than ``max_abs_gap`` euro. Records in different
cities are never paired. The grid only prunes work; the predicate is applied
exactly, so the result equals the brute-force evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .normalize import EARTH_RADIUS_M, haversine_m

RADIUS_M = 400.0
MAX_REL_GAP = 0.25
MAX_ABS_GAP = 50_000.0


@dataclass(frozen=True)
class BlockingParams:
    radius_m: float = RADIUS_M
    max_rel_gap: float = MAX_REL_GAP
    max_abs_gap: float = MAX_ABS_GAP


@dataclass(frozen=True)
class CandidatePair:
    id_a: str
    id_b: str
    same_agency: bool
    distance_m: float
    price_rel: float
    price_abs: float

    def __post_init__(self):
        if self.id_a == self.id_b:
            raise ValueError("a record cannot pair with itself")
        if self.id_b < self.id_a:
            a, b = self.id_b, self.id_a
            object.__setattr__(self, "id_a", a)
            object.__setattr__(self, "id_b", b)

    @property
    def key(self) -> tuple:
        return (self.id_a, self.id_b)


@dataclass
class Points:
    """Columnar view of anything with a location, a price and a city."""

    ids: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    price: np.ndarray
    city: np.ndarray

    @classmethod
    def from_records(cls, records) -> "Points":
        records = list(records)
        return cls(
            ids=np.array([r.id for r in records], dtype=object),
            lat=np.array([r.location.lat for r in records], dtype=float),
            lon=np.array([r.location.lon for r in records], dtype=float),
            price=np.array([r.asking_price for r in records], dtype=float),
            city=np.array([r.city for r in records], dtype=object),
        )

    def __len__(self):
        return len(self.ids)


def _cell_sizes(max_abs_lat_deg: float, radius_m: float):
    """Grid steps (radians) such that points within ``radius_m`` sit in adjacent cells."""
    ang = radius_m / EARTH_RADIUS_M
    dlat = ang
    phi = min(math.radians(max_abs_lat_deg) + ang, math.radians(89.0))
    # hav(d) >= cos(phi1) cos(phi2) hav(dlon) bounds the longitude gap at a given distance
    s = math.sin(ang / 2.0) / math.cos(phi)
    dlon = 2.0 * math.asin(min(1.0, s))
    return dlat, dlon


class SpatialGrid:
    """Uniform lat/lon grid with cells at least ``cell_m`` across."""

    def __init__(self, points: Points, cell_m: float = RADIUS_M, max_abs_lat=None):
        self.points = points
        self.cell_m = cell_m
        if max_abs_lat is None:
            max_abs_lat = float(np.max(np.abs(points.lat))) if len(points) else 0.0
        self.max_abs_lat = max_abs_lat
        self.dlat, self.dlon = _cell_sizes(max_abs_lat, cell_m)
        rows, cols = self.cell_of(points.lat, points.lon)
        self.cells = {}
        order = np.lexsort((cols, rows))
        for i in order:
            self.cells.setdefault((int(rows[i]), int(cols[i])), []).append(int(i))
        self.cells = {k: np.array(v, dtype=np.int64) for k, v in self.cells.items()}

    def cell_of(self, lat, lon):
        rows = np.floor(np.radians(np.asarray(lat, dtype=float)) / self.dlat).astype(np.int64)
        cols = np.floor(np.radians(np.asarray(lon, dtype=float)) / self.dlon).astype(np.int64)
        return rows, cols

    def lookup(self, lat: float, lon: float) -> np.ndarray:
        """Indices of all points in the 3x3 block around (lat, lon): a superset
        of the points within ``cell_m``."""
        if abs(lat) > self.max_abs_lat + math.degrees(self.dlat):
            raise ValueError("query latitude outside the grid's calibrated band")
        r, c = self.cell_of(lat, lon)
        r, c = int(r), int(c)
        found = [self.cells[k] for k in ((r + i, c + j) for i in (-1, 0, 1) for j in (-1, 0, 1)) if k in self.cells]
        return np.sort(np.concatenate(found)) if found else np.zeros(0, dtype=np.int64)

    def query_radius(self, lat: float, lon: float, radius_m: float) -> np.ndarray:
        if radius_m > self.cell_m:
            raise ValueError("radius larger than the grid cell")
        idx = self.lookup(lat, lon)
        d = haversine_m(lat, lon, self.points.lat[idx], self.points.lon[idx])
        return idx[d < radius_m]


def build_grid(records, cell_m: float = RADIUS_M) -> SpatialGrid:
    points = records if isinstance(records, Points) else Points.from_records(records)
    return SpatialGrid(points, cell_m)


def _keep(pa: Points, pb: Points, ia, ib, params: BlockingParams):
    d = haversine_m(pa.lat[ia], pa.lon[ia], pb.lat[ib], pb.lon[ib])
    p1, p2 = pa.price[ia], pb.price[ib]
    gap = np.abs(p1 - p2)
    rel = gap / np.minimum(p1, p2)
    ok = (d < params.radius_m) & ((rel < params.max_rel_gap) | (gap < params.max_abs_gap))
    ok &= pa.city[ia] == pb.city[ib]
    return ia[ok], ib[ok], d[ok]


def candidate_index_pairs(left: Points, right: Points | None = None, params=BlockingParams()):
    """Index pairs ``(i, j, distance)`` satisfying the blocking predicate.

    Without ``right`` the pairs are within ``left`` with ``i < j``; otherwise
    ``i`` indexes ``left`` and ``j`` indexes ``right``. Output is sorted.
    """
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    if len(left) == 0 or (right is not None and len(right) == 0):
        return empty
    lats = left.lat if right is None else np.concatenate([left.lat, right.lat])
    max_lat = float(np.max(np.abs(lats)))
    grid_b = SpatialGrid(left if right is None else right, params.radius_m, max_lat)
    out_a, out_b, out_d = [], [], []
    if right is None:
        offsets = ((0, 1), (1, -1), (1, 0), (1, 1))
        for (r, c), members in grid_b.cells.items():
            if len(members) > 1:
                ia, ib = np.triu_indices(len(members), k=1)
                res = _keep(left, left, members[ia], members[ib], params)
                out_a.append(res[0]), out_b.append(res[1]), out_d.append(res[2])
            for dr, dc in offsets:
                other = grid_b.cells.get((r + dr, c + dc))
                if other is None:
                    continue
                ia = np.repeat(members, len(other))
                ib = np.tile(other, len(members))
                res = _keep(left, left, ia, ib, params)
                out_a.append(res[0]), out_b.append(res[1]), out_d.append(res[2])
    else:
        grid_a = SpatialGrid(left, params.radius_m, max_lat)
        for (r, c), members in grid_a.cells.items():
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    other = grid_b.cells.get((r + dr, c + dc))
                    if other is None:
                        continue
                    ia = np.repeat(members, len(other))
                    ib = np.tile(other, len(members))
                    res = _keep(left, right, ia, ib, params)
                    out_a.append(res[0]), out_b.append(res[1]), out_d.append(res[2])
    if not out_a:
        return empty
    ia, ib, d = np.concatenate(out_a), np.concatenate(out_b), np.concatenate(out_d)
    if right is None:
        lo, hi = np.minimum(ia, ib), np.maximum(ia, ib)
        ia, ib = lo, hi
    order = np.lexsort((ib, ia))
    return ia[order], ib[order], d[order]


def brute_force_index_pairs(left: Points, right: Points | None = None, params=BlockingParams()):
    """Reference O(n^2) evaluation of the same predicate, no grid."""
    other = left if right is None else right
    out_a, out_b, out_d = [], [], []
    for i in range(len(left)):
        j = np.arange(i + 1, len(other)) if right is None else np.arange(len(other))
        if len(j) == 0:
            continue
        res = _keep(left, other, np.full(len(j), i), j, params)
        out_a.append(res[0]), out_b.append(res[1]), out_d.append(res[2])
    if not out_a:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(out_a), np.concatenate(out_b), np.concatenate(out_d)


def _same_agency(a, b) -> bool:
    ag_a, ag_b = getattr(a, "agency_id", ""), getattr(b, "agency_id", "")
    return bool(ag_a) and ag_a == ag_b


def candidate_pairs(records, others=None, params=BlockingParams(), brute_force=False) -> set:
    """Blocked pairs as :class:`CandidatePair` objects.

    ``records`` alone gives pairs among themselves; with ``others`` (e.g.
    housing units) only cross pairs are produced.
    """
    records = list(records)
    others = None if others is None else list(others)
    left = Points.from_records(records)
    right = None if others is None else Points.from_records(others)
    fn = brute_force_index_pairs if brute_force else candidate_index_pairs
    ia, ib, d = fn(left, right, params)
    pool = records if others is None else others
    out = set()
    for i, j, dist in zip(ia, ib, d):
        a, b = records[i], pool[j]
        p1, p2 = a.asking_price, b.asking_price
        out.add(
            CandidatePair(a.id, b.id, _same_agency(a, b), float(dist),
                          abs(p1 - p2) / min(p1, p2), abs(p1 - p2))
        )
    return out
