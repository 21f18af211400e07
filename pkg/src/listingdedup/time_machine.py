"""Week-by-week deduplication of a listing stream, plus the final unit filters."""

from __future__ import annotations

import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .blocking import BlockingParams, Points, candidate_index_pairs
from .cluster import DuplicateGraph, aggregate_unit, resolve_clusters
from .ingest import Snapshot, WeekDelta, diff_snapshots
from .normalize import ExternalEmbeddings, HashedEmbedding
from .pairs import RecordTable, TrainedModelPair, feature_matrix

log = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class DedupParams:
    blocking: BlockingParams = BlockingParams()
    min_duration_days: int = 14
    ratio_low: float = 0.5
    ratio_high: float = 1.5
    min_units_per_city: int = 30
    apply_filters: bool = True
    density: tuple = (5, 6)  # accepted clusters keep at least num/den of all possible edges


@dataclass(frozen=True)
class AuditEvent:
    week: dt.date
    kind: str  # create | merge | detach | delete | exit | edge_removed
    unit_id: str = ""
    ad_ids: tuple = ()
    units_in_cluster: int = 0
    detail: str = ""


class _Embedder:
    """Caches one description vector per ad id."""

    def __init__(self, provider=None):
        self.provider = HashedEmbedding() if provider is None else provider
        self.cache = {}

    def rows(self, ads) -> np.ndarray:
        out = []
        for ad in ads:
            v = self.cache.get(ad.id)
            if v is None:
                if isinstance(self.provider, ExternalEmbeddings):
                    v = self.provider.embed_id(ad.id).values
                else:
                    v = self.provider.embed(ad.description).values
                self.cache[ad.id] = v
            out.append(v)
        dim = getattr(self.provider, "dimension", 0)
        return np.vstack(out) if out else np.zeros((0, dim))

    def ad_table(self, ads) -> RecordTable:
        emb = []
        for ad in ads:
            emb.append(self.rows([ad]) if ad.description is not None else self.rows([])[:0])
        return RecordTable.build(ads, embeddings=emb)

    def member_views(self, units, ads_by_id):
        """One pseudo-ad per (unit, member): the unit's aggregated characteristics
        with that member's description and agency. Returns the table and the
        unit index of every row."""
        records, texts, agencies, emb, owner = [], [], [], [], []
        for k, u in enumerate(units):
            for m in sorted(u.member_ad_ids):
                ad = ads_by_id[m]
                records.append(u)
                owner.append(k)
                agencies.append(frozenset([ad.agency_id]))
                if ad.description is None:
                    texts.append(())
                    emb.append(self.rows([])[:0])
                else:
                    texts.append((ad.description,))
                    emb.append(self.rows([ad]))
        table = RecordTable.build(records, texts=texts, agencies=agencies, embeddings=emb)
        return table, np.array(owner, dtype=np.int64)


def _scored_edges(model, A, B, pa, pb, params):
    ia, ib, _ = candidate_index_pairs(pa, pb, params.blocking)
    if len(ia) == 0:
        return []
    F = feature_matrix(A, A if B is None else B, ia, ib)
    p = model.predict_matrix(F)
    keep = p > model.threshold
    other = A if B is None else B
    return [(A.ids[i], other.ids[j], float(q)) for i, j, q in zip(ia[keep], ib[keep], p[keep])]


def support_needed(n_members: int, density=(5, 6)) -> int:
    """Member links a new ad needs so that a complete unit of ``n_members`` ads
    plus the ad still has the required share of all possible edges."""
    n, (num, den) = n_members, density
    need = -(-(num * n * (n + 1) - den * n * (n - 1)) // (2 * den))
    return max(1, min(n, need))


def _unit_edges(model, qtab, qpts, units, ads_by_id, emb, params):
    """Edges from query ads to units.

    Blocking uses the unit's aggregated location and price. The ad is then
    scored against every member view of the unit; the edge carries the k-th
    highest view probability, with k from :func:`support_needed`, so the ad
    must read as a duplicate of enough listings of the home.
    """
    ia, ju, _ = candidate_index_pairs(qpts, Points.from_records(units), params.blocking)
    if len(ia) == 0:
        return []
    picked = np.unique(ju)
    views, owner = emb.member_views([units[j] for j in picked], ads_by_id)
    starts = np.searchsorted(owner, np.arange(len(picked)))
    sizes = np.bincount(owner, minlength=len(picked))
    slot = np.searchsorted(picked, ju)
    rep = sizes[slot]
    rows_a = np.repeat(ia, rep)
    rows_v = np.concatenate([np.arange(starts[s], starts[s] + sizes[s]) for s in slot])
    p_view = model.predict_matrix(feature_matrix(qtab, views, rows_a, rows_v))
    out, pos = [], 0
    for i, j, n in zip(ia, ju, rep):
        ranked = np.sort(p_view[pos:pos + n])[::-1]
        pos += n
        q = float(ranked[support_needed(int(n), params.density) - 1])
        if q > model.threshold:
            out.append((qtab.ids[i], units[j].id, q))
    return out


# --- batch ------------------------------------------------------------------


def batch_clusters(ads, model: TrainedModelPair, params=DedupParams(), provider=None, trace=None):
    """Partition of ad ids produced by one pass over ``ads`` (no time dimension)."""
    ads = list(ads)
    emb = provider if isinstance(provider, _Embedder) else _Embedder(provider)
    table = emb.ad_table(ads)
    edges = _scored_edges(model, table, None, Points.from_records(ads), None, params)
    g = DuplicateGraph.from_edges(edges, nodes=[a.id for a in ads])
    return resolve_clusters(g, trace=trace, density=params.density)


def batch_dedup(ads, model: TrainedModelPair, params=DedupParams(), provider=None) -> list:
    """Housing units from one batch pass; ids ``U000000...`` by smallest member."""
    ads = list(ads)
    by_id = {a.id: a for a in ads}
    parts = batch_clusters(ads, model, params, provider)
    return [aggregate_unit([by_id[i] for i in sorted(c)], f"U{k:06d}") for k, c in enumerate(parts)]


# --- incremental ------------------------------------------------------------


@dataclass
class PipelineState:
    week: Optional[dt.date]
    ads: dict = field(default_factory=dict)  # every ad seen, latest version
    units: dict = field(default_factory=dict)  # registry, exited units included
    ad_unit: dict = field(default_factory=dict)
    clicks: dict = field(default_factory=dict)  # ad id -> {week: clicks}
    prices: dict = field(default_factory=dict)  # ad id -> [(week, price)]
    audit: list = field(default_factory=list)
    next_unit: int = 0
    embedder: Optional[_Embedder] = None

    def new_unit_id(self) -> str:
        uid = f"U{self.next_unit:06d}"
        self.next_unit += 1
        return uid

    def live_ads(self) -> set:
        return {k for k, a in self.ads.items() if a.removed_on is None}

    def partition(self) -> list:
        return sorted((u.member_ad_ids for u in self.units.values()), key=min)

    def full_ads(self) -> dict:
        """Ads with their accumulated click and price histories."""
        return {
            k: replace(a, clicks_by_week=dict(self.clicks.get(k, {})), price_history=tuple(self.prices.get(k, ())))
            for k, a in self.ads.items()
        }

    def check(self) -> None:
        live = self.live_ads()
        seen = Counter(m for u in self.units.values() for m in u.member_ad_ids)
        if any(n > 1 for n in seen.values()):
            raise AssertionError("an ad belongs to more than one unit")
        if not live <= set(seen):
            raise AssertionError("a live ad has no unit")


def _record(state, ad, week):
    state.ads[ad.id] = ad
    state.clicks.setdefault(ad.id, {}).update(ad.clicks_by_week)
    hist = state.prices.setdefault(ad.id, [])
    if not hist or hist[-1][1] != ad.asking_price:
        hist.append((week, ad.asking_price))


def _reaggregate(state, uid, members, week):
    if not members:
        del state.units[uid]
        state.audit.append(AuditEvent(week, "delete", uid))
        return
    old = state.units.get(uid)
    unit = aggregate_unit([state.ads[m] for m in members], uid)
    state.units[uid] = unit
    for m in members:
        state.ad_unit[m] = uid
    if unit.exit_date is not None and (old is None or old.exit_date is None):
        state.audit.append(AuditEvent(week, "exit", uid, tuple(sorted(members))))


def initial_state(snapshot: Snapshot, model, params=DedupParams(), provider=None) -> PipelineState:
    """Batch-deduplicate the first snapshot."""
    state = PipelineState(week=snapshot.week, embedder=_Embedder(provider))
    for ad in snapshot.ads:
        _record(state, ad, snapshot.week)
    trace = []
    parts = batch_clusters(snapshot.ads, model, params, state.embedder, trace)
    for e in trace:
        state.audit.append(AuditEvent(snapshot.week, "edge_removed", "", (e.a, e.b), 0, f"{e.reason}:{e.p:.6f}"))
    for part in parts:
        uid = state.new_unit_id()
        _reaggregate(state, uid, set(part), snapshot.week)
        state.audit.append(AuditEvent(snapshot.week, "create", uid, tuple(sorted(part)), 0))
    return state


def process_week(state: PipelineState, delta: WeekDelta, model: TrainedModelPair,
                 params=DedupParams()) -> PipelineState:
    """Advance the state by one weekly delta (the state is updated in place and returned)."""
    week = delta.week
    if state.week is not None and not week > state.week:
        raise ValueError(f"delta week {week} is not after state week {state.week}")
    state.week = week
    if state.embedder is None:
        state.embedder = _Embedder()
    for ad_id, n in delta.click_updates.items():
        state.clicks.setdefault(ad_id, {})[week] = n
    touched = set()

    for ad_id in sorted(delta.removed_ad_ids):
        ad = state.ads.get(ad_id)
        if ad is None or ad.removed_on is not None:
            continue
        state.ads[ad_id] = replace(ad, removed_on=week)
        touched.add(state.ad_unit[ad_id])

    # (1) updated ads leave their units
    for ad in delta.updated_ads:
        uid = state.ad_unit.pop(ad.id, None)
        if uid is not None:
            touched.add(uid)
            state.audit.append(AuditEvent(week, "detach", uid, (ad.id,)))
        old = state.ads.get(ad.id)
        if old is not None:
            ad = replace(ad, created_on=old.created_on)
        _record(state, ad, week)
        state.embedder.cache.pop(ad.id, None)
    for ad in delta.new_ads:
        _record(state, ad, week)
    for uid in sorted(touched):
        members = {m for m in state.units[uid].member_ad_ids if state.ad_unit.get(m) == uid}
        _reaggregate(state, uid, members, week)

    query = list(delta.new_ads) + [state.ads[a.id] for a in delta.updated_ads]
    if not query:
        return state

    # (2)-(3) query ads against each other and against every registered unit
    emb = state.embedder
    qtab = emb.ad_table(query)
    qpts = Points.from_records(query)
    # unit nodes are tagged so they never collide with ad ids
    edges = [((0, a), (0, b), p) for a, b, p in _scored_edges(model, qtab, None, qpts, None, params)]
    units = [state.units[k] for k in sorted(state.units)]
    if units:
        cross = _unit_edges(model, qtab, qpts, units, state.ads, emb, params)
        edges += [((0, a), (1, b), p) for a, b, p in cross]

    # (4) cluster, at most one pre-existing unit per cluster
    g = DuplicateGraph.from_edges(edges, nodes={(0, a.id) for a in query})
    trace = []
    parts = resolve_clusters(g, units={n for n in g.nodes if n[0] == 1}, trace=trace,
                             density=params.density)
    for e in trace:
        state.audit.append(AuditEvent(week, "edge_removed", "", (e.a[1], e.b[1]), 0, f"{e.reason}:{e.p:.6f}"))

    # (5) fold accepted clusters back into the registry
    for part in parts:
        ad_ids = sorted(n[1] for n in part if n[0] == 0)
        unit_nodes = [n[1] for n in part if n[0] == 1]
        if not ad_ids:
            continue
        if unit_nodes:
            uid = unit_nodes[0]
            members = set(state.units[uid].member_ad_ids) | set(ad_ids)
            state.audit.append(AuditEvent(week, "merge", uid, tuple(ad_ids), len(unit_nodes)))
        else:
            uid = state.new_unit_id()
            members = set(ad_ids)
            state.audit.append(AuditEvent(week, "create", uid, tuple(ad_ids), 0))
        _reaggregate(state, uid, members, week)
    return state


@dataclass
class StreamResult:
    units: list  # after filters
    all_units: list
    state: PipelineState
    ads: dict

    @property
    def audit(self) -> list:
        return self.state.audit


def run_stream(snapshots, model: TrainedModelPair, params=DedupParams(), provider=None) -> StreamResult:
    """Batch the first week, then process each later week incrementally."""
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("need at least one snapshot")
    state = initial_state(snapshots[0], model, params, provider)
    for prev, nxt in zip(snapshots, snapshots[1:]):
        process_week(state, diff_snapshots(prev, nxt), model, params)
        log.info("week %s: %d units, %d ads", nxt.week, len(state.units), len(state.ads))
    units = [state.units[k] for k in sorted(state.units)]
    kept = units
    if params.apply_filters:
        kept = filter_min_duration(kept, params.min_duration_days)
        kept = filter_hedonic_ratio(kept, params.ratio_low, params.ratio_high,
                                    params.min_units_per_city, small_city="keep")
    return StreamResult(kept, units, state, state.full_ads())


def merge_violations(audit) -> list:
    """Merge events that folded two or more pre-existing units into one cluster."""
    return [e for e in audit if e.kind == "merge" and e.units_in_cluster > 1]


# --- filters ----------------------------------------------------------------


def filter_min_duration(units, min_days: int = 14) -> list:
    """Drop exited units listed for fewer than ``min_days`` days; active units stay."""
    return [u for u in units if u.exit_date is None or (u.exit_date - u.entry_date).days >= min_days]


HEDONIC_REGRESSORS = ("floor_area", "bathrooms", "maintenance", "elevator", "floor")


def _impute(col, zones):
    """Fill NaN with the zone median (zone mode for 0/1 columns), else the overall one."""
    col = col.copy()
    binary = np.all(np.isin(col[~np.isnan(col)], (0.0, 1.0)))

    def fill(values):
        v = values[~np.isnan(values)]
        if len(v) == 0:
            return np.nan
        if binary:
            return float(np.mean(v) >= 0.5)
        return float(np.median(v))

    overall = fill(col)
    for z in np.unique(zones):
        m = zones == z
        miss = m & np.isnan(col)
        if miss.any():
            f = fill(col[m])
            col[miss] = overall if np.isnan(f) else f
    col[np.isnan(col)] = 0.0 if np.isnan(overall) else overall
    return col


def hedonic_ratios(units) -> np.ndarray:
    """Asking price over the hedonic prediction for units of one city.

    log(price per m2) is regressed on log floor area, bathrooms, maintenance,
    elevator and floor plus zone intercepts.
    """
    zones = np.array([u.zone_id or "" for u in units], dtype=object)
    cols = []
    for name in HEDONIC_REGRESSORS:
        col = np.array([np.nan if getattr(u, name) is None else float(getattr(u, name)) for u in units])
        cols.append(_impute(col, zones))
    area = cols[0]
    X = np.column_stack([np.log(area)] + cols[1:])
    levels = sorted(set(zones))
    D = (zones[:, None] == np.array(levels, dtype=object)[None, :]).astype(float)
    design = np.hstack([D, X])
    y = np.log(np.array([u.asking_price for u in units]) / area)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return np.exp(y - design @ coef)


def filter_hedonic_ratio(units, low=0.5, high=1.5, min_units=30, small_city="raise") -> list:
    """Drop units priced outside ``[low, high]`` times their hedonic prediction.

    Cities with fewer than ``min_units`` units raise ``InsufficientDataError``
    unless ``small_city="keep"``, which passes them through unfiltered.
    """
    units = list(units)
    by_city = {}
    for k, u in enumerate(units):
        by_city.setdefault(u.city, []).append(k)
    keep = np.ones(len(units), dtype=bool)
    for city, idx in sorted(by_city.items()):
        if len(idx) < min_units:
            if small_city == "keep":
                continue
            raise InsufficientDataError(f"city {city!r} has {len(idx)} units, need {min_units}")
        r = hedonic_ratios([units[k] for k in idx])
        keep[idx] = (r >= low) & (r <= high)
    return [u for u, k in zip(units, keep) if k]
