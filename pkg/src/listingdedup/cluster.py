"""Duplicate graph clustering under the internal-similarity rule, and unit aggregation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .model import CHARACTERISTICS, GeoPoint, HousingUnit

# accept a cluster when E >= NUM/DEN * N(N-1)/2
DENSITY_NUM = 5
DENSITY_DEN = 6


@dataclass
class DuplicateGraph:
    """Simple undirected graph with probabilities on the edges.

    Edges are stored once with the node pair in sorted order.
    """

    nodes: set = field(default_factory=set)
    edges: dict = field(default_factory=dict)

    def add_node(self, node) -> None:
        self.nodes.add(node)

    def add_edge(self, a, b, p: float) -> None:
        if a == b:
            raise ValueError("self-loops are not allowed")
        if not 0.5 < p <= 1.0:
            raise ValueError("edge weight must lie in (0.5, 1]")
        key = (a, b) if a < b else (b, a)
        if key in self.edges:
            raise ValueError(f"duplicate edge {key}")
        self.nodes.update(key)
        self.edges[key] = float(p)

    @classmethod
    def from_edges(cls, edges, nodes=()) -> "DuplicateGraph":
        g = cls(set(nodes))
        for a, b, p in edges:
            g.add_edge(a, b, p)
        return g


@dataclass(frozen=True)
class ClusterDecision:
    nodes: frozenset
    n_edges: int
    density: tuple = (DENSITY_NUM, DENSITY_DEN)

    @property
    def max_edges(self) -> int:
        n = len(self.nodes)
        return n * (n - 1) // 2

    @property
    def accepted(self) -> bool:
        num, den = self.density
        return len(self.nodes) == 1 or den * self.n_edges >= num * self.max_edges


@dataclass(frozen=True)
class RemovedEdge:
    a: str
    b: str
    p: float
    reason: str  # "density" or "units"


def _components(nodes, adj) -> list:
    seen, out = set(), []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        out.append(frozenset(comp))
    return out


def _weakest(comp, adj, weights):
    best = None
    for u in comp:
        for v in adj[u]:
            if u < v:
                key = (weights[(u, v)], u, v)
                if best is None or key < best:
                    best = key
    return best


def resolve_clusters(g: DuplicateGraph, units: Iterable = (), trace: Optional[list] = None,
                     density: tuple = (DENSITY_NUM, DENSITY_DEN)) -> list:
    """Split the graph into clusters that satisfy the density rule.

    A component with ``N`` nodes and ``E`` edges is accepted when
    ``6E >= 5 N(N-1)/2``; otherwise its weakest edge (lowest probability,
    ties broken by the smallest node pair) is removed and the pieces are
    examined again. Nodes listed in ``units`` are pre-existing units: a
    component holding two or more of them first loses its weakest edges
    until each piece holds at most one.

    ``density`` is the required fraction as an integer pair ``(num, den)``.
    Returns the partition as a list of frozensets sorted by smallest member.
    Removed edges are appended to ``trace`` in removal order.
    """
    units = frozenset(units)
    adj = {u: set() for u in g.nodes}
    for a, b in g.edges:
        adj[a].add(b)
        adj[b].add(a)
    weights = dict(g.edges)
    accepted = []
    pending = _components(g.nodes, adj)
    while pending:
        comp = pending.pop()
        if len(comp) == 1:
            accepted.append(comp)
            continue
        n_units = sum(1 for u in comp if u in units)
        n_edges = sum(len(adj[u]) for u in comp) // 2
        if n_units <= 1 and ClusterDecision(comp, n_edges, density).accepted:
            accepted.append(comp)
            continue
        p, a, b = _weakest(comp, adj, weights)
        adj[a].discard(b)
        adj[b].discard(a)
        del weights[(a, b)]
        if trace is not None:
            trace.append(RemovedEdge(a, b, p, "units" if n_units > 1 else "density"))
        pending.extend(_components(comp, adj))
    return sorted(accepted, key=min)


# --- aggregation ------------------------------------------------------------


def _modal(values, order):
    """Most frequent non-missing value; ties go to the earliest ad in ``order``."""
    present = [(k, v) for k, v in zip(order, values) if v is not None]
    if not present:
        return None
    counts = Counter(v for _, v in present)
    top = max(counts.values())
    for _, v in sorted(present, key=lambda kv: kv[0]):
        if counts[v] == top:
            return v
    raise AssertionError("unreachable")


def aggregate_unit(ads, unit_id: Optional[str] = None) -> HousingUnit:
    """Collapse the ads of one dwelling into a :class:`HousingUnit`.

    Characteristics take the modal value over members (earliest-created ad
    wins ties), coordinates are averaged, entry is the first creation date
    and exit the last removal date once every member has been removed. The
    asking price is the modal price among ads still listed.
    """
    ads = list(ads)
    if not ads:
        raise ValueError("cannot aggregate an empty member set")
    order = [(a.created_on, a.id) for a in ads]
    values = {name: _modal([getattr(a, name) for a in ads], order) for name in CHARACTERISTICS}
    live = [(k, a) for k, a in zip(order, ads) if a.removed_on is None]
    pool = live if live else list(zip(order, ads))
    price = _modal([a.asking_price for _, a in pool], [k for k, _ in pool])
    removed = [a.removed_on for a in ads]
    exit_date = max(removed) if all(r is not None for r in removed) else None
    lat = float(np.mean([a.location.lat for a in ads]))
    lon = float(np.mean([a.location.lon for a in ads]))
    return HousingUnit(
        id=unit_id if unit_id is not None else "U-" + min(a.id for a in ads),
        member_ad_ids=frozenset(a.id for a in ads),
        location=GeoPoint(lat, lon),
        asking_price=float(price),
        entry_date=min(a.created_on for a in ads),
        exit_date=exit_date,
        zone_id=_modal([a.zone_id for a in ads], order),
        **values,
    )


def check_density(partition, g: DuplicateGraph) -> list:
    """Clusters of ``partition`` that violate the density rule on ``g`` (post-hoc audit)."""
    bad = []
    for cluster in partition:
        cl = set(cluster)
        e = sum(1 for a, b in g.edges if a in cl and b in cl)
        if not ClusterDecision(frozenset(cl), e).accepted:
            bad.append(cluster)
    return bad
