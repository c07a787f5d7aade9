"""Venue-to-node assignment and service availability inside a surviving GCC."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geo_io import CATEGORIES, VenueRecord, haversine_km
from .road_graph import RoadNetwork

# distances closer than this (km) count as a tie; the smaller node id wins
TIE_KM = 1e-12


@dataclass(frozen=True)
class ServiceAssignment:
    venue_id: str
    category: str
    node: int
    distance_km: float


@dataclass
class AvailabilityReport:
    per_category: dict[str, float]
    mean: float
    assigned_counts: dict[str, int]
    retained_counts: dict[str, float]
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {c: self.per_category[c] for c in CATEGORIES if c in self.per_category}
        out["mean"] = self.mean
        return out


def _unit_vectors(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    lo = np.radians(lon)
    la = np.radians(lat)
    return np.column_stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)])


def _pick(network: RoadNetwork, venue: VenueRecord, candidates) -> tuple[int, float]:
    dist = {node: haversine_km(venue.point, network.point(node)) for node in candidates}
    best_d = min(dist.values())
    best_node = min(node for node, d in dist.items() if d <= best_d + TIE_KM)
    return best_node, dist[best_node]


def assign_venues(network: RoadNetwork, venues: Sequence[VenueRecord],
                  radius_km: float = 2.0) -> list[ServiceAssignment]:
    """Bind each venue to its nearest node; drop those beyond ``radius_km``.

    A KD-tree over unit vectors proposes candidates (chord length is monotone
    in great-circle distance); the final choice is made on exact haversine
    distances, so the result equals a linear scan.
    """
    if network.n_nodes == 0:
        raise ValueError("cannot assign venues to an empty network")
    if not venues:
        return []
    tree = cKDTree(_unit_vectors(network.lon, network.lat))
    pts = _unit_vectors(np.array([v.point.lon for v in venues]),
                        np.array([v.point.lat for v in venues]))
    nearest, _ = tree.query(pts, k=1)
    out = []
    for venue, chord, xyz in zip(venues, nearest.tolist(), pts):
        pool = tree.query_ball_point(xyz, chord * (1 + 1e-6) + 1e-12)
        node, d = _pick(network, venue, pool)
        if d <= radius_km:
            out.append(ServiceAssignment(venue.venue_id, venue.category, node, d))
    return out


def assign_venues_brute(network: RoadNetwork, venues: Sequence[VenueRecord],
                        radius_km: float = 2.0) -> list[ServiceAssignment]:
    """Linear-scan reference for :func:`assign_venues`."""
    out = []
    for venue in venues:
        node, d = _pick(network, venue, range(network.n_nodes))
        if d <= radius_km:
            out.append(ServiceAssignment(venue.venue_id, venue.category, node, d))
    return out


def availability_at_threshold(assignments: Sequence[ServiceAssignment],
                              surviving_nodes: np.ndarray) -> AvailabilityReport:
    """Share of each category's assigned venues whose node survives.

    ``surviving_nodes`` is a boolean node mask. Categories without assigned
    venues are listed in ``missing`` and left out of the mean.
    """
    if not assignments:
        raise ValueError("no assigned venues")
    surviving_nodes = np.asarray(surviving_nodes, dtype=bool)
    assigned = {c: 0 for c in CATEGORIES}
    retained = {c: 0 for c in CATEGORIES}
    for a in assignments:
        assigned[a.category] += 1
        if surviving_nodes[a.node]:
            retained[a.category] += 1
    per_category = {c: retained[c] / assigned[c] for c in CATEGORIES if assigned[c]}
    return AvailabilityReport(
        per_category=per_category,
        mean=math.fsum(per_category.values()) / len(per_category),
        assigned_counts=assigned,
        retained_counts={c: float(retained[c]) for c in CATEGORIES},
        missing=[c for c in CATEGORIES if not assigned[c]],
    )


def average_reports(reports: Sequence[AvailabilityReport]) -> AvailabilityReport:
    """Average per-run reports (Error scheme); all share one assignment."""
    if not reports:
        raise ValueError("no reports to average")
    n = len(reports)
    first = reports[0]
    per_category = {c: math.fsum(r.per_category[c] for r in reports) / n
                    for c in first.per_category}
    return AvailabilityReport(
        per_category=per_category,
        mean=math.fsum(per_category.values()) / len(per_category),
        assigned_counts=dict(first.assigned_counts),
        retained_counts={c: math.fsum(r.retained_counts[c] for r in reports) / n
                         for c in CATEGORIES},
        missing=list(first.missing),
    )

