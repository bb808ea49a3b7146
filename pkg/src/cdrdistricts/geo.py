"""Computational geometry: local projection, Voronoi coverage cells, areal
interpolation of census population, and penetration rates.

All geometry is double-precision planar (meters).  Voronoi cells are built
by successive half-plane clipping against the bisectors of the other sites,
clipped to a bounding region; O(n^2) with a distance cutoff, which is robust
and deterministic at the tower counts this pipeline sees.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from shapely.geometry import MultiPolygon, Point, Polygon
from shapely.strtree import STRtree

from .errors import (
    DuplicateTowerLocation,
    EmptyBound,
    EmptyZoneList,
    InvalidGeometry,
)
from .model import TowerSet, ZonePolygon

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection around a local origin, in meters.

    Adequate at city scale; the pipeline never needs geodesic accuracy,
    only a consistent planar CRS shared by towers and zones.
    """

    lon0: float
    lat0: float

    def forward(self, lon, lat):
        k = EARTH_RADIUS_M * math.cos(math.radians(self.lat0))
        x = np.radians(np.asarray(lon) - self.lon0) * k
        y = np.radians(np.asarray(lat) - self.lat0) * EARTH_RADIUS_M
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def inverse(self, x, y):
        k = EARTH_RADIUS_M * math.cos(math.radians(self.lat0))
        lon = np.degrees(np.asarray(x) / k) + self.lon0
        lat = np.degrees(np.asarray(y) / EARTH_RADIUS_M) + self.lat0
        if np.ndim(lon) == 0:
            return float(lon), float(lat)
        return lon, lat


def polygon_from_rings(rings: Sequence[Sequence[tuple]]) -> Polygon:
    """Build a validated polygon from an exterior ring plus optional holes."""
    if not rings:
        raise InvalidGeometry("polygon has no rings")
    poly = Polygon(rings[0], rings[1:])
    if not poly.is_valid:
        raise InvalidGeometry("self-intersecting or otherwise invalid ring")
    if poly.area <= 0.0:
        raise InvalidGeometry("polygon has zero area")
    return poly


def intersection_area(a, b) -> float:
    """Area of the intersection of two polygons (symmetric, >= 0)."""
    ga = a.polygon if isinstance(a, ZonePolygon) else a
    gb = b.polygon if isinstance(b, ZonePolygon) else b
    for g in (ga, gb):
        if not g.is_valid:
            raise InvalidGeometry("invalid polygon passed to intersection_area")
    return ga.intersection(gb).area


@dataclass
class VoronoiPartition:
    """Per-tower coverage cells clipped to a bounding region.

    Near-duplicate towers (< ``merge_tol`` apart) share one cell; ``alias``
    maps every tower id to its cell's representative id.
    """

    cells: dict[str, Polygon]
    sites: dict[str, tuple[float, float]]
    alias: dict[str, str]
    bound_area: float

    def cell_of(self, tower_id: str) -> Optional[Polygon]:
        rep = self.alias.get(tower_id)
        return None if rep is None else self.cells[rep]

    def total_cell_area(self) -> float:
        return float(sum(c.area for c in self.cells.values()))


def _halfplane(p: np.ndarray, q: np.ndarray, reach: float) -> Polygon:
    # Quadrilateral covering all points within `reach` of p that are closer
    # to p than to q (bisector edge on the far side).
    m = (p + q) / 2.0
    d = q - p
    d = d / math.hypot(d[0], d[1])
    perp = np.array([-d[1], d[0]])
    c1 = m + perp * reach
    c2 = m - perp * reach
    c3 = c2 - d * reach
    c4 = c1 - d * reach
    return Polygon([c1, c2, c3, c4])


def build_voronoi(
    towers: TowerSet | Mapping[str, tuple[float, float]],
    bound: ZonePolygon | Polygon,
    projection: Optional[LocalProjection] = None,
    merge_tol: float = 1.0,
) -> VoronoiPartition:
    """Clip one Voronoi cell per tower to the bounding region.

    ``towers`` is either a :class:`TowerSet` (requires ``projection``) or a
    mapping ``tower_id -> (x, y)`` already in planar meters.  Exact
    coordinate duplicates are an error; towers closer than ``merge_tol``
    meters are merged under the lexicographically smallest id.
    """
    bound_poly = bound.polygon if isinstance(bound, ZonePolygon) else bound
    if bound_poly.is_empty or bound_poly.area <= 0.0:
        raise EmptyBound("bounding region is empty")
    if isinstance(towers, TowerSet):
        if projection is None:
            raise ValueError("projection required to place TowerSet in the plane")
        xy = {t.tower_id: projection.forward(t.lon, t.lat) for t in towers}
    else:
        xy = {tid: (float(p[0]), float(p[1])) for tid, p in towers.items()}
    if not xy:
        raise EmptyBound("no towers supplied")

    ids = sorted(xy)
    pts = np.array([xy[i] for i in ids])

    # Union-find merge of near-duplicate sites; exact duplicates are fatal.
    parent = list(range(len(ids)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(ids)):
        d2 = np.sum((pts[i + 1 :] - pts[i]) ** 2, axis=1)
        for off in np.nonzero(d2 <= merge_tol**2)[0]:
            j = i + 1 + int(off)
            if d2[off] == 0.0:
                raise DuplicateTowerLocation(
                    f"towers {ids[i]!r} and {ids[j]!r} share exact coordinates"
                )
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    alias: dict[str, str] = {}
    groups: dict[int, list[int]] = {}
    for i in range(len(ids)):
        groups.setdefault(find(i), []).append(i)
    site_ids = []
    site_pts = []
    for root in sorted(groups):
        members = groups[root]
        rep = min(ids[i] for i in members)
        for i in members:
            alias[ids[i]] = rep
        site_ids.append(rep)
        site_pts.append(pts[members[0]])
    site_pts = np.array(site_pts)

    minx, miny, maxx, maxy = bound_poly.bounds
    diameter = math.hypot(maxx - minx, maxy - miny)
    cells: dict[str, Polygon] = {}
    for i, sid in enumerate(site_ids):
        p = site_pts[i]
        reach = 4.0 * diameter + math.hypot(
            max(abs(p[0] - minx), abs(p[0] - maxx)),
            max(abs(p[1] - miny), abs(p[1] - maxy)),
        )
        cell = bound_poly
        others = np.delete(np.arange(len(site_ids)), i)
        dists = np.hypot(*(site_pts[others] - p).T)
        for j in others[np.argsort(dists, kind="stable")]:
            if cell.is_empty:
                break
            # No farther site can cut the cell once the bisector distance
            # exceeds the cell's radius around p.
            r = _max_vertex_distance(cell, p)
            if math.hypot(*(site_pts[j] - p)) >= 2.0 * r:
                break
            cell = cell.intersection(_halfplane(p, site_pts[j], reach))
        cells[sid] = cell
    return VoronoiPartition(
        cells=cells,
        sites={sid: (float(site_pts[i][0]), float(site_pts[i][1])) for i, sid in enumerate(site_ids)},
        alias=alias,
        bound_area=bound_poly.area,
    )


def _max_vertex_distance(geom, p) -> float:
    best = 0.0
    polys = geom.geoms if isinstance(geom, MultiPolygon) else [geom]
    for poly in polys:
        if poly.is_empty:
            continue
        rings = [poly.exterior, *poly.interiors]
        for ring in rings:
            coords = np.asarray(ring.coords)
            d = np.hypot(coords[:, 0] - p[0], coords[:, 1] - p[1])
            best = max(best, float(d.max()))
    return best


def areal_weights(
    targets: Sequence[ZonePolygon], sources: Sequence[ZonePolygon]
) -> dict[tuple[str, str], float]:
    """Sparse weights W[target, source] = area(target & source) / area(source)."""
    weights: dict[tuple[str, str], float] = {}
    if not targets or not sources:
        return weights
    tree = STRtree([s.polygon for s in sources])
    for t in targets:
        for j in tree.query(t.polygon, predicate="intersects"):
            s = sources[int(j)]
            a = t.polygon.intersection(s.polygon).area
            if a > 0.0:
                weights[(t.zone_id, s.zone_id)] = a / s.polygon.area
    return weights


def interpolate_population(
    districts: Sequence[ZonePolygon],
    tazs: Sequence[ZonePolygon],
    population_key: str = "population",
) -> dict[str, float]:
    """Areal interpolation of TAZ population onto districts.

    For each district, sums ``area(d & taz) * P_taz / area(taz)`` over all
    TAZs.  Mass is conserved exactly when the districts partition the TAZ
    union; partially covered districts get the covered share only.
    """
    weights = areal_weights(districts, tazs)
    pops = {z.zone_id: float(z.attributes[population_key]) for z in tazs}
    out: dict[str, float] = {}
    for d in districts:
        total = 0.0
        covered = 0.0
        for t in tazs:
            w = weights.get((d.zone_id, t.zone_id))
            if w is not None:
                total += w * pops[t.zone_id]
                covered += w * t.polygon.area
        out[d.zone_id] = total
        frac = covered / d.polygon.area if d.polygon.area > 0 else 0.0
        if frac < 1.0 - 1e-6:
            log.warning(
                "district %s only %.1f%% covered by TAZ union", d.zone_id, 100 * frac
            )
    return out


def penetration_rate(
    districts: Sequence[ZonePolygon],
    partition: VoronoiPartition,
    homes: Mapping[str, int],
    populations: Mapping[str, float],
) -> tuple[dict[str, float], list[str]]:
    """Mobile penetration per district: detected homes over census population.

    Allocates each cell's home count to districts proportionally to the
    intersected cell area, then divides by district population.  Districts
    with non-positive population are excluded and returned separately.
    """
    # Near-duplicate towers were merged into one cell: sum their homes.
    cell_homes: dict[str, float] = {rep: 0.0 for rep in partition.cells}
    for tower_id, count in homes.items():
        rep = partition.alias.get(tower_id)
        if rep is None:
            log.warning("home tower %s not in Voronoi partition; skipped", tower_id)
            continue
        cell_homes[rep] += count

    cell_ids = sorted(partition.cells)
    geoms = [partition.cells[c] for c in cell_ids]
    tree = STRtree(geoms)
    sigma: dict[str, float] = {}
    excluded: list[str] = []
    for d in districts:
        pop = populations.get(d.zone_id)
        if pop is None or pop <= 0.0:
            excluded.append(d.zone_id)
            continue
        total = 0.0
        for j in tree.query(d.polygon, predicate="intersects"):
            cid = cell_ids[int(j)]
            cell = geoms[int(j)]
            if cell.is_empty or cell.area <= 0.0:
                continue
            a = d.polygon.intersection(cell).area
            if a > 0.0:
                total += a * cell_homes[cid] / cell.area
        sigma[d.zone_id] = total / pop
    return sigma, excluded


def avg_spatial_resolution(zones: Sequence[ZonePolygon]) -> float:
    """sqrt(total land area / number of land units), in kilometers."""
    if not zones:
        raise EmptyZoneList("no zones supplied")
    total = sum(z.polygon.area for z in zones)
    return math.sqrt(total / len(zones)) / 1000.0


def point_in_district(
    x: float, y: float, districts: Sequence[ZonePolygon]
) -> Optional[str]:
    """Id of the district containing the point; boundary ties break to the
    smallest district_id; None when outside all districts."""
    p = Point(x, y)
    hits = [d.zone_id for d in districts if d.polygon.covers(p)]
    return min(hits) if hits else None
