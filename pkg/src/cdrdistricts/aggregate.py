"""Home-district assignment, district-level aggregation, standardization.

District means are unweighted across resident users; absent indicator
values are excluded pairwise per column.  Standardized columns have mean 0
and sample variance 1 across districts.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional, Sequence

from .errors import ZeroVarianceColumn
from .geo import VoronoiPartition, point_in_district
from .model import INDICATOR_NAMES, DistrictVector, UserIndicators, ZonePolygon

log = logging.getLogger(__name__)

DEFAULT_MIN_USERS = 30


def assign_home_district(
    home_tower: str,
    partition: VoronoiPartition,
    districts: Sequence[ZonePolygon],
) -> Optional[str]:
    """District containing the home tower's site point, or None when the
    tower lies outside every district (boundary ties: smallest id)."""
    rep = partition.alias.get(home_tower)
    if rep is None:
        return None
    x, y = partition.sites[rep]
    return point_in_district(x, y, districts)


def aggregate_districts(
    assigned: Iterable[tuple[Optional[str], UserIndicators]],
    min_users: int = DEFAULT_MIN_USERS,
    min_records: int = 5,
) -> tuple[list[DistrictVector], dict[str, int]]:
    """Mean indicator vector per district over its resident users.

    Users without a district, or with fewer than ``min_records`` records,
    are skipped; districts with fewer than ``min_users`` residents are
    dropped and reported in the returned ``excluded`` map (district id ->
    resident count).
    """
    values: dict[str, dict[str, list[float]]] = {}
    counts: dict[str, int] = {}
    for district_id, ind in assigned:
        if district_id is None or ind.n_records < min_records:
            continue
        counts[district_id] = counts.get(district_id, 0) + 1
        per = values.setdefault(district_id, {name: [] for name in INDICATOR_NAMES})
        for name in INDICATOR_NAMES:
            v = ind.value(name)
            if v is not None:
                per[name].append(float(v))
    vectors: list[DistrictVector] = []
    excluded: dict[str, int] = {}
    for district_id in sorted(counts):
        n_users = counts[district_id]
        if n_users < min_users:
            excluded[district_id] = n_users
            continue
        per = values[district_id]
        means = {
            name: (math.fsum(vals) / len(vals) if vals else None)
            for name, vals in per.items()
        }
        vectors.append(
            DistrictVector(district_id=district_id, user_count=n_users, means=means)
        )
    if excluded:
        log.info(
            "dropped %d districts below min_users=%d", len(excluded), min_users
        )
    return vectors, excluded


def standardize(
    vectors: Sequence[DistrictVector], names: Sequence[str] = INDICATOR_NAMES
) -> list[str]:
    """Fill z-scored columns in place; returns names of flagged
    zero-variance columns (their z values are set to 0)."""
    flagged: list[str] = []
    for name in names:
        defined = [
            (v, float(v.means[name])) for v in vectors if v.means.get(name) is not None
        ]
        if len(defined) < 2:
            for v, _ in defined:
                v.z[name] = 0.0
            if defined:
                flagged.append(name)
            continue
        column = [x for _, x in defined]
        mean = math.fsum(column) / len(column)
        var = math.fsum((x - mean) ** 2 for x in column) / (len(column) - 1)
        if var <= 0.0:
            flagged.append(name)
            for v, _ in defined:
                v.z[name] = 0.0
            continue
        std = math.sqrt(var)
        for v, x in defined:
            v.z[name] = (x - mean) / std
    return flagged


def zscore_values(values: Sequence[float]) -> list[float]:
    """Sample-variance z-scores of a plain sequence (helper for controls)."""
    n = len(values)
    if n < 2:
        return [0.0] * n
    mean = math.fsum(values) / n
    var = math.fsum((x - mean) ** 2 for x in values) / (n - 1)
    if var <= 0.0:
        raise ZeroVarianceColumn("column has zero variance")
    std = math.sqrt(var)
    return [(x - mean) / std for x in values]
