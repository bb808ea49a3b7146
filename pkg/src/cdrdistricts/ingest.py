"""Readers streaming CDR, tower, zone, and label files into the validated
model with bounded memory.

The CDR reader is a single pass over a headered CSV: valid rows are yielded
in file order, invalid rows are counted per error category (quarantined) or,
under ``strict``, promoted to fatal.  Zones and towers are small and fully
resident.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator, Optional, Sequence
from zoneinfo import ZoneInfo

from shapely.geometry import MultiPolygon

from .errors import (
    CoordinateOutOfRange,
    FatalSchemaError,
    InvalidGeometry,
    MissingAttribute,
    ValidationError,
)
from .geo import LocalProjection, polygon_from_rings
from .model import (
    DEFAULT_TIMEZONE,
    CdrRecord,
    Tower,
    TowerSet,
    ZonePolygon,
    validate_record,
)

CDR_COLUMNS = ("user_id", "activity_type", "tower_id", "duration_s", "timestamp")
CDR_OPTIONAL_COLUMNS = ("counterpart_id", "direction")


@dataclass
class CdrSchema:
    """Column-name configuration for CDR files."""

    user_id: str = "user_id"
    activity_type: str = "activity_type"
    tower_id: str = "tower_id"
    duration_s: str = "duration_s"
    timestamp: str = "timestamp"
    counterpart_id: str = "counterpart_id"
    direction: str = "direction"

    def required(self) -> tuple[str, ...]:
        return (
            self.user_id,
            self.activity_type,
            self.tower_id,
            self.duration_s,
            self.timestamp,
        )


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_ok: int = 0
    quarantined: dict[str, int] = field(default_factory=dict)
    distinct_users: int = 0
    distinct_towers: int = 0
    first_timestamp: Optional[str] = None
    last_timestamp: Optional[str] = None

    def quarantine(self, category: str):
        self.quarantined[category] = self.quarantined.get(category, 0) + 1

    @property
    def rows_quarantined(self) -> int:
        return sum(self.quarantined.values())

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_ok": self.rows_ok,
            "rows_quarantined": self.rows_quarantined,
            "quarantined": dict(sorted(self.quarantined.items())),
            "distinct_users": self.distinct_users,
            "distinct_towers": self.distinct_towers,
            "first_timestamp": self.first_timestamp,
            "last_timestamp": self.last_timestamp,
        }


class CdrStream:
    """Iterable over validated CDR records from one CSV file.

    ``report`` is complete once iteration is exhausted.  With ``strict``
    any quarantinable row raises instead of being skipped.
    """

    def __init__(
        self,
        path,
        schema: Optional[CdrSchema] = None,
        tz: str | ZoneInfo = DEFAULT_TIMEZONE,
        window: Optional[tuple[datetime, datetime]] = None,
        strict: bool = False,
    ):
        self.path = path
        self.schema = schema or CdrSchema()
        self.tz = tz if isinstance(tz, ZoneInfo) else ZoneInfo(tz)
        self.window = window
        self.strict = strict
        self.report = IngestReport()

    def __iter__(self) -> Iterator[CdrRecord]:
        users: set[str] = set()
        towers: set[str] = set()
        report = self.report
        with open(self.path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FatalSchemaError(f"{self.path}: empty file, header expected")
            index = {name.strip(): i for i, name in enumerate(header)}
            missing = [c for c in self.schema.required() if c not in index]
            if missing:
                raise FatalSchemaError(
                    f"{self.path}: header lacks required columns {missing}"
                )
            cols = [index[c] for c in self.schema.required()]
            opt = [
                index.get(self.schema.counterpart_id),
                index.get(self.schema.direction),
            ]
            has_opt = all(i is not None for i in opt)
            for row_no, row in enumerate(reader, start=1):
                if not row:
                    continue
                report.rows_read += 1
                raw = tuple(row[i] for i in cols)
                if has_opt:
                    raw = raw + (row[opt[0]], row[opt[1]])
                try:
                    record = validate_record(
                        raw, tz=self.tz, row=row_no, window=self.window
                    )
                except ValidationError as err:
                    if self.strict:
                        raise
                    report.quarantine(err.category)
                    continue
                report.rows_ok += 1
                users.add(record.user_id)
                towers.add(record.tower_id)
                ts = record.timestamp.isoformat()
                if report.first_timestamp is None or ts < report.first_timestamp:
                    report.first_timestamp = ts
                if report.last_timestamp is None or ts > report.last_timestamp:
                    report.last_timestamp = ts
                report.distinct_users = len(users)
                report.distinct_towers = len(towers)
                yield record


def read_cdr_stream(path, **kwargs) -> CdrStream:
    """Convenience constructor mirroring the other readers."""
    return CdrStream(path, **kwargs)


def read_towers(path) -> TowerSet:
    """Read ``tower_id,lon,lat`` CSV into a :class:`TowerSet`."""
    towers = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"tower_id", "lon", "lat"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FatalSchemaError(f"{path}: header must contain {sorted(required)}")
        for row in reader:
            try:
                lon = float(row["lon"])
                lat = float(row["lat"])
            except ValueError:
                raise CoordinateOutOfRange(
                    f"{path}: non-numeric coordinates for tower {row['tower_id']!r}"
                ) from None
            towers.append(Tower(tower_id=row["tower_id"], lon=lon, lat=lat))
    return TowerSet(towers)  # raises DuplicateTowerId / CoordinateOutOfRange


def read_zones(
    path,
    kind: str,
    projection: LocalProjection,
    zone_id_key: str = "zone_id",
) -> list[ZonePolygon]:
    """Read an RFC 7946 GeoJSON FeatureCollection into projected zones.

    TAZ features must carry a ``population`` attribute.  Numeric properties
    are kept as attributes; geometry is reprojected to planar meters and
    validated.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise InvalidGeometry(f"{path}: expected a FeatureCollection")
    zones: list[ZonePolygon] = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        zone_id = props.get(zone_id_key, props.get("id"))
        if zone_id is None:
            raise MissingAttribute(f"{path}: feature {i} lacks {zone_id_key!r}")
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            parts = [coords]
        elif gtype == "MultiPolygon":
            parts = coords
        else:
            raise InvalidGeometry(
                f"{path}: feature {zone_id!r} has unsupported geometry {gtype!r}"
            )
        polys = []
        for rings in parts:
            projected = [
                [projection.forward(lon, lat) for lon, lat in ring] for ring in rings
            ]
            polys.append(polygon_from_rings(projected))
        polygon = polys[0] if len(polys) == 1 else MultiPolygon(polys)
        if not polygon.is_valid or polygon.area <= 0.0:
            raise InvalidGeometry(f"{path}: feature {zone_id!r} invalid after projection")
        attributes = {
            k: float(v) for k, v in props.items() if isinstance(v, (int, float))
        }
        if kind == "taz" and "population" not in attributes:
            raise MissingAttribute(
                f"{path}: TAZ feature {zone_id!r} lacks 'population'"
            )
        zones.append(
            ZonePolygon(
                zone_id=str(zone_id), kind=kind, polygon=polygon, attributes=attributes
            )
        )
    return zones


def read_labels(path) -> dict[str, float]:
    """Read ``district_id,unemployment_rate`` CSV; rates must lie in [0, 1]."""
    labels: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"district_id", "unemployment_rate"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FatalSchemaError(f"{path}: header must contain {sorted(required)}")
        for row in reader:
            rate = float(row["unemployment_rate"])
            if not (0.0 <= rate <= 1.0):
                raise ValueError(
                    f"{path}: unemployment_rate {rate} for district "
                    f"{row['district_id']!r} outside [0, 1]"
                )
            labels[row["district_id"]] = rate
    return labels


def geojson_bounds(path) -> tuple[float, float, float, float]:
    """Lon/lat bounding box of all coordinates in a GeoJSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    lons: list[float] = []
    lats: list[float] = []

    def walk(coords):
        if isinstance(coords[0], (int, float)):
            lons.append(coords[0])
            lats.append(coords[1])
        else:
            for c in coords:
                walk(c)

    for feature in doc.get("features", []):
        geom = feature.get("geometry") or {}
        if "coordinates" in geom:
            walk(geom["coordinates"])
    if not lons:
        raise InvalidGeometry(f"{path}: no coordinates found")
    return min(lons), min(lats), max(lons), max(lats)
