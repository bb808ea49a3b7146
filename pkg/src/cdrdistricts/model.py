"""Validated in-memory data model shared by all pipeline stages.

Timestamps are stored as UTC instants; every wall-clock rule (night window,
home detection) evaluates them in a single pipeline-wide IANA timezone.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional
from zoneinfo import ZoneInfo

from .errors import (
    CoordinateOutOfRange,
    DuplicateTowerId,
    MalformedDuration,
    MalformedTimestamp,
    NegativeDuration,
    TimestampOutOfWindow,
    UnknownActivityType,
    UnknownDirection,
)

ACTIVITY_TYPES = frozenset({"call", "data", "sms", "other"})
DIRECTIONS = frozenset({"out", "in"})

DEFAULT_TIMEZONE = "Asia/Riyadh"

#: Canonical indicator order used by every table and model in the package.
INDICATOR_NAMES = (
    "n_records",
    "pct_night_calls",
    "mean_call_duration",
    "pct_initiated",
    "balance_of_contacts",
    "social_entropy",
    "interactions_per_contact",
    "visited_locations",
    "pct_at_home",
)

INDICATOR_CATEGORIES = {
    "activity": ("n_records", "pct_night_calls", "mean_call_duration"),
    "social": (
        "pct_initiated",
        "balance_of_contacts",
        "social_entropy",
        "interactions_per_contact",
    ),
    "spatial": ("visited_locations", "pct_at_home"),
    "full": INDICATOR_NAMES,
}


@dataclass(frozen=True, slots=True)
class CdrRecord:
    """One anonymized mobile activity event.

    ``duration_s`` is meaningful only for calls; it is retained but ignored
    elsewhere.  ``counterpart_id``/``direction`` are optional: social
    indicators require them, everything else works without.
    """

    user_id: str
    activity_type: str
    tower_id: str
    duration_s: int
    timestamp: datetime  # tz-aware, UTC
    counterpart_id: Optional[str] = None
    direction: Optional[str] = None

    def local_time(self, tz: ZoneInfo) -> datetime:
        return self.timestamp.astimezone(tz)

    def sort_key(self):
        # Total order over all fields so grouping output is independent of
        # input row order.
        return (
            self.timestamp,
            self.tower_id,
            self.activity_type,
            self.duration_s,
            self.counterpart_id or "",
            self.direction or "",
        )


@dataclass(frozen=True, slots=True)
class Tower:
    tower_id: str
    lon: float
    lat: float


class TowerSet:
    """Towers keyed by id, with coordinate-range and uniqueness checks."""

    def __init__(self, towers: Iterable[Tower]):
        self._towers: dict[str, Tower] = {}
        for t in towers:
            if t.tower_id in self._towers:
                raise DuplicateTowerId(f"duplicate tower_id {t.tower_id!r}")
            if not (-180.0 <= t.lon <= 180.0) or not (-90.0 <= t.lat <= 90.0):
                raise CoordinateOutOfRange(
                    f"tower {t.tower_id!r} at lon={t.lon}, lat={t.lat}"
                )
            self._towers[t.tower_id] = t

    def __len__(self) -> int:
        return len(self._towers)

    def __iter__(self):
        return iter(self._towers.values())

    def __contains__(self, tower_id: str) -> bool:
        return tower_id in self._towers

    def __getitem__(self, tower_id: str) -> Tower:
        return self._towers[tower_id]

    def ids(self) -> list[str]:
        return sorted(self._towers)


@dataclass(frozen=True)
class ZonePolygon:
    """A census zone (TAZ) or district polygon in projected planar meters.

    ``polygon`` is a shapely (Multi)Polygon; ``attributes`` maps names such
    as ``population`` or ``unemployment_rate`` to numbers.
    """

    zone_id: str
    kind: str  # "taz" | "district" | "bound"
    polygon: object
    attributes: Mapping[str, float] = field(default_factory=dict)

    @property
    def area(self) -> float:
        return self.polygon.area


@dataclass(frozen=True)
class EgoNetwork:
    """Directed star graph around one user.

    ``w_out[j]`` counts ego->j interactions, ``w_in[j]`` counts j->ego.
    Every contact satisfies ``w_out + w_in >= 1``; zero-total contacts are
    not admitted.
    """

    ego: str
    w_out: Mapping[str, int]
    w_in: Mapping[str, int]

    def __post_init__(self):
        for j in set(self.w_out) | set(self.w_in):
            if self.w_out.get(j, 0) + self.w_in.get(j, 0) < 1:
                raise ValueError(f"contact {j!r} has zero total interactions")

    @property
    def contacts(self) -> frozenset:
        return frozenset(set(self.w_out) | set(self.w_in))

    @property
    def k(self) -> int:
        return len(self.contacts)

    def volume(self, j: str) -> int:
        return self.w_out.get(j, 0) + self.w_in.get(j, 0)


@dataclass(frozen=True, slots=True)
class UserIndicators:
    """Per-user indicator vector; ``None`` marks an undefined value."""

    user_id: str
    n_records: int
    pct_night_calls: Optional[float]
    mean_call_duration: Optional[float]
    pct_initiated: Optional[float]
    balance_of_contacts: Optional[float]
    social_entropy: Optional[float]
    interactions_per_contact: Optional[float]
    visited_locations: int
    pct_at_home: Optional[float]
    home_tower: Optional[str]

    def value(self, name: str):
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in INDICATOR_NAMES}


@dataclass
class DistrictVector:
    """District-level aggregate: raw indicator means plus z-scored copy."""

    district_id: str
    user_count: int
    means: dict[str, Optional[float]]
    z: dict[str, Optional[float]] = field(default_factory=dict)
    population: Optional[float] = None
    area_m2: Optional[float] = None
    penetration: Optional[float] = None
    unemployment_rate: Optional[float] = None


def parse_timestamp(value: str, tz: ZoneInfo, row: Optional[int] = None) -> datetime:
    """Parse an ISO-8601 or epoch-seconds timestamp into a UTC instant.

    Naive ISO timestamps are interpreted in ``tz``.
    """
    text = value.strip()
    if not text:
        raise MalformedTimestamp("empty timestamp", row=row)
    head = text[1:] if text[0] in "+-" else text
    if head and head.replace(".", "", 1).isdigit():
        try:
            epoch = float(text)
        except ValueError:
            raise MalformedTimestamp(f"bad epoch timestamp {value!r}", row=row) from None
        return datetime.fromtimestamp(epoch, tz=timezone.utc)
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise MalformedTimestamp(f"bad ISO timestamp {value!r}", row=row) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    return dt.astimezone(timezone.utc)


def validate_record(
    raw: tuple,
    tz: ZoneInfo,
    row: Optional[int] = None,
    window: Optional[tuple[datetime, datetime]] = None,
) -> CdrRecord:
    """Validate one parsed CDR field tuple into a typed record.

    ``raw`` is ``(user_id, activity_type, tower_id, duration, timestamp)``
    optionally followed by ``(counterpart_id, direction)``.  Raises a
    categorized :class:`ValidationError` carrying the row number.
    """
    user_id, activity_type, tower_id, duration, ts = raw[:5]
    activity_type = str(activity_type).strip().lower()
    if activity_type not in ACTIVITY_TYPES:
        raise UnknownActivityType(f"unknown activity type {activity_type!r}", row=row)
    try:
        duration_s = int(duration)
    except (TypeError, ValueError):
        try:
            as_float = float(duration)
        except (TypeError, ValueError):
            raise MalformedDuration(f"bad duration {duration!r}", row=row) from None
        if not as_float.is_integer():
            raise MalformedDuration(f"non-integer duration {duration!r}", row=row)
        duration_s = int(as_float)
    if duration_s < 0:
        raise NegativeDuration(f"negative duration {duration_s}", row=row)
    timestamp = (
        ts if isinstance(ts, datetime) else parse_timestamp(str(ts), tz, row=row)
    )
    if timestamp.tzinfo is None:
        timestamp = timestamp.replace(tzinfo=tz).astimezone(timezone.utc)
    if window is not None and not (window[0] <= timestamp <= window[1]):
        raise TimestampOutOfWindow(
            f"timestamp {timestamp.isoformat()} outside observation window", row=row
        )
    counterpart_id = None
    direction = None
    if len(raw) >= 7:
        counterpart_id = str(raw[5]).strip() or None
        direction = str(raw[6]).strip().lower() or None
        if direction is not None and direction not in DIRECTIONS:
            raise UnknownDirection(f"unknown direction {raw[6]!r}", row=row)
        if counterpart_id is None:
            direction = None
    return CdrRecord(
        user_id=str(user_id),
        activity_type=activity_type,
        tower_id=str(tower_id),
        duration_s=duration_s,
        timestamp=timestamp,
        counterpart_id=counterpart_id,
        direction=direction,
    )


def record_to_row(record: CdrRecord) -> list[str]:
    """Serialize a record to CSV fields; reparsing yields an equal record."""
    return [
        record.user_id,
        record.activity_type,
        record.tower_id,
        str(record.duration_s),
        record.timestamp.isoformat(),
        record.counterpart_id or "",
        record.direction or "",
    ]
