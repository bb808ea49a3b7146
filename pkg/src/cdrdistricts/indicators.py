"""Per-user activity, social, and spatial indicators.

Records are grouped per user with an external merge sort so memory stays
bounded in the number of rows; each user's indicators are then computed
from the chronologically sorted group.  All functions are pure and
deterministic under record reordering.
"""

from __future__ import annotations

import csv
import heapq
import math
import os
import tempfile
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence
from zoneinfo import ZoneInfo

from .errors import SpillError
from .model import (
    DEFAULT_TIMEZONE,
    CdrRecord,
    EgoNetwork,
    UserIndicators,
    record_to_row,
    validate_record,
)

DEFAULT_CHUNK_SIZE = 500_000


@dataclass(frozen=True)
class NightWindow:
    """Wall-clock night window, default 7pm-7am, half-open at the end.

    Minute 19:00 counts as night, minute 07:00 already as day.  When
    ``start_hour > end_hour`` the window wraps past midnight.
    """

    start_hour: int = 19
    end_hour: int = 7

    def __post_init__(self):
        if self.start_hour == self.end_hour:
            raise ValueError("night window must not be empty or a full day")

    def contains(self, local_dt) -> bool:
        m = local_dt.hour * 60 + local_dt.minute
        start = self.start_hour * 60
        end = self.end_hour * 60
        if start < end:
            return start <= m < end
        return m >= start or m < end


@dataclass(frozen=True)
class IndicatorConfig:
    """Knobs for indicator computation; defaults follow the pipeline-wide
    conventions (Riyadh wall clock, 7pm-7am nights)."""

    timezone: str = DEFAULT_TIMEZONE
    night: NightWindow = field(default_factory=NightWindow)
    pct_initiated_variant: str = "paper_literal"  # or "name_consistent"
    entropy_variant: str = "standard_shannon"  # or "paper_literal"
    entropy_weights: str = "total"  # or "out"
    min_records: int = 5

    @property
    def tz(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)


# --- grouping ----------------------------------------------------------------

def _record_key(record: CdrRecord):
    return (record.user_id,) + record.sort_key()


def _spill_chunk(chunk: list[CdrRecord], tmpdir: str, n: int) -> str:
    path = os.path.join(tmpdir, f"run-{n:05d}.csv")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for record in chunk:
                writer.writerow(record_to_row(record))
    except OSError as err:
        raise SpillError(f"failed to write sort spill {path}: {err}") from err
    return path


def _read_run(path: str, tz: ZoneInfo) -> Iterator[CdrRecord]:
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            yield validate_record(tuple(row), tz=tz)


def group_by_user(
    records: Iterable[CdrRecord],
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    tz: ZoneInfo | None = None,
) -> Iterator[tuple[str, list[CdrRecord]]]:
    """Yield ``(user_id, chronologically sorted records)`` per user.

    Users appear in ascending id order.  Inputs larger than ``chunk_size``
    are sorted externally via spill files; the output is identical for any
    input ordering because the sort key covers every record field.
    """
    tz = tz or ZoneInfo("UTC")
    first: list[CdrRecord] = []
    it = iter(records)
    for record in it:
        first.append(record)
        if len(first) >= chunk_size:
            break
    else:
        first.sort(key=_record_key)
        yield from _group_sorted(first)
        return

    with tempfile.TemporaryDirectory(prefix="cdr-sort-") as tmpdir:
        runs = []
        first.sort(key=_record_key)
        runs.append(_spill_chunk(first, tmpdir, 0))
        del first
        chunk: list[CdrRecord] = []
        for record in it:
            chunk.append(record)
            if len(chunk) >= chunk_size:
                chunk.sort(key=_record_key)
                runs.append(_spill_chunk(chunk, tmpdir, len(runs)))
                chunk = []
        if chunk:
            chunk.sort(key=_record_key)
            runs.append(_spill_chunk(chunk, tmpdir, len(runs)))
            del chunk
        merged = heapq.merge(*(_read_run(r, tz) for r in runs), key=_record_key)
        yield from _group_sorted(merged)


def _group_sorted(records: Iterable[CdrRecord]) -> Iterator[tuple[str, list[CdrRecord]]]:
    current: Optional[str] = None
    group: list[CdrRecord] = []
    for record in records:
        if record.user_id != current:
            if group:
                yield current, group
            current = record.user_id
            group = []
        group.append(record)
    if group:
        yield current, group


# --- activity patterns -------------------------------------------------------

def activity_indicators(
    records: Sequence[CdrRecord], night: NightWindow, tz: ZoneInfo
) -> tuple[int, Optional[float], Optional[float]]:
    """Volume, timing, and duration: (n_records, pct_night_calls,
    mean_call_duration).  The call-based values are None without calls."""
    n = len(records)
    calls = [r for r in records if r.activity_type == "call"]
    if not calls:
        return n, None, None
    night_calls = sum(1 for r in calls if night.contains(r.local_time(tz)))
    mean_duration = math.fsum(r.duration_s for r in calls) / len(calls)
    return n, night_calls / len(calls), mean_duration


# --- social interactions -----------------------------------------------------

def build_ego_network(records: Sequence[CdrRecord], ego: str) -> EgoNetwork:
    """Count directed interactions per counterpart.

    Only records carrying both a counterpart and a direction contribute;
    contacts therefore always satisfy ``w_out + w_in >= 1``.
    """
    w_out: dict[str, int] = {}
    w_in: dict[str, int] = {}
    for r in records:
        if r.counterpart_id is None or r.direction is None:
            continue
        bucket = w_out if r.direction == "out" else w_in
        bucket[r.counterpart_id] = bucket.get(r.counterpart_id, 0) + 1
    return EgoNetwork(ego=ego, w_out=w_out, w_in=w_in)


def pct_initiated(net: EgoNetwork, variant: str = "paper_literal") -> Optional[float]:
    """Directionality of communication over the contact sets I and O.

    ``paper_literal`` returns |I| / (|I| + |O|); ``name_consistent``
    returns |O| / (|I| + |O|).  The two always sum to one.
    """
    incoming = {j for j, w in net.w_in.items() if w >= 1}
    outgoing = {j for j, w in net.w_out.items() if w >= 1}
    total = len(incoming) + len(outgoing)
    if total == 0:
        return None
    if variant == "paper_literal":
        return len(incoming) / total
    if variant == "name_consistent":
        return len(outgoing) / total
    raise ValueError(f"unknown pct_initiated variant {variant!r}")


def balance_of_contacts(net: EgoNetwork) -> Optional[float]:
    """Mean per-contact share of interaction volume that is outgoing."""
    k = net.k
    if k == 0:
        return None
    total = 0.0
    for j in net.contacts:
        out = net.w_out.get(j, 0)
        total += out / (out + net.w_in.get(j, 0))
    return total / k


def social_entropy(
    net: EgoNetwork,
    variant: str = "standard_shannon",
    weights: str = "total",
) -> float:
    """Diversity of attention across contacts, normalized to [0, 1].

    Per-contact weight is total volume (out+in) by default, or outgoing
    only with ``weights="out"``.  ``standard_shannon`` is the normalized
    Shannon entropy -sum(p log p)/log k; ``paper_literal`` evaluates
    -sum(log p)/log k verbatim (zero-weight contacts are skipped, and the
    value may exceed 1).  Defined as 0 for k <= 1.
    """
    k = net.k
    if k <= 1:
        return 0.0
    if weights == "total":
        w = [net.volume(j) for j in net.contacts]
    elif weights == "out":
        w = [net.w_out.get(j, 0) for j in net.contacts]
    else:
        raise ValueError(f"unknown entropy weights {weights!r}")
    total = sum(w)
    if total == 0:
        return 0.0
    log_k = math.log(k)
    if variant == "standard_shannon":
        return -math.fsum(
            (wj / total) * math.log(wj / total) for wj in w if wj > 0
        ) / log_k
    if variant == "paper_literal":
        return -math.fsum(math.log(wj / total) for wj in w if wj > 0) / log_k
    raise ValueError(f"unknown entropy variant {variant!r}")


def interactions_per_contact(net: EgoNetwork) -> Optional[float]:
    """Mean total interaction volume per contact."""
    k = net.k
    if k == 0:
        return None
    return sum(net.volume(j) for j in net.contacts) / k


# --- spatial markers ---------------------------------------------------------

def home_tower(
    records: Sequence[CdrRecord], night: NightWindow, tz: ZoneInfo
) -> Optional[str]:
    """Tower with the most night-time records; ties break to the smallest
    tower_id; None when the user has no night records."""
    counts: dict[str, int] = {}
    for r in records:
        if night.contains(r.local_time(tz)):
            counts[r.tower_id] = counts.get(r.tower_id, 0) + 1
    if not counts:
        return None
    best = max(counts.values())
    return min(t for t, c in counts.items() if c == best)


def spatial_markers(
    records: Sequence[CdrRecord], home: Optional[str]
) -> tuple[int, Optional[float]]:
    """(visited_locations, pct_at_home); the latter is None without a home."""
    visited = len({r.tower_id for r in records})
    if home is None:
        return visited, None
    at_home = sum(1 for r in records if r.tower_id == home)
    return visited, at_home / len(records)


# --- assembly ----------------------------------------------------------------

def user_indicators(
    user_id: str, records: Sequence[CdrRecord], config: IndicatorConfig
) -> UserIndicators:
    """Compute the full indicator vector for one user's records."""
    tz = config.tz
    n, pct_night, mean_duration = activity_indicators(records, config.night, tz)
    net = build_ego_network(records, ego=user_id)
    home = home_tower(records, config.night, tz)
    visited, pct_home = spatial_markers(records, home)
    return UserIndicators(
        user_id=user_id,
        n_records=n,
        pct_night_calls=pct_night,
        mean_call_duration=mean_duration,
        pct_initiated=pct_initiated(net, config.pct_initiated_variant),
        balance_of_contacts=balance_of_contacts(net),
        social_entropy=social_entropy(
            net, config.entropy_variant, config.entropy_weights
        ),
        interactions_per_contact=interactions_per_contact(net),
        visited_locations=visited,
        pct_at_home=pct_home,
        home_tower=home,
    )


def compute_user_indicators(
    records: Iterable[CdrRecord],
    config: IndicatorConfig,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Iterator[UserIndicators]:
    """Group a record stream by user and compute indicators per user.

    Results are yielded in ascending user_id order; the output is
    byte-identical for any ``threads`` value because groups are mapped in
    order and reduced in order.
    """
    groups = group_by_user(records, chunk_size=chunk_size, tz=config.tz)
    if threads <= 1:
        for user_id, recs in groups:
            yield user_indicators(user_id, recs, config)
        return
    # Bounded in-flight window, results consumed in submission order: output
    # is identical for any thread count and memory stays bounded.
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        for user_id, recs in groups:
            pending.append(pool.submit(user_indicators, user_id, recs, config))
            if len(pending) >= threads * 8:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
