"""Independent straightforward recomputation of the district indicator table.

This is the pipeline's cross-check: it reads the same input files but uses
plain dictionaries, simple loops, ray-casting point-in-polygon, and no
numpy/shapely/streaming machinery.  Definitions (night window, tie-breaks,
variants, thresholds) intentionally match the pipeline; the code paths do
not.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime
from zoneinfo import ZoneInfo


def _parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def _load_towers(path: str) -> dict[str, tuple[float, float]]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["tower_id"]] = (float(row["lon"]), float(row["lat"]))
    return out


def _load_district_parts(path: str) -> list[tuple[str, list]]:
    with open(path) as fh:
        doc = json.load(fh)
    out = []
    for feature in doc["features"]:
        props = feature.get("properties") or {}
        zone_id = str(props.get("zone_id", props.get("id")))
        geom = feature["geometry"]
        if geom["type"] == "Polygon":
            parts = [geom["coordinates"]]
        else:
            parts = geom["coordinates"]
        out.append((zone_id, parts))
    return sorted(out)


def _in_rings(lon: float, lat: float, rings) -> bool:
    # even-odd rule over the part's exterior plus holes
    inside = False
    for ring in rings:
        for i in range(len(ring) - 1):
            x1, y1 = ring[i][0], ring[i][1]
            x2, y2 = ring[i + 1][0], ring[i + 1][1]
            if (y1 > lat) != (y2 > lat):
                x_cross = (x2 - x1) * (lat - y1) / (y2 - y1) + x1
                if lon < x_cross:
                    inside = not inside
    return inside


def _district_of(lon: float, lat: float, districts) -> str | None:
    hits = [zid for zid, parts in districts if any(_in_rings(lon, lat, p) for p in parts)]
    return min(hits) if hits else None


def _is_night(local, start: int, end: int) -> bool:
    m = local.hour * 60 + local.minute
    if start < end:
        return start * 60 <= m < end * 60
    return m >= start * 60 or m < end * 60


def _user_values(
    rows,
    tz,
    night_start,
    night_end,
    pct_initiated_variant,
    entropy_variant,
    entropy_weights,
):
    n = len(rows)
    calls = [r for r in rows if r[1] == "call"]
    pct_night = None
    mean_dur = None
    if calls:
        night_calls = 0
        dur_total = 0.0
        for r in calls:
            if _is_night(r[0].astimezone(tz), night_start, night_end):
                night_calls += 1
            dur_total += r[3]
        pct_night = night_calls / len(calls)
        mean_dur = dur_total / len(calls)

    night_towers: dict[str, int] = {}
    for r in rows:
        if _is_night(r[0].astimezone(tz), night_start, night_end):
            night_towers[r[2]] = night_towers.get(r[2], 0) + 1
    home = None
    if night_towers:
        top = max(night_towers.values())
        home = min(t for t, c in night_towers.items() if c == top)

    visited = len({r[2] for r in rows})
    pct_home = None
    if home is not None:
        pct_home = sum(1 for r in rows if r[2] == home) / n

    w_out: dict[str, int] = {}
    w_in: dict[str, int] = {}
    for r in rows:
        if r[4] and r[5]:
            d = w_out if r[5] == "out" else w_in
            d[r[4]] = d.get(r[4], 0) + 1
    contacts = sorted(set(w_out) | set(w_in))
    k = len(contacts)

    initiated = None
    n_in = sum(1 for j in contacts if w_in.get(j, 0) >= 1)
    n_out = sum(1 for j in contacts if w_out.get(j, 0) >= 1)
    if n_in + n_out > 0:
        if pct_initiated_variant == "paper_literal":
            initiated = n_in / (n_in + n_out)
        else:
            initiated = n_out / (n_in + n_out)

    balance = None
    if k > 0:
        balance = sum(
            w_out.get(j, 0) / (w_out.get(j, 0) + w_in.get(j, 0)) for j in contacts
        ) / k

    if k <= 1:
        entropy = 0.0
    else:
        if entropy_weights == "total":
            weights = [w_out.get(j, 0) + w_in.get(j, 0) for j in contacts]
        else:
            weights = [w_out.get(j, 0) for j in contacts]
        wt = sum(weights)
        if wt == 0:
            entropy = 0.0
        elif entropy_variant == "standard_shannon":
            entropy = -sum(
                (w / wt) * math.log(w / wt) for w in weights if w > 0
            ) / math.log(k)
        else:
            entropy = -sum(math.log(w / wt) for w in weights if w > 0) / math.log(k)

    ipc = None
    if k > 0:
        ipc = sum(w_out.get(j, 0) + w_in.get(j, 0) for j in contacts) / k

    return {
        "n_records": n,
        "pct_night_calls": pct_night,
        "mean_call_duration": mean_dur,
        "pct_initiated": initiated,
        "balance_of_contacts": balance,
        "social_entropy": entropy,
        "interactions_per_contact": ipc,
        "visited_locations": visited,
        "pct_at_home": pct_home,
    }, home


INDICATORS = (
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


def recompute_indicator_oracle(
    cdr_path: str,
    towers_path: str,
    districts_path: str,
    timezone: str = "Asia/Riyadh",
    night_start: int = 19,
    night_end: int = 7,
    pct_initiated_variant: str = "paper_literal",
    entropy_variant: str = "standard_shannon",
    entropy_weights: str = "total",
    min_records: int = 5,
    min_users: int = 30,
) -> dict:
    """District indicator table recomputed the simple way.

    Returns ``{district_id: {"user_count", "means", "z"}}`` with the same
    column conventions as the pipeline's district table.
    """
    tz = ZoneInfo(timezone)
    towers = _load_towers(towers_path)
    districts = _load_district_parts(districts_path)

    groups: dict[str, list] = {}
    with open(cdr_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        idx = {name: i for i, name in enumerate(header)}
        has_dir = "counterpart_id" in idx and "direction" in idx
        for row in reader:
            rec = (
                _parse_ts(row[idx["timestamp"]]),
                row[idx["activity_type"]],
                row[idx["tower_id"]],
                int(row[idx["duration_s"]]),
                row[idx["counterpart_id"]] if has_dir else "",
                row[idx["direction"]] if has_dir else "",
            )
            groups.setdefault(row[idx["user_id"]], []).append(rec)

    per_district: dict[str, dict[str, list[float]]] = {}
    counts: dict[str, int] = {}
    tower_district_cache: dict[str, str | None] = {}
    for user_id in sorted(groups):
        rows = groups[user_id]
        if len(rows) < min_records:
            continue
        values, home = _user_values(
            rows,
            tz,
            night_start,
            night_end,
            pct_initiated_variant,
            entropy_variant,
            entropy_weights,
        )
        if home is None or home not in towers:
            continue
        if home not in tower_district_cache:
            lon, lat = towers[home]
            tower_district_cache[home] = _district_of(lon, lat, districts)
        district = tower_district_cache[home]
        if district is None:
            continue
        counts[district] = counts.get(district, 0) + 1
        bucket = per_district.setdefault(district, {name: [] for name in INDICATORS})
        for name in INDICATORS:
            if values[name] is not None:
                bucket[name].append(float(values[name]))

    table: dict[str, dict] = {}
    for district in sorted(counts):
        if counts[district] < min_users:
            continue
        means = {}
        for name in INDICATORS:
            vals = per_district[district][name]
            means[name] = sum(vals) / len(vals) if vals else None
        table[district] = {"user_count": counts[district], "means": means, "z": {}}

    for name in INDICATORS:
        col = [
            (district, row["means"][name])
            for district, row in table.items()
            if row["means"][name] is not None
        ]
        if len(col) < 2:
            for district, _ in col:
                table[district]["z"][name] = 0.0
            continue
        mean = sum(v for _, v in col) / len(col)
        var = sum((v - mean) ** 2 for _, v in col) / (len(col) - 1)
        if var <= 0:
            for district, _ in col:
                table[district]["z"][name] = 0.0
            continue
        std = math.sqrt(var)
        for district, v in col:
            table[district]["z"][name] = (v - mean) / std
    return table
