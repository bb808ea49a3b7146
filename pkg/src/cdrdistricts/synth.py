"""Synthetic-city generator: towers, nested TAZ/district grids, unemployment
labels, and per-user CDR streams with planted indicator-unemployment
correlations.

The geography is a rectangular grid city with jittered cell sizes (so areas
and populations genuinely vary), TAZs nest inside districts, and every
district holds at least one tower.  User behavior comes from simple
parametric families (Poisson record counts, Bernoulli night placement,
categorical tower choice, Dirichlet contact splits, lognormal call
durations); each behavioral parameter is shifted in link space by a signed
effect times the district's standardized log unemployment, so the planted
signal is known exactly.

Generation draws from a single seeded Generator in a fixed order, so the
same config always produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import Optional

import numpy as np

from .errors import ConfigError
from .geo import LocalProjection

# Effects the generator can plant, keyed by indicator name.  Values are
# link-space shifts per unit of standardized log unemployment.
SUPPORTED_EFFECTS = (
    "n_records",
    "pct_night_calls",
    "mean_call_duration",
    "pct_initiated",
    "social_entropy",
    "interactions_per_contact",
    "pct_at_home",
)

# Signs mirror the reference narrative: more night calls and home time,
# less diverse and less initiated communication in high-unemployment areas.
DEFAULT_EFFECTS = {
    "pct_night_calls": 0.55,
    "pct_at_home": 0.45,
    "social_entropy": -0.50,
    "pct_initiated": -0.45,
}


@dataclass
class SynthConfig:
    seed: int = 0
    n_districts: int = 16
    taz_refine: int = 3
    n_towers: int = 48
    n_users: int = 2000
    days: int = 28
    base_records_per_user: float = 25.0
    base_contacts: float = 8.0
    market_share: float = 0.48
    user_noise: float = 0.12
    effects: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    district_cell_m: float = 2600.0
    origin_lon: float = 46.7
    origin_lat: float = 24.7
    unemployment_logit_mean: float = -2.2
    unemployment_logit_sd: float = 0.6
    start_date: str = "2012-03-01"

    def validate(self):
        counts = {
            "n_districts": self.n_districts,
            "taz_refine": self.taz_refine,
            "n_towers": self.n_towers,
            "n_users": self.n_users,
            "days": self.days,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.n_towers < self.n_districts:
            raise ConfigError("need at least one tower per district")
        if not (0.0 < self.market_share <= 1.0):
            raise ConfigError(f"market_share must be in (0, 1], got {self.market_share}")
        if self.base_records_per_user <= 0:
            raise ConfigError("base_records_per_user must be positive")
        for name, value in self.effects.items():
            if name not in SUPPORTED_EFFECTS:
                if value != 0.0:
                    raise ConfigError(f"effect on {name!r} is not plantable")
                continue
            if not math.isfinite(value):
                raise ConfigError(f"effect on {name!r} is not finite")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _grid_shape(n: int) -> tuple[int, int]:
    for r in range(int(math.isqrt(n)), 0, -1):
        if n % r == 0:
            return r, n // r
    return 1, n


def _fmt(x: float) -> str:
    return repr(float(x))


def _ring_lonlat(x0, y0, x1, y1, proj: LocalProjection) -> list[list[float]]:
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    return [list(proj.inverse(x, y)) for x, y in corners]


TIME_STRINGS = None


def _time_strings() -> list[str]:
    global TIME_STRINGS
    if TIME_STRINGS is None:
        TIME_STRINGS = [
            f"{s // 3600:02d}:{(s // 60) % 60:02d}:{s % 60:02d}" for s in range(86400)
        ]
    return TIME_STRINGS


def generate_city(config: SynthConfig, out_dir: str) -> dict:
    """Write the full synthetic input set and return the ground truth.

    Files: towers.csv, taz.geojson, districts.geojson, labels.csv, cdr.csv,
    ground_truth.json -- all in the formats the ingest stage expects.
    """
    config.validate()
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    proj = LocalProjection(lon0=config.origin_lon, lat0=config.origin_lat)
    effects = {name: float(config.effects.get(name, 0.0)) for name in SUPPORTED_EFFECTS}

    # --- geometry: jittered grid of districts, nested TAZ grid ---------------
    rows, cols = _grid_shape(config.n_districts)
    col_w = config.district_cell_m * rng.uniform(0.75, 1.25, cols)
    row_h = config.district_cell_m * rng.uniform(0.75, 1.25, rows)
    x_edges = np.concatenate([[0.0], np.cumsum(col_w)])
    y_edges = np.concatenate([[0.0], np.cumsum(row_h)])
    width, height = float(x_edges[-1]), float(y_edges[-1])
    nd = config.n_districts
    district_ids = [f"d{i:03d}" for i in range(nd)]
    district_cell = [(i // cols, i % cols) for i in range(nd)]
    district_area = np.array(
        [float(row_h[r] * col_w[c]) for r, c in district_cell]
    )

    # --- populations and unemployment ----------------------------------------
    total_persons = config.n_users / config.market_share
    pop_w = rng.lognormal(0.0, 0.5, nd)
    population = total_persons * pop_w / pop_w.sum()
    refine = config.taz_refine
    taz_splits = [rng.dirichlet(np.full(refine * refine, 2.0)) for _ in range(nd)]
    eta = rng.standard_normal(nd)
    u_rate = _sigmoid(config.unemployment_logit_mean + config.unemployment_logit_sd * eta)
    log_u = np.log(u_rate)
    driver = (log_u - log_u.mean()) / log_u.std(ddof=1)

    # --- towers: one jittered per district center, rest uniform --------------
    jitter = rng.uniform(-0.2, 0.2, (nd, 2))
    tower_xy = []
    for i, (r, c) in enumerate(district_cell):
        cx = (x_edges[c] + x_edges[c + 1]) / 2.0 + jitter[i, 0] * col_w[c]
        cy = (y_edges[r] + y_edges[r + 1]) / 2.0 + jitter[i, 1] * row_h[r]
        tower_xy.append((cx, cy))
    n_extra = config.n_towers - nd
    extra = rng.uniform(0.0, 1.0, (n_extra, 2)) * np.array([width, height])
    tower_xy.extend((float(x), float(y)) for x, y in extra)
    tower_xy = np.array(tower_xy)
    tower_ids = [f"t{i:04d}" for i in range(config.n_towers)]
    tower_district = np.minimum(
        np.searchsorted(y_edges, tower_xy[:, 1], side="right") - 1, rows - 1
    ) * cols + np.minimum(
        np.searchsorted(x_edges, tower_xy[:, 0], side="right") - 1, cols - 1
    )
    towers_in = [np.nonzero(tower_district == d)[0] for d in range(nd)]

    # --- users: homes and behavioral parameters ------------------------------
    nu = config.n_users
    home_district = rng.choice(nd, size=nu, p=population / population.sum())
    pick = rng.random(nu)
    home_tower = np.empty(nu, dtype=int)
    for d in range(nd):
        mask = home_district == d
        choices = towers_in[d]
        home_tower[mask] = choices[(pick[mask] * len(choices)).astype(int)]
    t_u = driver[home_district]
    noise = config.user_noise

    def shift(name: str, scale: float = 1.0):
        return effects[name] * t_u + noise * scale * rng.standard_normal(nu)

    lam = np.exp(np.log(config.base_records_per_user) + shift("n_records", 0.5))
    p_night = _sigmoid(_logit(0.30) + shift("pct_night_calls"))
    dur_mu = np.log(90.0) + shift("mean_call_duration", 0.5)
    p_out = _sigmoid(_logit(0.50) - shift("pct_initiated", 0.5))
    alpha_c = np.exp(np.log(1.2) + shift("social_entropy", 0.5))
    k_contacts = np.clip(
        np.rint(
            np.exp(np.log(config.base_contacts) + shift("interactions_per_contact", 0.3))
        ).astype(int),
        2,
        60,
    )
    p_home = _sigmoid(_logit(0.62) + shift("pct_at_home"))

    n_rec = rng.poisson(lam)
    total = int(n_rec.sum())
    user_row = np.repeat(np.arange(nu), n_rec)

    # --- per-record draws (fixed order) ---------------------------------------
    type_u = rng.random(total)
    night_flag = rng.random(total) < p_night[user_row]
    day_idx = rng.integers(0, config.days, total)
    night_off = rng.integers(0, 720, total)
    day_off = rng.integers(0, 720, total)
    sec = rng.integers(0, 60, total)
    at_home = rng.random(total) < p_home[user_row]
    other_pick = rng.integers(0, max(config.n_towers - 1, 1), total)
    dir_u = rng.random(total)
    dur_noise = rng.standard_normal(total)

    # activity type: 60% call, 20% sms, 20% data
    is_call = type_u < 0.60
    is_sms = (type_u >= 0.60) & (type_u < 0.80)
    is_interaction = is_call | is_sms

    minute = np.where(night_flag, (1140 + night_off) % 1440, 420 + day_off)
    tod_sec = minute * 60 + sec
    tower_idx = np.where(
        at_home,
        home_tower[user_row],
        np.where(
            other_pick >= home_tower[user_row], other_pick + 1, other_pick
        ),  # uniform over the other towers
    )
    duration = np.where(
        is_call,
        np.maximum(1, np.rint(np.exp(dur_mu[user_row] + 0.5 * dur_noise))).astype(int),
        0,
    )
    outgoing = dir_u < p_out[user_row]

    # --- contact structure: Dirichlet splits, multinomial volumes ------------
    k_total = int(k_contacts.sum())
    flat_alpha = np.repeat(alpha_c, k_contacts)
    gam = rng.gamma(flat_alpha, 1.0)
    offsets = np.concatenate([[0], np.cumsum(k_contacts)])
    n_int = np.bincount(user_row[is_interaction], minlength=nu)
    contact_of_record = np.zeros(total, dtype=int)  # local contact index
    volumes: list[np.ndarray] = []
    int_positions = np.nonzero(is_interaction)[0]
    int_user = user_row[int_positions]
    int_start = np.searchsorted(int_user, np.arange(nu), side="left")
    int_end = np.searchsorted(int_user, np.arange(nu), side="right")
    for u in range(nu):
        k = k_contacts[u]
        g = gam[offsets[u] : offsets[u + 1]]
        tot = g.sum()
        shares = g / tot if tot > 0 else np.full(k, 1.0 / k)
        counts = rng.multinomial(int(n_int[u]), shares)
        volumes.append(counts)
        rows_u = int_positions[int_start[u] : int_end[u]]
        contact_of_record[rows_u] = np.repeat(np.arange(k), counts)

    # --- expected district indicators (planted, noise-free) ------------------
    exp_user = _expected_user_indicators(
        lam, p_night, dur_mu, p_out, p_home, n_rec, volumes, config.n_towers
    )
    expected: dict[str, dict[str, float]] = {}
    district_users = [np.nonzero(home_district == d)[0] for d in range(nd)]
    for d in range(nd):
        idx = district_users[d]
        expected[district_ids[d]] = {
            name: (float(np.mean(vals[idx])) if len(idx) else None)
            for name, vals in exp_user.items()
        }

    # --- write files -----------------------------------------------------------
    tower_lon, tower_lat = proj.inverse(tower_xy[:, 0], tower_xy[:, 1])
    with open(os.path.join(out_dir, "towers.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tower_id", "lon", "lat"])
        for i, tid in enumerate(tower_ids):
            w.writerow([tid, _fmt(tower_lon[i]), _fmt(tower_lat[i])])

    _write_zone_geojson(
        os.path.join(out_dir, "districts.geojson"),
        [
            (
                district_ids[i],
                x_edges[c],
                y_edges[r],
                x_edges[c + 1],
                y_edges[r + 1],
                {},
            )
            for i, (r, c) in enumerate(district_cell)
        ],
        proj,
    )
    taz_features = []
    taz_no = 0
    for i, (r, c) in enumerate(district_cell):
        xs = np.linspace(x_edges[c], x_edges[c + 1], refine + 1)
        ys = np.linspace(y_edges[r], y_edges[r + 1], refine + 1)
        split = taz_splits[i]
        for sub in range(refine * refine):
            sr, sc = divmod(sub, refine)
            taz_features.append(
                (
                    f"z{taz_no:05d}",
                    xs[sc],
                    ys[sr],
                    xs[sc + 1],
                    ys[sr + 1],
                    {"population": float(population[i] * split[sub])},
                )
            )
            taz_no += 1
    _write_zone_geojson(os.path.join(out_dir, "taz.geojson"), taz_features, proj)

    with open(os.path.join(out_dir, "labels.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["district_id", "unemployment_rate"])
        for i, did in enumerate(district_ids):
            w.writerow([did, _fmt(u_rate[i])])

    _write_cdr(
        os.path.join(out_dir, "cdr.csv"),
        config,
        user_row=user_row,
        day_idx=day_idx,
        tod_sec=tod_sec,
        tower_idx=tower_idx,
        is_call=is_call,
        is_sms=is_sms,
        duration=duration,
        outgoing=outgoing,
        contact_of_record=contact_of_record,
        tower_ids=tower_ids,
    )

    ground_truth = {
        "config": asdict(config),
        "region_m": [width, height],
        "grid": [rows, cols],
        "projection_origin": [config.origin_lon, config.origin_lat],
        "districts": {
            district_ids[i]: {
                "row": district_cell[i][0],
                "col": district_cell[i][1],
                "area_m2": float(district_area[i]),
                "population": float(population[i]),
                "unemployment_rate": float(u_rate[i]),
                "driver_z": float(driver[i]),
                "n_users": int(len(district_users[i])),
                "expected_indicators": expected[district_ids[i]],
            }
            for i in range(nd)
        },
        "effects": effects,
        "n_records_total": total,
    }
    with open(os.path.join(out_dir, "ground_truth.json"), "w") as fh:
        json.dump(ground_truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ground_truth


def _expected_user_indicators(
    lam, p_night, dur_mu, p_out, p_home, n_rec, volumes, n_towers
) -> dict[str, np.ndarray]:
    """Per-user expected indicator values given the drawn parameters.

    Exact for the probability-linked indicators; the initiated share uses a
    ratio of expectations and entropy uses the realized contact volumes
    (which fully determine it).
    """
    nu = len(lam)
    exp_init = np.empty(nu)
    exp_entropy = np.empty(nu)
    exp_ipc = np.empty(nu)
    for u in range(nu):
        counts = volumes[u][volumes[u] > 0]
        k = len(counts)
        if k == 0:
            exp_init[u] = np.nan
            exp_entropy[u] = np.nan
            exp_ipc[u] = np.nan
            continue
        po = p_out[u]
        e_in = float(np.sum(1.0 - po ** counts))
        e_out = float(np.sum(1.0 - (1.0 - po) ** counts))
        exp_init[u] = e_in / (e_in + e_out) if e_in + e_out > 0 else np.nan
        if k == 1:
            exp_entropy[u] = 0.0
        else:
            p = counts / counts.sum()
            exp_entropy[u] = float(-(p * np.log(p)).sum() / np.log(k))
        exp_ipc[u] = float(counts.sum() / k)
    n = np.maximum(n_rec, 1)
    q = (1.0 - p_home) / max(n_towers - 1, 1)
    exp_visited = (1.0 - (1.0 - p_home) ** n) + (n_towers - 1) * (1.0 - (1.0 - q) ** n)
    return {
        "n_records": lam,
        "pct_night_calls": p_night,
        "mean_call_duration": np.exp(dur_mu + 0.125),
        "pct_initiated": exp_init,
        "balance_of_contacts": p_out,
        "social_entropy": exp_entropy,
        "interactions_per_contact": exp_ipc,
        "visited_locations": exp_visited,
        "pct_at_home": p_home,
    }


def _write_zone_geojson(path: str, cells, proj: LocalProjection):
    features = []
    for zone_id, x0, y0, x1, y1, attrs in cells:
        props = {"zone_id": zone_id}
        props.update(attrs)
        features.append(
            {
                "type": "Feature",
                "properties": props,
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [_ring_lonlat(x0, y0, x1, y1, proj)],
                },
            }
        )
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, sort_keys=True)
        fh.write("\n")


def _write_cdr(
    path: str,
    config: SynthConfig,
    *,
    user_row,
    day_idx,
    tod_sec,
    tower_idx,
    is_call,
    is_sms,
    duration,
    outgoing,
    contact_of_record,
    tower_ids,
):
    # Chronological within each user; users in id order.
    order = np.lexsort((tod_sec, day_idx, user_row))
    base = date.fromisoformat(config.start_date)
    date_strs = [(base + timedelta(days=int(d))).isoformat() for d in range(config.days)]
    times = _time_strings()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "user_id",
                "activity_type",
                "tower_id",
                "duration_s",
                "timestamp",
                "counterpart_id",
                "direction",
            ]
        )
        for i in order:
            u = user_row[i]
            if is_call[i]:
                atype = "call"
            elif is_sms[i]:
                atype = "sms"
            else:
                atype = "data"
            if is_call[i] or is_sms[i]:
                counterpart = f"c{u:06d}x{contact_of_record[i]:02d}"
                direction = "out" if outgoing[i] else "in"
            else:
                counterpart = ""
                direction = ""
            w.writerow(
                [
                    f"u{u:06d}",
                    atype,
                    tower_ids[tower_idx[i]],
                    int(duration[i]),
                    f"{date_strs[day_idx[i]]}T{times[tod_sec[i]]}+03:00",
                    counterpart,
                    direction,
                ]
            )
