"""Seeded synthetic crash-record generator with plantable signal.

Locations mix hotspot Gaussians (several km wide, i.e. wider than one
hexagonal cell) with background uniform draws over the study box; injury
labels are sampled from location- and time-conditioned odds. Narratives come
from class-conditioned template pools that deliberately share most phrasing,
so per-record text carries only a mild signal while region-level aggregation
stays strongly informative. A signal-free configuration (equal probabilities,
unconditioned narratives) provides the null dataset for sanity tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError
from .records import CrashRecord

_EPOCH_2024 = int(datetime(2024, 1, 1, tzinfo=timezone.utc).timestamp())
_MINUTES_2024 = 366 * 24 * 60  # leap year
_KM_PER_DEG_LAT = 110.574
_KM_PER_DEG_LON_EQ = 111.320

# Shared phrasing appears in both pools; the *_ONLY pools carry the mild
# class-specific vocabulary (speed control, stationary impacts vs low-speed
# parking contact).
SHARED_TEMPLATES = (
    "unit 1 was traveling north on {street} and made contact with unit 2",
    "unit 2 was stopped at the light on {street} when unit 1 approached",
    "both vehicles were merging onto {street} near the frontage road",
    "unit 1 changed lanes on {street} and the vehicles collided",
    "unit 2 entered the intersection at {street} as unit 1 proceeded",
    "unit 1 was idled at the stop sign on {street} behind unit 2",
)
INJURY_ONLY_TEMPLATES = (
    "unit 1 failed to control speed on {street} and struck unit 2 in the rear",
    "unit 1 struck unit 2 at speed at the intersection of {street}",
    "unit 2 was stationary on {street} and was struck hard from behind",
)
NO_INJURY_ONLY_TEMPLATES = (
    "low speed contact while parking off {street}, minor scrape reported",
    "vehicles touched mirrors while merging slowly on {street}",
    "unit 1 rolled gently into unit 2 at the drive-through on {street}",
)
STREET_NAMES = (
    "ebony st",
    "nolana loop",
    "s texas blvd",
    "ranch road 12",
    "congress ave",
    "lamar blvd",
    "guadalupe st",
    "university dr",
    "old mill rd",
    "cedar park ln",
    "shady grove rd",
    "farm road 2222",
)


@dataclass
class SynthParams:
    n_records: int = 2352
    bbox: tuple[float, float, float, float] = (29.0, 33.0, -99.5, -95.5)  # lat0, lat1, lon0, lon1
    n_hotspots: int = 6
    hotspot_radius_km: float = 6.0
    hotspot_fraction: float = 0.55
    p_injury_in_hotspot: float = 0.90
    p_injury_background: float = 0.08
    rush_hours: frozenset[int] = frozenset({7, 8, 16, 17})
    rush_odds_multiplier: float = 2.0
    class_conditioned_narratives: bool = True
    injury_templates: tuple[str, ...] = SHARED_TEMPLATES + INJURY_ONLY_TEMPLATES
    no_injury_templates: tuple[str, ...] = SHARED_TEMPLATES + NO_INJURY_ONLY_TEMPLATES
    seed: int = 0

    def validate(self) -> None:
        if self.n_records <= 0:
            raise ConfigError(f"n_records must be positive, got {self.n_records}")
        lat0, lat1, lon0, lon1 = self.bbox
        if not (-90 <= lat0 < lat1 <= 90 and -180 <= lon0 < lon1 <= 180):
            raise ConfigError(f"degenerate bounding box {self.bbox}")
        for name in ("hotspot_fraction", "p_injury_in_hotspot", "p_injury_background"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.n_hotspots < 1:
            raise ConfigError("n_hotspots must be at least 1")
        if self.hotspot_radius_km <= 0:
            raise ConfigError("hotspot_radius_km must be positive")
        if self.rush_odds_multiplier <= 0:
            raise ConfigError("rush_odds_multiplier must be positive")
        if any(h not in range(24) for h in self.rush_hours):
            raise ConfigError(f"rush_hours must be hours 0..23, got {sorted(self.rush_hours)}")
        if not self.injury_templates or not self.no_injury_templates:
            raise ConfigError("template pools must be non-empty")

    @classmethod
    def signal_free(cls, n_records: int = 2352, seed: int = 0) -> "SynthParams":
        """Null configuration: equal injury odds everywhere, pooled narratives."""
        return cls(
            n_records=n_records,
            p_injury_in_hotspot=0.5,
            p_injury_background=0.5,
            rush_odds_multiplier=1.0,
            class_conditioned_narratives=False,
            seed=seed,
        )


@dataclass
class TruthRow:
    """Ground-truth sidecar entry: which component generated the record."""

    id: str
    component: str
    injury_odds: float


def _adjusted_probability(base_p: float, hour: int, params: SynthParams) -> float:
    if base_p in (0.0, 1.0):
        return base_p
    odds = base_p / (1.0 - base_p)
    if hour in params.rush_hours:
        odds *= params.rush_odds_multiplier
    return odds / (1.0 + odds)


def generate(params: SynthParams) -> tuple[list[CrashRecord], list[TruthRow]]:
    """Generate records and the ground-truth sidecar from one seeded stream."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    lat0, lat1, lon0, lon1 = params.bbox
    margin_lat = (lat1 - lat0) * 0.1
    margin_lon = (lon1 - lon0) * 0.1
    centers = np.stack(
        [
            rng.uniform(lat0 + margin_lat, lat1 - margin_lat, size=params.n_hotspots),
            rng.uniform(lon0 + margin_lon, lon1 - margin_lon, size=params.n_hotspots),
        ],
        axis=1,
    )
    combined_pool = tuple(dict.fromkeys(params.injury_templates + params.no_injury_templates))
    records: list[CrashRecord] = []
    truth: list[TruthRow] = []
    for i in range(params.n_records):
        if rng.random() < params.hotspot_fraction:
            spot = int(rng.integers(0, params.n_hotspots))
            c_lat, c_lon = centers[spot]
            dy_km, dx_km = rng.normal(0.0, params.hotspot_radius_km, size=2)
            lat = c_lat + dy_km / _KM_PER_DEG_LAT
            lon = c_lon + dx_km / (_KM_PER_DEG_LON_EQ * np.cos(np.radians(c_lat)))
            component = f"hotspot-{spot}"
            base_p = params.p_injury_in_hotspot
        else:
            lat = rng.uniform(lat0, lat1)
            lon = rng.uniform(lon0, lon1)
            component = "background"
            base_p = params.p_injury_background
        lat = float(np.clip(lat, lat0, lat1))
        lon = float(np.clip(lon, lon0, lon1))
        timestamp = _EPOCH_2024 + int(rng.integers(0, _MINUTES_2024)) * 60
        hour = datetime.fromtimestamp(timestamp, tz=timezone.utc).hour
        p = _adjusted_probability(base_p, hour, params)
        severity = int(rng.random() < p)
        sae_level = int(rng.integers(0, 6))
        if params.class_conditioned_narratives:
            pool = params.injury_templates if severity == 1 else params.no_injury_templates
        else:
            pool = combined_pool
        template = pool[int(rng.integers(0, len(pool)))]
        street = STREET_NAMES[int(rng.integers(0, len(STREET_NAMES)))]
        records.append(
            CrashRecord(
                id=f"syn-{i:06d}",
                latitude=lat,
                longitude=lon,
                timestamp=timestamp,
                sae_level=sae_level,
                severity=severity,
                narrative=template.format(street=street),
            )
        )
        odds = float("inf") if p == 1.0 else p / (1.0 - p)
        truth.append(TruthRow(id=records[-1].id, component=component, injury_odds=odds))
    return records, truth


def write_sidecar(rows: list[TruthRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "component", "injury_odds"])
        for row in rows:
            writer.writerow([row.id, row.component, f"{row.injury_odds:.17g}"])
