"""Great-circle distance and a planar hexagonal spatial index.

The index tiles a local azimuthal-equidistant projection of the study area
with flat-topped hexagons in axial coordinates. Cell area is fixed per
resolution so that resolution 7 cells average 5.16 km^2, and every cell has
exactly six one-ring neighbors. Cell ids are namespaced strings
(``hex<res>:q=<int>:r=<int>``) so that an alternative index implementation
can coexist without id collisions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DomainError

EARTH_RADIUS_KM = 6371.0088  # IUGG mean radius

# Mean cell area at resolution 7; other resolutions scale by powers of 7,
# mirroring the sevenfold refinement of hierarchical hexagonal indexes.
RES7_AREA_KM2 = 5.16129
MIN_RESOLUTION = 0
MAX_RESOLUTION = 15

_SQRT3 = math.sqrt(3.0)
_CELL_RE = re.compile(r"^hex(\d+):q=(-?\d+):r=(-?\d+)$")

# Axial offsets of the six cells sharing an edge with (q, r).
AXIAL_NEIGHBOR_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise DomainError(f"latitude {self.latitude} outside [-90, 90]")
        if not (-180.0 <= self.longitude <= 180.0):
            raise DomainError(f"longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class CellId:
    """Axial-coordinate hexagon id at a fixed resolution."""

    resolution: int
    q: int
    r: int

    def __str__(self) -> str:
        return f"hex{self.resolution}:q={self.q}:r={self.r}"

    @classmethod
    def parse(cls, text: str) -> "CellId":
        m = _CELL_RE.match(text)
        if m is None:
            raise DataError(f"unparseable cell id {text!r}")
        return cls(resolution=int(m.group(1)), q=int(m.group(2)), r=int(m.group(3)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius EARTH_RADIUS_KM."""
    lat1 = math.radians(a.latitude)
    lat2 = math.radians(b.latitude)
    dlat = lat2 - lat1
    dlon = math.radians(b.longitude) - math.radians(a.longitude)
    s = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


def haversine_km_arrays(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine over degree arrays (broadcasting allowed)."""
    lat1 = np.radians(np.asarray(lat1, dtype=np.float64))
    lat2 = np.radians(np.asarray(lat2, dtype=np.float64))
    dlat = lat2 - lat1
    dlon = np.radians(np.asarray(lon2, dtype=np.float64)) - np.radians(
        np.asarray(lon1, dtype=np.float64)
    )
    s = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(s)))


def cell_area_km2(resolution: int) -> float:
    if not isinstance(resolution, int) or not (MIN_RESOLUTION <= resolution <= MAX_RESOLUTION):
        raise ConfigError(
            f"unsupported resolution {resolution!r}; expected integer in "
            f"[{MIN_RESOLUTION}, {MAX_RESOLUTION}]"
        )
    return RES7_AREA_KM2 * 7.0 ** (7 - resolution)


class PlanarHexIndex:
    """Flat-topped hexagonal tiling of a local azimuthal-equidistant plane.

    The projection is centered on ``center`` (normally the dataset centroid);
    radial distances from the center are exact, so distortion stays negligible
    at study-area scale. Every point maps to exactly one cell, and every cell
    has six one-ring neighbors (the planar tiling has no pentagon cells).
    """

    def __init__(self, center: GeoPoint, resolution: int = 7):
        self.center = center
        self.resolution = resolution
        area = cell_area_km2(resolution)
        # Circumradius of a hexagon with the target area: A = (3*sqrt(3)/2) s^2.
        self.size_km = math.sqrt(2.0 * area / (3.0 * _SQRT3))
        self._lat0 = math.radians(center.latitude)
        self._lon0 = math.radians(center.longitude)
        self._sin_lat0 = math.sin(self._lat0)
        self._cos_lat0 = math.cos(self._lat0)

    def project_km(self, p: GeoPoint) -> tuple[float, float]:
        """Azimuthal-equidistant projection of ``p``, in km from the center."""
        lat = math.radians(p.latitude)
        dlon = math.radians(p.longitude) - self._lon0
        cos_c = self._sin_lat0 * math.sin(lat) + self._cos_lat0 * math.cos(lat) * math.cos(dlon)
        cos_c = max(-1.0, min(1.0, cos_c))
        c = math.acos(cos_c)
        k = 1.0 if c < 1e-12 else c / math.sin(c)
        x = EARTH_RADIUS_KM * k * math.cos(lat) * math.sin(dlon)
        y = EARTH_RADIUS_KM * k * (
            self._cos_lat0 * math.sin(lat) - self._sin_lat0 * math.cos(lat) * math.cos(dlon)
        )
        return x, y

    def cell_of(self, p: GeoPoint) -> CellId:
        x, y = self.project_km(p)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DataError(f"point {p} does not project onto the index plane")
        s = self.size_km
        qf = (2.0 / 3.0) * x / s
        rf = (-x / 3.0 + (_SQRT3 / 3.0) * y) / s
        q, r = _axial_round(qf, rf)
        return CellId(resolution=self.resolution, q=q, r=r)

    def neighbors(self, c: CellId) -> set[CellId]:
        """One-ring neighbor set of ``c`` (never contains ``c`` itself)."""
        return {
            CellId(c.resolution, c.q + dq, c.r + dr) for dq, dr in AXIAL_NEIGHBOR_OFFSETS
        }

    def cell_center(self, c: CellId) -> tuple[float, float]:
        """Planar center of a cell in km (used by tests and diagnostics)."""
        s = self.size_km
        x = s * 1.5 * c.q
        y = s * (_SQRT3 / 2.0 * c.q + _SQRT3 * c.r)
        return x, y


def _axial_round(qf: float, rf: float) -> tuple[int, int]:
    # Round in cube coordinates and repair the axis with the largest error.
    sf = -qf - rf
    q = round(qf)
    r = round(rf)
    s = round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)
