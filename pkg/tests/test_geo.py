import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashgraph.errors import ConfigError, DataError, DomainError
from crashgraph.geo import (
    EARTH_RADIUS_KM,
    CellId,
    GeoPoint,
    PlanarHexIndex,
    RES7_AREA_KM2,
    cell_area_km2,
    haversine_km,
    haversine_km_arrays,
)

lat_strategy = st.floats(min_value=-89.0, max_value=89.0, allow_nan=False)
lon_strategy = st.floats(min_value=-179.0, max_value=179.0, allow_nan=False)


class TestHaversine:
    def test_identity(self):
        p = GeoPoint(30.0, -97.0)
        assert haversine_km(p, p) == 0.0

    def test_austin_houston_against_independent_oracle(self):
        # Frozen from two independent great-circle formulas (law of cosines
        # and the atan2 form) on the same sphere radius.
        a = GeoPoint(30.2672, -97.7431)
        b = GeoPoint(29.7604, -95.3698)
        assert haversine_km(a, b) == pytest.approx(235.3524624065, abs=1e-6)

    def test_symmetry_over_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            assert haversine_km(a, b) == haversine_km(b, a)

    def test_triangle_inequality_random_triples(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            pts = [GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180)) for _ in range(3)]
            ab = haversine_km(pts[0], pts[1])
            bc = haversine_km(pts[1], pts[2])
            ac = haversine_km(pts[0], pts[2])
            assert ac <= ab + bc + 1e-9 * max(1.0, ac)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        lat1, lon1 = rng.uniform(-90, 90, 50), rng.uniform(-180, 180, 50)
        lat2, lon2 = rng.uniform(-90, 90, 50), rng.uniform(-180, 180, 50)
        vec = haversine_km_arrays(lat1, lon1, lat2, lon2)
        for i in range(50):
            scalar = haversine_km(GeoPoint(lat1[i], lon1[i]), GeoPoint(lat2[i], lon2[i]))
            assert vec[i] == pytest.approx(scalar, abs=1e-9)

    def test_antipodal_is_half_circumference(self):
        d = haversine_km(GeoPoint(0.0, 0.0), GeoPoint(0.0, 180.0))
        assert d == pytest.approx(math.pi * EARTH_RADIUS_KM, rel=1e-12)

    @given(lat_strategy, lon_strategy)
    def test_non_negative(self, lat, lon):
        assert haversine_km(GeoPoint(lat, lon), GeoPoint(0.0, 0.0)) >= 0.0

    def test_bounds_enforced(self):
        with pytest.raises(DomainError):
            GeoPoint(95.0, 0.0)
        with pytest.raises(DomainError):
            GeoPoint(0.0, 181.0)


class TestCellId:
    def test_string_form_and_parse(self):
        c = CellId(7, q=-3, r=12)
        assert str(c) == "hex7:q=-3:r=12"
        assert CellId.parse(str(c)) == c

    def test_parse_rejects_garbage(self):
        with pytest.raises(DataError):
            CellId.parse("h3:abcdef")

    def test_resolution_area_scaling(self):
        assert cell_area_km2(7) == pytest.approx(RES7_AREA_KM2)
        assert cell_area_km2(6) == pytest.approx(7 * RES7_AREA_KM2)
        with pytest.raises(ConfigError):
            cell_area_km2(16)
        with pytest.raises(ConfigError):
            cell_area_km2(-1)


class TestPlanarHexIndex:
    @pytest.fixture
    def index(self):
        return PlanarHexIndex(GeoPoint(30.5, -97.5), resolution=7)

    def test_nearby_points_share_a_cell(self, index):
        # ~10 m apart at a cell interior point
        a = GeoPoint(30.5, -97.5)
        b = GeoPoint(30.50009, -97.5)
        assert index.cell_of(a) == index.cell_of(b)

    def test_determinism(self, index):
        p = GeoPoint(30.71, -97.21)
        assert index.cell_of(p) == index.cell_of(p)

    def test_interior_cell_has_six_neighbors(self, index):
        c = index.cell_of(GeoPoint(30.6, -97.4))
        nbrs = index.neighbors(c)
        assert len(nbrs) == 6
        assert c not in nbrs

    def test_neighbor_symmetry(self, index):
        rng = np.random.default_rng(5)
        for _ in range(50):
            c = index.cell_of(GeoPoint(30.5 + rng.uniform(-1, 1), -97.5 + rng.uniform(-1, 1)))
            for nb in index.neighbors(c):
                assert c in index.neighbors(nb)

    def test_partition_step_property(self, index):
        # Any point within the cell inradius of another lands in the same
        # cell or a one-ring neighbor: the tiling has no gaps.
        rng = np.random.default_rng(0)
        inradius = index.size_km * math.sqrt(3) / 2
        for _ in range(500):
            lat = 30.5 + rng.uniform(-0.2, 0.2)
            lon = -97.5 + rng.uniform(-0.2, 0.2)
            cell = index.cell_of(GeoPoint(lat, lon))
            step = rng.uniform(0, inradius * 0.999)
            ang = rng.uniform(0, 2 * math.pi)
            lat2 = lat + step * math.sin(ang) / 110.574
            lon2 = lon + step * math.cos(ang) / (111.320 * math.cos(math.radians(lat)))
            cell2 = index.cell_of(GeoPoint(lat2, lon2))
            assert cell2 == cell or cell2 in index.neighbors(cell)

    def test_lattice_area_estimate(self, index):
        # 100 x 100 lattice spanning ~50 km; empirical interior-cell area must
        # average the resolution-7 target within +/-15%.
        span_km = 50.0
        steps = (np.arange(100) / 99 - 0.5) * span_km
        lats = 30.5 + steps / 110.574
        lons = -97.5 + steps / (111.320 * math.cos(math.radians(30.5)))
        counts: dict = {}
        for la in lats:
            for lo in lons:
                c = index.cell_of(GeoPoint(la, lo))
                counts[c] = counts.get(c, 0) + 1
        occupied = set(counts)
        interior = [c for c in occupied if all(nb in occupied for nb in index.neighbors(c))]
        assert len(interior) > 100
        point_area = (span_km / 99) ** 2
        mean_area = np.mean([counts[c] * point_area for c in interior])
        assert abs(mean_area - RES7_AREA_KM2) / RES7_AREA_KM2 < 0.15

    def test_resolution_embedded_in_id(self):
        p = GeoPoint(30.5, -97.5)
        c7 = PlanarHexIndex(GeoPoint(30.5, -97.5), 7).cell_of(p)
        c8 = PlanarHexIndex(GeoPoint(30.5, -97.5), 8).cell_of(p)
        assert c7.resolution == 7 and c8.resolution == 8
        assert str(c7).startswith("hex7:") and str(c8).startswith("hex8:")

    def test_unsupported_resolution(self):
        with pytest.raises(ConfigError):
            PlanarHexIndex(GeoPoint(0.0, 0.0), resolution=99)
