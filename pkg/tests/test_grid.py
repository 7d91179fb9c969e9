import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellplan.grid import (
    N_FEATURES,
    GridMismatchError,
    GridSpec,
    Site,
    SiteConfiguration,
    build_feature_matrix,
    build_feature_vector,
    distance_to_nearest_site,
    index_to_coords,
    point_index,
)
from cellplan.scenario import dump_scenario, generate_scenario

from conftest import uniform_scenario

G4 = GridSpec(4, 100.0)


@pytest.mark.parametrize("row,col,expected", [(0, 0, 0), (1, 2, 6), (3, 3, 15)])
def test_point_index_examples(row, col, expected):
    assert point_index(row, col, G4) == expected


@pytest.mark.parametrize("row,col,name", [(4, 0, "row"), (-1, 0, "row"), (0, 4, "col")])
def test_point_index_bounds(row, col, name):
    with pytest.raises(IndexError, match=name):
        point_index(row, col, G4)


@given(st.integers(2, 40), st.data())
def test_point_index_roundtrip(n, data):
    grid = GridSpec(n, 1.0)
    r = data.draw(st.integers(0, n - 1))
    c = data.draw(st.integers(0, n - 1))
    assert index_to_coords(point_index(r, c, grid), grid) == (r, c)


def test_gridspec_invariants():
    assert GridSpec(5, 2.0).size == 25
    with pytest.raises(ValueError):
        GridSpec(1, 1.0)
    with pytest.raises(ValueError):
        GridSpec(4, 0.0)


def test_cell_vector_matches_sites():
    cfg = SiteConfiguration(G4, [Site(3), Site(10)])
    assert cfg.cell_vector.tolist() == [0, 0, 0, 1] + [0] * 6 + [1] + [0] * 5
    with pytest.raises(ValueError, match="duplicate"):
        SiteConfiguration(G4, [Site(3), Site(3)])
    with pytest.raises(IndexError):
        SiteConfiguration(G4, [Site(16)])


def test_omni_azimuth_canonicalized():
    assert Site(0, azimuth_deg=123.0).azimuth_deg == 0.0
    assert Site(0, azimuth_deg=370.0, antenna_kind="sector").azimuth_deg == 10.0


def test_distance_examples():
    g = GridSpec(8, 100.0)
    cfg = SiteConfiguration(g, [Site(point_index(0, 0, g))])
    assert distance_to_nearest_site(0, cfg) == 0.0
    assert distance_to_nearest_site(point_index(3, 4, g), cfg) == 500.0
    g50 = GridSpec(4, 50.0)
    two = SiteConfiguration(g50, [Site(point_index(0, 0, g50)), Site(point_index(0, 2, g50))])
    assert distance_to_nearest_site(point_index(0, 1, g50), two) == 50.0


def test_distance_requires_sites():
    with pytest.raises(ValueError, match="no sites in configuration"):
        distance_to_nearest_site(0, SiteConfiguration(G4))


@settings(max_examples=60)
@given(st.lists(st.integers(0, 99), min_size=1, max_size=8, unique=True), st.lists(st.integers(0, 99), max_size=5))
def test_adding_sites_never_increases_distance(base, extra):
    g = GridSpec(10, 30.0)
    small = SiteConfiguration(g, [Site(i) for i in base])
    big = SiteConfiguration(g, [Site(i) for i in sorted(set(base) | set(extra))])
    for i in range(g.size):
        assert distance_to_nearest_site(i, big) <= distance_to_nearest_site(i, small)


def test_feature_on_omni_site_and_water():
    sc = uniform_scenario(4, clutter="water")
    cfg = SiteConfiguration(sc.grid, [Site(5)])
    f = build_feature_vector(5, cfg, sc)
    assert f[0] == 0.0
    assert f[10] == 1.0
    assert f[1] == pytest.approx(math.log10(10.0))  # floor at cell_size / 10
    assert f[3:7].tolist() == [0, 0, 0, 1]


def test_feature_grid_mismatch():
    sc = uniform_scenario(4)
    cfg = SiteConfiguration(GridSpec(5, 100.0), [Site(0)])
    with pytest.raises(GridMismatchError):
        build_feature_vector(0, cfg, sc)


def _parse_dump(text):
    lines = text.splitlines()
    norm = {}
    for line in lines[4:8]:
        _, name, lo, hi = line.split()
        norm[name] = (float(lo), float(hi))
    records = {}
    for line in lines[9:]:
        i, e, c, p = line.split(",")
        records[int(i)] = (float(e), c, float(p))
    return norm, records


def test_feature_vector_hand_computed():
    """Point 10 of a seeded 8x8 scenario, every field recomputed from the text dump."""
    g = GridSpec(8, 100.0)
    sc = generate_scenario(42, g)
    sector = Site(point_index(4, 4, g), eirp_dbm=46.0, frequency_mhz=2600.0, azimuth_deg=300.0,
                  antenna_kind="sector")
    omni = Site(point_index(7, 0, g), eirp_dbm=40.0, frequency_mhz=800.0)
    cfg = SiteConfiguration(g, [omni, sector])
    norm, records = _parse_dump(dump_scenario(sc))

    # point 10 = (1, 2); sector at (4, 4) is sqrt(9 + 4) cells away, omni at (7, 0) sqrt(36 + 4)
    d = math.sqrt(13) * 100.0
    bearing = math.atan2(2 - 4, -(1 - 4))  # clockwise from north
    align = math.cos(bearing - math.radians(300.0))
    elev, clutter, pop = records[10]
    lo, hi = norm["pop_density"]
    expected = [
        d,
        math.log10(d),
        elev,
        *[1.0 if clutter == c else 0.0 for c in ("urban", "suburban", "rural", "water")],
        (pop - lo) / (hi - lo),
        (2600.0 - 700.0) / (3500.0 - 700.0),
        (46.0 - 30.0) / (60.0 - 30.0),
        align,
    ]
    got = build_feature_vector(10, cfg, sc)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(0, 63), min_size=1, max_size=6, unique=True))
def test_feature_invariants(seed, idx):
    sc = generate_scenario(seed, GridSpec(8, 50.0))
    rng = np.random.default_rng(seed)
    sites = [Site(i, azimuth_deg=float(rng.uniform(0, 360)), antenna_kind=rng.choice(["omni", "sector"]))
             for i in idx]
    X = build_feature_matrix(SiteConfiguration(sc.grid, sites), sc)
    assert X.shape == (64, N_FEATURES)
    assert np.all(X[:, 3:7].sum(axis=1) == 1)
    assert set(np.unique(X[:, 3:7])) <= {0.0, 1.0}
    assert np.all((X[:, 10] >= -1) & (X[:, 10] <= 1))
