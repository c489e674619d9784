import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from conftest import load_fixture
from oracles import cap_cells_brute, locate_brute
from equidecomp.errors import PartitionMismatch
from equidecomp.rotations import Rotation, UnitVector
from equidecomp.sphere import (
    MeasurableSet, SyntheticSpace, cap_radius, equal_area_partition, intersect, measure,
    set_from_cap, space_from_spec, subtract, transport, union,
)


@pytest.mark.parametrize("n", [8, 100, 2000, 100_000])
def test_partition_total_and_equal_areas(n):
    P = equal_area_partition(n)
    areas = P.cell_areas()
    assert abs(areas.sum() - 1) <= 1e-9
    assert np.all(np.abs(areas - 1 / P.n_cells) <= 1e-9)
    assert abs(P.n_cells - n) <= 0.1 * n


def test_partition_rejects_tiny():
    with pytest.raises(ValueError):
        equal_area_partition(7)


def test_partition_mirror_symmetric():
    P = equal_area_partition(5000)
    assert np.array_equal(P.z_edges, -P.z_edges[::-1])
    assert np.array_equal(P.band_counts, P.band_counts[::-1])


def test_centers_distinct_and_self_locating():
    P = equal_area_partition(100_000)
    dist, _ = cKDTree(P.centers).query(P.centers, k=2)
    assert dist[:, 1].min() > 0
    assert np.array_equal(P.locate(P.centers), np.arange(P.n_cells))


def test_locate_matches_scan_oracle(rng):
    P = equal_area_partition(3000)
    pts = rng.normal(size=(5000, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    assert np.array_equal(P.locate(pts), locate_brute(pts, P.z_edges, P.band_counts))


def test_cap_extremes():
    P = equal_area_partition(1000)
    c = UnitVector(0.0, 0.0, 1.0)
    assert set_from_cap(c, math.pi, P).measure == pytest.approx(1.0, abs=1e-12)
    # the north pole is a cell center
    assert set_from_cap(c, 0.0, P).count == 1
    assert set_from_cap(UnitVector.from_array([1, 2, 3]), 0.0, P).count == 0
    with pytest.raises(ValueError):
        set_from_cap(c, 4.0, P)


def test_cap_measure_against_closed_form(rng):
    P = equal_area_partition(20_000)
    for _ in range(30):
        v = rng.normal(size=3)
        r = rng.uniform(0, math.pi)
        U = set_from_cap(UnitVector.from_array(v), r, P)
        assert np.array_equal(U.mask, cap_cells_brute(P.centers, v, r))
        assert abs(U.measure - (1 - math.cos(r)) / 2) <= 2 / math.sqrt(P.n_cells)
    assert cap_radius(0.5) == pytest.approx(math.pi / 2)


def test_transport_identity():
    P = equal_area_partition(1000)
    U = set_from_cap(UnitVector(1.0, 0.0, 0.0), 0.5, P)
    img, dist = transport(Rotation.identity(), U)
    assert img == U and dist == 0


def test_transport_never_grows(rng):
    P = equal_area_partition(5000)
    U = set_from_cap(UnitVector(0.0, 0.0, 1.0), 1.0, P)
    for _ in range(20):
        r = Rotation(tuple(rng.normal(size=4) / 2))
        img, d = transport(r, U)
        assert img.measure <= U.measure
        assert d == pytest.approx(U.measure - img.measure)


def _calibration():
    fx = load_fixture("transport_100000.json")
    P = equal_area_partition(fx["cells"])
    U = set_from_cap(UnitVector(0.0, 0.0, 1.0), cap_radius(fx["cap_measure"]), P)
    dist, rec = [], []
    for q in fx["quaternions_wxyz"]:
        r = Rotation(tuple(q))
        img, d = transport(r, U)
        back, _ = transport(r.inverse(), img)
        dist.append(d / U.measure)
        rec.append((back & U).measure / U.measure)
    return fx, np.array(dist), np.array(rec)


@pytest.fixture(scope="module")
def calibration():
    return _calibration()


def test_transport_calibration_frozen(calibration):
    fx, dist, rec = calibration
    assert dist.mean() == pytest.approx(fx["mean_distortion"], abs=1e-3)
    assert dist.max() == pytest.approx(fx["max_distortion"], abs=1e-3)
    assert rec.mean() == pytest.approx(fx["mean_recovery"], abs=1e-3)
    assert rec.min() == pytest.approx(fx["min_recovery"], abs=1e-3)


@pytest.mark.xfail(strict=True, reason="nearest-cell transport distorts a quarter cap by about 8% at 1e5 cells")
def test_transport_mean_distortion_under_two_percent(calibration):
    _, dist, _ = calibration
    assert dist.mean() < 0.02


@pytest.mark.xfail(strict=True, reason="nearest-cell round trips recover about 89% at 1e5 cells")
def test_transport_roundtrip_recovers_98_percent(calibration):
    _, _, rec = calibration
    assert rec.min() >= 0.98


@pytest.fixture
def space():
    return equal_area_partition(500)


N500 = equal_area_partition(500).n_cells
masks = st.lists(st.booleans(), min_size=N500, max_size=N500).map(np.array)


@settings(max_examples=100, deadline=None)
@given(masks, masks)
def test_set_algebra_exact(a, b):
    P = equal_area_partition(500)
    U, V = MeasurableSet(P, a), MeasurableSet(P, b)
    assert (U | V).count + (U & V).count == U.count + V.count
    assert union(U, V) == (U | V) and intersect(U, V) == (U & V)
    assert subtract(U, U).is_empty
    assert (U - V).isdisjoint(V)
    assert measure(U) == U.count * P.cell_measure


def test_empty_measure_zero(space):
    assert measure(MeasurableSet.empty(space)) == 0


def test_partition_mismatch(space):
    other = equal_area_partition(600)
    with pytest.raises(PartitionMismatch):
        MeasurableSet.full(space) | MeasurableSet.full(other)


@settings(max_examples=50, deadline=None)
@given(masks)
def test_rle_roundtrip(a):
    P = equal_area_partition(500)
    U = MeasurableSet(P, a)
    assert MeasurableSet.from_rle(P, U.to_rle()) == U
    assert MeasurableSet.from_json(U.to_json()) == U


def test_space_from_spec():
    assert space_from_spec({"scheme": "equal-area-bands", "n_cells_target": 500}) is equal_area_partition(500)
    assert space_from_spec(SyntheticSpace(10).spec).n_cells == 10
    with pytest.raises(ValueError):
        space_from_spec({"scheme": "healpix"})
