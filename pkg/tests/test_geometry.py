import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambit_cylinder.geometry import (
    TWO_PI,
    AngularSet,
    CylinderPatch,
    CylinderPoint,
    angular_distance,
    circle_param,
    delivery_angle,
    normalize_angle,
    riemannian_area,
)

angles = st.floats(-50.0, 50.0, allow_nan=False)


@pytest.mark.parametrize("theta,xy", [(0.0, (1.0, 0.0)), (math.pi, (-1.0, 0.0)), (math.pi / 2, (0.0, 1.0))])
def test_circle_param(theta, xy):
    assert np.allclose(circle_param(theta), xy, atol=1e-15)


@pytest.mark.parametrize("a,b,d", [(0.1, TWO_PI - 0.1, 0.2), (1.3, 1.3, 0.0), (0.0, math.pi, math.pi)])
def test_angular_distance_examples(a, b, d):
    assert angular_distance(a, b) == pytest.approx(d, abs=1e-14)


def test_area_examples():
    assert riemannian_area(CylinderPatch(0.0, 1.0, 0.0, TWO_PI)) == pytest.approx(TWO_PI)
    cell = CylinderPatch(0.0, 0.005, 0.0, TWO_PI / 48)
    assert riemannian_area(cell) == pytest.approx(0.005 * TWO_PI / 48, rel=1e-14)
    assert riemannian_area(cell) == pytest.approx(6.545e-4, abs=1e-7)
    assert riemannian_area(CylinderPatch(0.0, 1.0, 0.3, 0.3)) == 0.0


def test_patch_validation():
    with pytest.raises(ValueError):
        CylinderPatch(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        CylinderPatch(0.0, 1.0, 0.0, 7.0)


def test_zero_maps_to_two_pi():
    assert normalize_angle(0.0) == TWO_PI
    assert CylinderPoint(1.0, 0.0).theta == TWO_PI
    assert delivery_angle(24, 24) == pytest.approx(TWO_PI)


@given(angles)
def test_normalize_range_and_idempotence(theta):
    r = normalize_angle(theta)
    assert 0.0 < r <= TWO_PI
    assert normalize_angle(r) == r


@given(angles, angles)
def test_distance_symmetric_and_bounded(a, b):
    d = angular_distance(a, b)
    assert 0.0 <= d <= math.pi + 1e-12
    assert d == pytest.approx(angular_distance(b, a), abs=1e-12)


@given(
    st.floats(-5, 5),
    st.floats(0.0, 3.0),
    st.floats(-10, 10),
    st.floats(0.0, TWO_PI),
    st.integers(1, 7),
    st.integers(1, 7),
)
def test_area_additive_under_splits(t0, dt, th0, width, nt, na):
    p = CylinderPatch(t0, t0 + dt, th0, th0 + width)
    total = riemannian_area(p)
    parts = sum(riemannian_area(q) for piece in p.split_time(nt) for q in piece.split_angle(na))
    assert parts == pytest.approx(total, rel=1e-12, abs=1e-12)


@given(st.floats(0, 3), st.floats(-10, 10), st.floats(0.0, TWO_PI), st.floats(-20, 20))
def test_area_rotation_invariant(dt, th0, width, c):
    p = CylinderPatch(0.0, dt, th0, th0 + width)
    assert riemannian_area(p.rotated(c)) == pytest.approx(riemannian_area(p), rel=1e-12, abs=1e-14)


def test_angular_set_wraps_and_complements():
    s = AngularSet.from_pairs([(5.5, 7.0)])
    assert s.measure == pytest.approx(1.5)
    assert len(s.intervals) == 2
    assert s.contains(0.3) and not s.contains(3.0)
    assert s.complement().measure == pytest.approx(TWO_PI - 1.5)
    with pytest.raises(ValueError):
        AngularSet.from_pairs([(0.0, 2.0), (1.0, 3.0)])


@given(st.floats(0.0, TWO_PI), st.floats(0.0, TWO_PI), st.integers(1, 48))
@settings(max_examples=60)
def test_cell_weights_partition(lo, width, H):
    s = AngularSet.from_pairs([(lo, lo + width)])
    w, wc = s.cell_weights(H), s.complement().cell_weights(H)
    assert w.sum() == pytest.approx(s.measure, abs=1e-10)
    assert np.allclose(w + wc, TWO_PI / H, atol=1e-10)
