import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfill import hyperboloid as hb

angles = st.floats(0, 2 * math.pi, allow_nan=False)
radii = st.floats(0, 3, allow_nan=False)


def point(a, r):
    return hb.point_from_direction([math.cos(a), math.sin(a)], r)


def test_origin_and_sheet():
    o = hb.origin(2)
    assert np.allclose(o, [0, 0, 1])
    assert hb.mink_inner(o, o) == -1


@given(angles, radii, angles, radii)
@settings(max_examples=60, deadline=None)
def test_distance_symmetric_and_log_exp_roundtrip(a1, r1, a2, r2):
    x, y = point(a1, r1), point(a2, r2)
    d = float(hb.dist0(x, y))
    assert d == pytest.approx(float(hb.dist0(y, x)), abs=1e-12)
    v = hb.log_map(x, y)
    assert math.sqrt(max(hb.mink_inner(v, v), 0)) == pytest.approx(d, abs=1e-9)
    assert np.allclose(hb.exp_map(x, v), y, atol=1e-8 * math.cosh(6))


@given(angles, radii, angles, radii, angles, radii)
@settings(max_examples=40, deadline=None)
def test_triangle_inequality(a1, r1, a2, r2, a3, r3):
    x, y, z = point(a1, r1), point(a2, r2), point(a3, r3)
    assert hb.dist0(x, z) <= hb.dist0(x, y) + hb.dist0(y, z) + 1e-9


@given(angles, radii)
@settings(max_examples=40, deadline=None)
def test_disc_roundtrip(a, r):
    x = point(a, r)
    z = hb.hyperboloid_to_disc(x)
    assert np.linalg.norm(z) == pytest.approx(math.tanh(r / 2), abs=1e-12)
    assert np.allclose(hb.disc_to_hyperboloid(z), x, atol=1e-9 * math.cosh(r))


@given(angles, st.floats(0.01, 2.5), st.floats(0.1, 1.0))
@settings(max_examples=40, deadline=None)
def test_homothety_scales_distance_to_origin(a, r, t):
    x = point(a, r)
    y = hb.homothety_At(t, x)
    assert float(hb.dist0(hb.origin(2), y)) == pytest.approx(t * r, abs=1e-10)


@given(angles, angles, radii)
@settings(max_examples=40, deadline=None)
def test_busemann_closed_form_matches_limit(s_ang, a, r):
    s = np.array([math.cos(s_ang), math.sin(s_ang)])
    x = point(a, min(r, 2.0))
    # the limit converges like exp(-2T); T = 20 is far inside double precision
    assert float(hb.busemann0(s, x)) == pytest.approx(float(hb.busemann0_limit(s, x, 20.0)), abs=1e-6)


@given(angles, angles, st.floats(0, 2.0))
@settings(max_examples=40, deadline=None)
def test_busemann_gradient_is_unit_and_matches_fd(s_ang, a, r):
    s = np.array([math.cos(s_ang), math.sin(s_ang)])
    x = point(a, r)
    g = hb.busemann0_grad(s, x)
    assert hb.mink_inner(g, g) == pytest.approx(1.0, abs=1e-9)
    assert abs(hb.mink_inner(g, x)) < 1e-9
    z = hb.hyperboloid_to_disc(x)
    gf = hb.busemann0_grad_frame(s, z)
    h = 1e-6
    fd = np.array([(hb.busemann0_disc(s, z + h * e) - hb.busemann0_disc(s, z - h * e)) / (2 * h)
                   for e in np.eye(2)])
    assert np.allclose(gf, fd / hb.frame_scale(z), atol=1e-6)


def test_busemann_along_ray_is_minus_t():
    s = np.array([0.6, 0.8])
    for t in (0.0, 0.5, 2.0):
        assert float(hb.busemann0(s, hb.ray_point(s, t))) == pytest.approx(-t, abs=1e-12)


def test_ideal_point_of_ray():
    s = np.array([0.0, 1.0])
    x = hb.ray_point(s, 0.7)
    w = hb.ray_velocity(s, 0.7)
    assert np.allclose(hb.ideal_point_of_ray(x, w), s, atol=1e-12)
