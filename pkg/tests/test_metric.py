import math

import numpy as np
import pytest

from hypfill import hyperboloid as hb
from hypfill.metric import ConformalBump, MetricField, bump_derivs, default_bump, sample_disc


@pytest.fixture(scope="module")
def pert():
    return MetricField(2, 3.0, default_bump(0.05))


def test_exact_curvature_is_minus_one():
    m = MetricField(2)
    z = sample_disc(0.6, 9)
    assert np.allclose(m.curvature_chart(z), -1.0, atol=1e-12)


def test_perturbed_curvature_stays_negative(pert):
    assert pert.check_negative_curvature() < 0


def test_epsilon_norm_linear_in_amplitude(pert):
    a = pert.epsilon_norm()
    b = pert.with_amplitude(0.025).epsilon_norm()
    assert a == pytest.approx(2 * b, rel=1e-12)


def test_bump_derivatives_against_fd():
    bump = default_bump(0.05)
    z = np.array([[0.2, 0.1]])
    u, g, H = bump_derivs(bump, z)
    h = 1e-5
    for k, e in enumerate(np.eye(2)):
        up = bump_derivs(bump, z + h * e)
        um = bump_derivs(bump, z - h * e)
        assert (up[0] - um[0])[0] / (2 * h) == pytest.approx(g[0, k], abs=1e-8)
        assert np.allclose((up[1] - um[1])[0] / (2 * h), H[0, k], atol=1e-6)


def test_bump_vanishes_outside_support():
    bump = default_bump(0.05)
    far = hb.hyperboloid_to_disc(hb.point_from_direction([-math.cos(0.5), -math.sin(0.5)], 1.0))
    u, g, H = bump_derivs(bump, far[None, :])
    assert u[0] == 0 and np.all(g == 0) and np.all(H == 0)


def test_amplitude_guard():
    with pytest.raises(ValueError):
        ConformalBump.at(0.3, 0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        MetricField(2, 3.0, ConformalBump.at(1.0, 0.0, 1.0, 0.05))


def test_christoffel_against_metric_derivative(pert):
    z = np.array([0.1, 0.15])
    G = pert.christoffel_chart(z)
    h = 1e-6
    dg = [(pert.metric_chart(z + h * e) - pert.metric_chart(z - h * e)) / (2 * h) for e in np.eye(2)]
    g = pert.metric_chart(z)
    ginv = np.linalg.inv(np.asarray(g).reshape(2, 2))
    dg = [np.asarray(d).reshape(2, 2) for d in dg]
    ref = np.empty((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                ref[k, i, j] = 0.5 * sum(
                    ginv[k, l] * (dg[i][l, j] + dg[j][l, i] - dg[l][i, j]) for l in range(2)
                )
    assert np.allclose(G, ref, atol=1e-6)


def test_rk4_shot_agrees_with_dop853(pert):
    z = np.array([0.05, -0.1])
    d = np.array([math.cos(0.4), math.sin(0.4)])
    end = pert.shoot_chart(z, d, 1.5)
    w = pert.conformal_log(z)[0]
    sol = pert.geodesic_ivp_chart(z, d * math.exp(-w), 1.5)
    assert np.allclose(end, sol.y[:, -1], atol=1e-9)
    # unit speed is conserved
    assert pert.speed(end[:2], end[2:]) == pytest.approx(1.0, abs=1e-9)


def test_bvp_recovers_shot_length(pert):
    z = np.array([0.1, 0.0])
    d = np.array([math.cos(2.0), math.sin(2.0)])
    end = pert.shoot_chart(z, d, 0.9)[:2]
    x, y = hb.disc_to_hyperboloid(z), hb.disc_to_hyperboloid(end)
    dd, L = pert.bvp_direction(x, y)
    assert L == pytest.approx(0.9, abs=1e-8)
    assert np.allclose(dd, d, atol=1e-7)
    assert pert.distance(y, x) == pytest.approx(0.9, abs=1e-8)


def test_exact_fan_closed_form():
    m = MetricField(2)
    z = np.array([0.2, -0.1])
    th = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    v = np.column_stack([np.cos(th), np.sin(th)])
    dirs = -hb.busemann0_grad_frame(v, z[None, :])
    end, raw, hit = m.fan(z, dirs)
    assert np.allclose(np.cos(end - th), 1.0, atol=1e-12)
    assert np.allclose(raw, hb.busemann0_disc(v, z[None, :]), atol=1e-12)


def test_perturbed_fan_reduces_to_exact_far_from_bump(pert):
    # rays that never enter the support see the exact metric
    z = hb.hyperboloid_to_disc(hb.point_from_direction([math.cos(3.6), math.sin(3.6)], 1.4))
    th = np.array([3.6, 3.7])
    v = np.column_stack([np.cos(th), np.sin(th)])
    dirs = -hb.busemann0_grad_frame(v, z[None, :])
    end, raw, hit = pert.fan(z, dirs)
    assert not hit.any()
    assert np.allclose(raw, hb.busemann0_disc(v, z[None, :]), atol=1e-12)
