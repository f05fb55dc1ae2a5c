import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfill import hyperboloid as hb
from hypfill.compression import (
    RadiusError,
    admissible_sigma,
    compression,
    h_value,
    homothety_chart,
    homothety_chart_derivs,
    jacobian_F,
    jacobian_q_bound,
    jacobian_q_hyperbolic,
    jacobian_q_model,
    jacobian_q_numeric,
    p_sigma,
    q_sigma,
)
from hypfill.embedding import EmbeddingField
from hypfill.metric import MetricField, default_bump
from hypfill.projector import differential
from hypfill.sphere import make_grid

GRID = make_grid(2, 720)
EXACT = EmbeddingField(MetricField(2, 3.0), GRID)


def rough_phi(seed, amp=0.5):
    rng = np.random.default_rng(seed)
    k = np.arange(1, 33)
    a = rng.normal(size=32) * amp * k**-2.0
    b = rng.normal(size=32) * amp * k**-2.0
    th = GRID.angles
    return GRID.function(a @ np.cos(np.outer(k, th)) + b @ np.sin(np.outer(k, th)))


def test_h_vanishes_on_surface():
    x = hb.disc_to_hyperboloid(np.array([0.2, -0.3]))
    assert h_value(differential(EXACT, EXACT.phi_embed(x))) < 1e-9


def test_homothety_chart_matches_hyperboloid():
    z = np.array([0.3, 0.4])
    for t in (0.2, 0.7, 1.0):
        ref = hb.hyperboloid_to_disc(hb.homothety_At(t, hb.disc_to_hyperboloid(z)))
        assert np.allclose(homothety_chart(z, t), ref, atol=1e-12)


def test_homothety_derivatives_fd():
    z, t, h = np.array([0.3, -0.2]), 0.6, 1e-6
    J, dt = homothety_chart_derivs(z, t)
    fd = np.column_stack([(homothety_chart(z + h * e, t) - homothety_chart(z - h * e, t)) / (2 * h)
                          for e in np.eye(2)])
    assert np.allclose(J, fd, atol=1e-8)
    assert np.allclose(dt, (homothety_chart(z, t + h) - homothety_chart(z, t - h)) / (2 * h), atol=1e-8)


def test_q_sigma_radius_guard():
    with pytest.raises(RadiusError):
        q_sigma(hb.point_from_direction([1.0, 0.0], 2.0), 0.5, 0.1)


@given(st.floats(0, 1.55), st.floats(0, 3), st.floats(0, 2 * math.pi))
@settings(max_examples=60, deadline=None)
def test_q_sigma_jacobian_closed_forms(r, hh, a):
    sigma = 0.1
    x = hb.point_from_direction([math.cos(a), math.sin(a)], r)
    num = jacobian_q_numeric(x, hh, sigma)
    assert num == pytest.approx(jacobian_q_hyperbolic(r, hh, sigma), abs=1e-7)
    assert num <= jacobian_q_bound(hh, sigma) + 1e-6
    assert jacobian_q_hyperbolic(r, hh, sigma) <= jacobian_q_model(r, hh, sigma) + 1e-12


def test_admissible_sigma():
    assert admissible_sigma(1.3) == 0.1
    assert admissible_sigma(2.0) == 0.05
    assert admissible_sigma(100.0) is None


@pytest.mark.parametrize("eps", [0.0, 0.02])
def test_p_sigma_differential_against_fd(eps):
    emb = EXACT if eps == 0 else EmbeddingField(MetricField(2, 3.0, default_bump(eps)), GRID)
    phi = rough_phi(4)
    sigma = 0.1
    cd = compression(emb, phi, sigma)
    delta = np.random.default_rng(2).normal(size=GRID.size) * 0.3
    t = 1e-4
    zp = hb.hyperboloid_to_disc(p_sigma(emb, phi.values + t * delta, sigma))
    zm = hb.hyperboloid_to_disc(p_sigma(emb, phi.values - t * delta, sigma))
    zo = hb.hyperboloid_to_disc(cd.point)
    fd = (zp - zm) / (2 * t) * math.exp(float(emb.metric.conformal_log(zo)[0]))
    assert np.allclose(cd.L @ delta, fd, atol=1e-6)


def test_compression_strictly_contracts_off_surface():
    for seed in range(30):
        cd = compression(EXACT, rough_phi(seed), 0.1)
        assert cd.J <= 1 - 1e-4 * cd.h**2
        assert jacobian_F(cd.pd, 0.1) <= 1 + 1e-9


def test_compression_identity_on_surface():
    x = hb.disc_to_hyperboloid(np.array([0.1, 0.2]))
    cd = compression(EXACT, EXACT.phi_embed(x), 0.1)
    assert hb.dist0(cd.point, x) < 1e-9
    assert cd.J == pytest.approx(1.0, abs=1e-9)
