import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfill import hyperboloid as hb
from hypfill.embedding import EmbeddingField
from hypfill.metric import MetricField, default_bump
from hypfill.projector import (
    ProjectionError,
    differential,
    project,
    projection_closed_form,
    w_field,
)
from hypfill.sphere import make_grid

GRID = make_grid(2, 720)
EXACT = EmbeddingField(MetricField(2, 3.0), GRID)


@pytest.fixture(scope="module")
def pert():
    return EmbeddingField(MetricField(2, 3.0, default_bump(0.05)), GRID)


def rough_phi(seed, amp=0.5):
    rng = np.random.default_rng(seed)
    k = np.arange(1, 33)
    a = rng.normal(size=32) * amp * k**-2.0
    b = rng.normal(size=32) * amp * k**-2.0
    th = GRID.angles
    return GRID.function(a @ np.cos(np.outer(k, th)) + b @ np.sin(np.outer(k, th)))


def test_constant_projects_to_origin():
    res = project(EXACT, GRID.constant(0.3))
    assert np.allclose(res.point, hb.origin(2), atol=1e-14)


@given(st.integers(0, 10_000), st.floats(-2, 2))
@settings(max_examples=30, deadline=None)
def test_exact_newton_matches_closed_form_and_is_shift_invariant(seed, c):
    phi = rough_phi(seed)
    p = project(EXACT, phi).point
    assert hb.dist0(p, projection_closed_form(EXACT, phi)) < 1e-9
    assert hb.dist0(p, project(EXACT, phi + c).point) < 1e-9


@given(st.integers(0, 10_000), st.integers(1, 719))
@settings(max_examples=20, deadline=None)
def test_rotation_equivariance(seed, k):
    phi = rough_phi(seed)
    rot = GRID.function(np.roll(phi.values, k))
    a = 2 * np.pi * k / 720
    R = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    assert hb.dist0(project(EXACT, rot).point, R @ project(EXACT, phi).point) < 1e-9


def test_zero_of_w_field():
    phi = rough_phi(3)
    p = project(EXACT, phi).point
    W = w_field(EXACT, phi, p)
    assert math.sqrt(max(hb.mink_inner(W.vec, W.vec), 0)) < 1e-9


@pytest.mark.parametrize("which", ["exact", "pert"])
def test_dP_against_finite_differences(which, request):
    emb = EXACT if which == "exact" else request.getfixturevalue("pert")
    phi = rough_phi(11)
    pd = differential(emb, phi)
    rng = np.random.default_rng(5)
    delta = rng.normal(size=GRID.size) * 0.3
    t = 1e-4
    zp = project(emb, phi.values + t * delta).z
    zm = project(emb, phi.values - t * delta).z
    fd = (zp - zm) / (2 * t) * math.exp(float(emb.metric.conformal_log(pd.z)[0]))
    assert np.allclose(pd.dP @ delta, fd, atol=1e-6)


def test_projection_of_embedding_and_isometry(pert):
    x = hb.disc_to_hyperboloid(np.array([0.15, 0.1]))
    for emb in (EXACT, pert):
        phi = emb.phi_embed(x)
        pd = differential(emb, phi)
        assert hb.dist0(pd.point, x) < 1e-7
        assert pd.JG == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(pd.E @ pd.grad, np.eye(2), atol=1e-10)


def test_jacobians_bounded():
    for seed in range(20):
        pd = differential(EXACT, rough_phi(seed))
        assert pd.JE <= 1 + 1e-9
        assert pd.op_norm_G(pd.E) <= 2 + 1e-9
        Y = np.random.default_rng(seed).normal(size=(GRID.size, 2))
        assert pd.jacobian_Y(pd.dP, Y) <= pd.JG + 1e-12


def test_nonconvergence_raises(pert):
    with pytest.raises(ProjectionError):
        project(pert, rough_phi(1), max_iter=0)
