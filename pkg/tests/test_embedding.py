import math

import numpy as np
import pytest

from hypfill import hyperboloid as hb
from hypfill.embedding import EmbeddingField, sample_points
from hypfill.metric import MetricField, default_bump
from hypfill.sphere import make_grid


@pytest.fixture(scope="module")
def exact():
    return EmbeddingField(MetricField(2, 3.0), make_grid(2, 720))


@pytest.fixture(scope="module")
def pert():
    return EmbeddingField(MetricField(2, 3.0, default_bump(0.05)), make_grid(2, 720))


def test_exact_values_are_busemann(exact):
    x = hb.point_from_direction([0.6, 0.8], 0.9)
    assert np.allclose(exact.at(x).phi, hb.busemann0(exact.grid.nodes, x), atol=1e-12)
    assert np.allclose(exact.phi_embed(hb.origin(2)).values, 0.0, atol=1e-15)


def test_perturbed_normalized_at_origin(pert):
    assert np.abs(pert.at(hb.origin(2)).phi).max() < 1e-14


def test_perturbed_values_match_horosphere_oracle(pert):
    # independent route: distance to a far horosphere by geodesic BVP shooting
    x = hb.disc_to_hyperboloid(np.array([0.15, 0.2]))
    i = 90
    s = pert.grid.nodes[i]
    val, grad = pert.busemann_perturbed(s, x)
    d = pert.at(x)
    assert d.phi[i] == pytest.approx(val, abs=1e-7)
    assert np.allclose(d.grad[i], grad, atol=1e-6)


def test_perturbed_gradients_unit_and_lambda_mass(pert):
    x = hb.disc_to_hyperboloid(np.array([-0.1, 0.25]))
    d = pert.at(x)
    assert np.allclose(np.linalg.norm(d.grad, axis=1), 1.0, atol=1e-12)
    assert pert.grid.weights @ d.lam == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(pert.density_lambda(x, method="fd"), d.lam, rtol=1e-5)


def test_lambda_closed_form_exact(exact):
    x = hb.point_from_direction([1.0, 0.0], 1.2)
    lam = exact.density_lambda(x, method="fd")
    assert np.allclose(lam, np.exp(-exact.at(x).phi), rtol=1e-9)


def test_lambda_on_two_sphere():
    e = EmbeddingField(MetricField(3, 3.0), make_grid(3, 200))
    x = hb.point_from_direction([0.0, 0.6, 0.8], 0.7)
    lam = e.density_lambda(x, method="fd")
    assert np.allclose(lam, np.exp(-2 * e.at(x).phi), rtol=1e-6)


@pytest.mark.parametrize("which", ["exact", "pert"])
def test_alpha_inverts_alpha_inv(which, request):
    emb = request.getfixturevalue(which)
    x = hb.disc_to_hyperboloid(np.array([0.12, -0.2]))
    s = emb.grid.nodes[200]
    v = emb.alpha_inv(x, s)
    assert np.allclose(emb.alpha(v), s, atol=1e-8)


def test_a_xs_identity_exact_by_fd(exact):
    x = hb.disc_to_hyperboloid(np.array([0.2, 0.1]))
    A = exact.a_xs_all(x, method="fd")
    assert np.abs(A - np.eye(2)).max() < 1e-8


def test_a_xs_trace_perturbed(pert):
    x = hb.disc_to_hyperboloid(np.array([0.1, 0.1]))
    A = pert.a_xs_all(x)
    assert np.abs(np.trace(A, axis1=1, axis2=2) - 2).max() < 1e-6
    # not the identity: the bump is felt
    assert np.abs(A - np.eye(2)).max() > 1e-3


def test_laplacian_exact(exact):
    x = hb.disc_to_hyperboloid(np.array([0.3, -0.1]))
    assert np.abs(exact.laplacian_phi(x) - 1.0).max() < 1e-6


def test_sample_points_radius():
    rng = np.random.default_rng(0)
    pts = sample_points(rng, 50, 1.5)
    assert np.all(hb.dist0(hb.origin(2), pts) <= 1.5 + 1e-12)
