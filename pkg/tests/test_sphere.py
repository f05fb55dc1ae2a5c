import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfill.sphere import (
    BoundaryFunction,
    GridMismatch,
    cutoff,
    integrate,
    l2_inner,
    l2_norm,
    make_grid,
    sup_norm,
    weighted_l2,
)


@pytest.mark.parametrize("n,N", [(2, 720), (2, 16), (3, 400)])
def test_weights_are_probability(n, N):
    g = make_grid(n, N)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(np.linalg.norm(g.nodes, axis=1), 1.0)


def test_bad_grids():
    with pytest.raises(ValueError):
        make_grid(4)
    with pytest.raises(ValueError):
        make_grid(2, 3)


@given(st.integers(1, 300))
@settings(max_examples=30, deadline=None)
def test_circle_rule_exact_on_trig_polynomials(k):
    g = make_grid(2, 720)
    assert integrate(g.function(np.cos(k * g.angles))) == pytest.approx(0.0, abs=1e-12)
    assert integrate(g.function(np.cos(k * g.angles) ** 2)) == pytest.approx(0.5, abs=1e-12)


def test_sphere_lattice_moments():
    g = make_grid(3, 1024)
    assert integrate(g.function(g.nodes[:, 2])) == pytest.approx(0.0, abs=1e-3)
    assert integrate(g.function(g.nodes[:, 2] ** 2)) == pytest.approx(1 / 3, abs=2e-3)


def test_norms_and_csv_roundtrip():
    g = make_grid(2, 64)
    f = g.function(np.sin(g.angles) + 0.25)
    assert sup_norm(f) == pytest.approx(1.25, abs=1e-3)
    assert l2_norm(f) ** 2 == pytest.approx(0.5 + 0.0625, abs=1e-12)
    assert weighted_l2(f, np.ones(64)) == pytest.approx(l2_norm(f))
    assert l2_inner(f, f) == pytest.approx(l2_norm(f) ** 2)
    back = BoundaryFunction.from_csv_row(g, f.to_csv_row())
    assert np.array_equal(back.values, f.values)


def test_cutoff_and_mismatch():
    g = make_grid(2, 32)
    f = g.function(np.linspace(-5, 5, 32))
    c = cutoff(f, 3.0)
    assert sup_norm(c) == 1.5
    with pytest.raises(GridMismatch):
        l2_inner(f, make_grid(2, 16).constant(1.0))
