import numpy as np
import pytest

from hypfill import hyperboloid as hb
from hypfill.embedding import EmbeddingField
from hypfill.filling import (
    DiscMesh,
    DiscreteSurface,
    DominationError,
    LipschitzError,
    MeshError,
    boundary_distances,
    bump_factor,
    filling_report,
    graph_distances,
    lipschitz_extension,
    make_disc_mesh,
    read_mesh,
    riemannian_volume,
    surface_volume_G,
    write_mesh,
)
from hypfill.metric import MetricField
from hypfill.sphere import make_grid

EMB = EmbeddingField(MetricField(2, 3.0), make_grid(2, 360))


@pytest.fixture(scope="module")
def mesh():
    return make_disc_mesh(0.6, 600)


@pytest.fixture(scope="module")
def fine():
    return make_disc_mesh(0.6, 2000)


def test_mesh_roundtrip(tmp_path, mesh):
    p = tmp_path / "m.txt"
    write_mesh(mesh, p)
    back = read_mesh(p)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.tensors, mesh.tensors)
    assert np.array_equal(back.boundary, mesh.boundary)


def test_bad_mesh_inputs(tmp_path):
    with pytest.raises(MeshError):
        DiscMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [[[1, 0], [0, -1]]], [0, 1, 2])
    p = tmp_path / "bad.txt"
    p.write_text("vertices 2\n0 0\n")
    with pytest.raises(MeshError):
        read_mesh(p)


def test_disconnected_mesh_rejected():
    v = [[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]]
    m = DiscMesh(v, [[0, 1, 2], [3, 4, 5]], np.broadcast_to(np.eye(2), (2, 2, 2)), [0, 1, 2])
    with pytest.raises(MeshError):
        graph_distances(m, [0, 3])


def test_boundary_distances_against_geodesics(mesh):
    bd = boundary_distances(mesh)
    X = hb.disc_to_hyperboloid(mesh.vertices[mesh.boundary])
    true = hb.dist0(X[:, None, :], X[None, :, :])
    off = true > 0
    ratio = bd[off] / true[off]
    assert ratio.min() >= 1.0 - 1e-9  # dominating tensors overestimate
    assert ratio.max() <= 1.03  # coarse mesh
    assert np.allclose(bd, bd.T)
    # bd[i, k] <= bd[i, j] + bd[j, k]
    assert (bd[:, None, :] <= bd[:, :, None] + bd[None, :, :] + 1e-12).all()


def test_volume_close_to_hyperbolic_area(mesh):
    area = 2 * np.pi * (np.cosh(0.6) - 1)
    assert riemannian_volume(mesh) == pytest.approx(area, rel=0.02)


def test_extension_of_constants(mesh):
    # the inf formula lifts a constant by the distance to the boundary
    bv = np.full((len(mesh.boundary), 4), 0.7)
    dist = graph_distances(mesh, mesh.boundary)
    surf, cert = lipschitz_extension(mesh, bv, dist=dist)
    assert np.allclose(surf.values, 0.7 + dist.min(axis=0)[:, None])
    assert np.all(surf.values[mesh.boundary] == 0.7)
    assert cert <= 1e-9


def test_extension_is_min_of_two():
    v = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    tris = [[0, 3, 2], [3, 1, 2]]
    m = DiscMesh(v, tris, np.broadcast_to(np.eye(2), (2, 2, 2)), [0, 1])
    bv = np.array([[0.0], [0.5]])
    surf, _ = lipschitz_extension(m, bv)
    # interior vertex 3 sits at distance 1 from both boundary points
    assert surf.values[3, 0] == pytest.approx(min(0.0 + 1.0, 0.5 + 1.0))


def test_extension_rejects_non_lipschitz(mesh):
    bv = np.zeros((len(mesh.boundary), 1))
    bv[0] = 5.0
    with pytest.raises(LipschitzError, match="pair"):
        lipschitz_extension(mesh, bv)


def test_boundary_values_kept_for_embedding(mesh):
    bv = np.array([EMB.at_chart(mesh.vertices[i]).phi for i in mesh.boundary])
    surf, cert = lipschitz_extension(mesh, bv)
    assert np.array_equal(surf.values[mesh.boundary], bv)
    assert cert <= 1e-9


def test_constant_surface_has_zero_volume(mesh):
    surf = DiscreteSurface.from_values(mesh, np.full((len(mesh.vertices), EMB.grid.size), 0.2))
    assert surface_volume_G(EMB, mesh, surf) == 0.0


def test_embedding_surface_volume_matches(fine):
    vals = np.array([EMB.at_chart(z).phi for z in fine.vertices])
    surf = DiscreteSurface.from_values(fine, vals)
    area = 2 * np.pi * (np.cosh(0.6) - 1)
    assert surface_volume_G(EMB, fine, surf) == pytest.approx(area, rel=0.01)


def test_report_equality_and_domination(fine):
    mesh = fine
    rep = filling_report(EMB, mesh, mesh)
    chain = rep["chain"]
    assert max(chain.values()) / min(chain.values()) - 1 <= 0.01
    assert all(rep["links"].values())
    assert rep["verdict"]
    big = make_disc_mesh(0.6, 2000, factor=bump_factor(0.1))
    rep2 = filling_report(EMB, mesh, big)
    assert rep2["chain"]["vol_M_prime"] > rep2["chain"]["vol_D_g"] * 1.01
    assert all(rep2["links"].values())
    with pytest.raises(DominationError):
        filling_report(EMB, mesh, make_disc_mesh(0.6, 2000, factor=bump_factor(-0.3)))
