"""Discrete filling experiment on a disc ``D = B_o(r)``.

A competitor metric ``g'`` lives on a triangulated copy of ``D`` as one
constant tensor per triangle (chart coordinates).  Boundary values of the
embedding are extended inward by the inf-formula with ``g'`` distances,
pushed through the compressed projection, and the resulting volumes are
compared with ``vol(D, g)``.

Mesh text format (``write_mesh`` / ``read_mesh``)::

    # hypfill disc mesh v1
    vertices V
    x y                      (V lines, chart coordinates)
    triangles T
    i j k g11 g12 g22        (T lines, 0-based vertex ids, chart tensor of g')
    boundary m
    i0 i1 ... i(m-1)         (one line, counter-clockwise boundary cycle)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import Delaunay

from . import hyperboloid as hb
from .compression import compression
from .embedding import EmbeddingField
from .metric import ConformalBump, MetricField
from .projector import ProjectionError
from .sphere import BoundaryFunction

MESH_TOL = 0.01
LIPSCHITZ_SLACK = 1e-9


class MeshError(ValueError):
    """Malformed or disconnected mesh."""


class DominationError(ValueError):
    """``bd_{g'} >= bd_g`` fails on the boundary."""


class LipschitzError(ValueError):
    """Boundary data is not 1-Lipschitz for the boundary distance."""


def _cross2(a, b):
    """z-component of the cross product of planar vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class DiscMesh:
    vertices: np.ndarray  # (V, 2) chart coordinates
    triangles: np.ndarray  # (T, 3)
    tensors: np.ndarray  # (T, 2, 2) chart metric of g'
    boundary: np.ndarray  # (m,) counter-clockwise cycle

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.tensors = np.asarray(self.tensors, dtype=float)
        self.boundary = np.asarray(self.boundary, dtype=np.int64)
        if self.tensors.shape != (len(self.triangles), 2, 2):
            raise MeshError("one 2x2 tensor per triangle expected")
        if np.any(np.linalg.eigvalsh(self.tensors) <= 0):
            raise MeshError("metric tensors must be positive definite")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle refers to a missing vertex")

    @property
    def chart_areas(self):
        P = self.vertices[self.triangles]
        return 0.5 * np.abs(_cross2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]))

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def with_tensors(self, tensors):
        return DiscMesh(self.vertices, self.triangles, tensors, self.boundary)


def conformal_tensors(mesh: DiscMesh, metric: MetricField, factor=None):
    """Tensors ``max_v f(v) exp(2w(v)) I`` over the vertices ``v`` of each triangle.

    Taking the vertex maximum makes the discrete metric dominate the smooth
    one, so graph distances overestimate and 1-Lipschitz boundary data stay
    1-Lipschitz on the mesh.  The price is a first-order area bias (about
    0.7% at the default resolution).
    """
    scale = np.exp(2 * metric.conformal_log(mesh.vertices))
    if factor is not None:
        scale = scale * factor(mesh.vertices)
    return scale[mesh.triangles].max(axis=1)[:, None, None] * np.eye(2)


def make_disc_mesh(radius=0.6, triangles=2000, metric: MetricField | None = None, factor=None):
    """Delaunay mesh of ``B_o(radius)`` with about ``triangles`` triangles.

    Boundary nodes sit on the chart circle and interior nodes on a
    sunflower spiral; tensors come from ``metric`` (default g0) times the
    optional scalar ``factor(chart points)``.
    """
    metric = metric or MetricField(2)
    rc = float(hb.disc_radius(radius))
    K = triangles / 2
    for _ in range(20):
        K = triangles / 2 - math.sqrt(math.pi * K)
    K = max(int(round(K)), 1)
    m = max(int(round(2 * math.sqrt(math.pi * K))), 8)
    ang = 2 * np.pi * np.arange(m) / m
    bnd = rc * np.column_stack([np.cos(ang), np.sin(ang)])
    spacing = rc * math.sqrt(math.pi / K)
    k = np.arange(K)
    rad = (rc - 0.5 * spacing) * np.sqrt((k + 0.5) / K)
    phase = k * math.pi * (3.0 - math.sqrt(5.0))
    inner = np.column_stack([rad * np.cos(phase), rad * np.sin(phase)])
    pts = np.vstack([bnd, inner])
    tri = Delaunay(pts).simplices
    # counter-clockwise orientation for every triangle
    P = pts[tri]
    flip = _cross2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    mesh = DiscMesh(pts, tri, np.broadcast_to(np.eye(2), (len(tri), 2, 2)), np.arange(m))
    return mesh.with_tensors(conformal_tensors(mesh, metric, factor))


def bump_factor(amplitude, offset=0.0, angle=0.0, radius=0.45):
    """Scalar field ``1 + amplitude * b`` with a C^2 bump ``b`` (peak 1) of g0-radius ``radius``."""
    unit = 0.1
    field = MetricField(2, 3.0, ConformalBump.at(offset, angle, radius, unit))

    def factor(z):
        return 1.0 + amplitude / unit * field.u(np.atleast_2d(z))

    return factor


# --------------------------------------------------------------- mesh I/O


def write_mesh(mesh: DiscMesh, path):
    with open(path, "w") as fh:
        fh.write("# hypfill disc mesh v1\n")
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for t, g in zip(mesh.triangles, mesh.tensors):
            g11, g12, g22 = (float(v) for v in (g[0, 0], g[0, 1], g[1, 1]))
            fh.write(f"{t[0]} {t[1]} {t[2]} {g11!r} {g12!r} {g22!r}\n")
        fh.write(f"boundary {len(mesh.boundary)}\n")
        fh.write(" ".join(str(int(i)) for i in mesh.boundary) + "\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        it = iter(lines)
        head = next(it)
        V = int(head[1])
        verts = [[float(a) for a in next(it)] for _ in range(V)]
        head = next(it)
        T = int(head[1])
        tris, tens = [], []
        for _ in range(T):
            row = next(it)
            tris.append([int(a) for a in row[:3]])
            g11, g12, g22 = (float(a) for a in row[3:6])
            tens.append([[g11, g12], [g12, g22]])
        head = next(it)
        m = int(head[1])
        bnd = [int(a) for a in next(it)] if m else []
    except (StopIteration, IndexError, ValueError) as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from exc
    if len(bnd) != m:
        raise MeshError("boundary count does not match")
    return DiscMesh(np.array(verts), np.array(tris), np.array(tens), np.array(bnd))


# --------------------------------------------------------------- distances


def _steiner_graph(mesh: DiscMesh, rounds=2):
    """Nodes: vertices plus ``2^rounds - 1`` points per edge; arcs inside each triangle."""
    V = len(mesh.vertices)
    edges = mesh.edges()
    k = 2**rounds - 1
    frac = np.arange(1, k + 1) / (k + 1)
    eid = {tuple(e): i for i, e in enumerate(edges)}
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    steiner = (a[:, None, :] + frac[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)
    coords = np.vstack([mesh.vertices, steiner])
    rows, cols, wts = [], [], []
    for t, g in zip(mesh.triangles, mesh.tensors):
        ids = list(t)
        for p, q in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            i = eid[(min(p, q), max(p, q))]
            ids.extend(V + i * k + np.arange(k))
        ids = np.array(ids)
        P = coords[ids]
        ii, jj = np.triu_indices(len(ids), 1)
        d = P[jj] - P[ii]
        w = np.sqrt(np.einsum("ij,jk,ik->i", d, g, d))
        rows.append(ids[ii])
        cols.append(ids[jj])
        wts.append(w)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    w = np.concatenate(wts)
    lo, hi = np.minimum(r, c), np.maximum(r, c)
    # arcs on a shared edge appear twice; keep the shorter copy
    key = lo * len(coords) + hi
    order = np.lexsort((w, key))
    key, lo, hi, w = key[order], lo[order], hi[order], w[order]
    first = np.concatenate([[True], key[1:] != key[:-1]])
    n = len(coords)
    graph = coo_matrix((w[first], (lo[first], hi[first])), shape=(n, n)).tocsr()
    return graph, coords


def graph_distances(mesh: DiscMesh, sources, rounds=2):
    """Distances in ``(D, g')`` from ``sources`` to every mesh vertex (rows follow sources)."""
    graph, _ = _steiner_graph(mesh, rounds)
    ncomp, labels = connected_components(graph, directed=False)
    V = len(mesh.vertices)
    if len(np.unique(labels[:V])) > 1:
        raise MeshError("mesh is disconnected")
    d = dijkstra(graph, directed=False, indices=np.asarray(sources))
    return d[:, :V]


def boundary_distances(mesh: DiscMesh, rounds=2):
    """Boundary distance matrix of ``(D, g')`` from the refined edge graph."""
    d = graph_distances(mesh, mesh.boundary, rounds)
    bd = d[:, mesh.boundary]
    return 0.5 * (bd + bd.T)


# --------------------------------------------------------------- surfaces


@dataclass
class DiscreteSurface:
    """Vertex values ``f(v)`` and the per-triangle derivative of the PL interpolant.

    ``derivs[t]`` has shape (N, 2): chart-coordinate derivative of the
    interpolant on triangle ``t``.
    """

    values: np.ndarray  # (V, N)
    derivs: np.ndarray  # (T, N, 2)

    @classmethod
    def from_values(cls, mesh: DiscMesh, values):
        values = np.asarray(values, dtype=float)
        P = mesh.vertices[mesh.triangles]
        M = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # (T, 2, 2) columns
        Minv = np.linalg.inv(M)
        F = values[mesh.triangles]  # (T, 3, N)
        dF = np.stack([F[:, 1] - F[:, 0], F[:, 2] - F[:, 0]], axis=2)  # (T, N, 2)
        return cls(values, dF @ Minv)

    def barycentric(self, mesh: DiscMesh):
        return self.values[mesh.triangles].mean(axis=1)


def embed_vertices(emb: EmbeddingField, mesh: DiscMesh):
    return np.array([emb.at_chart(z).phi for z in mesh.vertices])


def check_boundary_lipschitz(boundary_values, bd, slack=LIPSCHITZ_SLACK):
    """Raise LipschitzError naming the worst pair when ``|f(y) - f(y')| > bd(y, y')``."""
    bv = np.asarray(boundary_values)
    worst, pair = -np.inf, None
    for i in range(len(bv)):
        gap = np.abs(bv[i] - bv).max(axis=1) - bd[i]
        j = int(np.argmax(gap))
        if gap[j] > worst:
            worst, pair = float(gap[j]), (i, j)
    if worst > slack:
        raise LipschitzError(
            f"boundary data not 1-Lipschitz: pair {pair} exceeds bd by {worst:.3e}"
        )
    return worst


def lipschitz_extension(mesh: DiscMesh, boundary_values, bd=None, dist=None, R=None, rounds=2):
    """``f(x)(s) = min_y (f(y)(s) + d'(x, y))`` over boundary vertices ``y``, then the cutoff.

    ``dist`` (boundary x vertices) and ``bd`` are computed when omitted.
    Returns the surface and the per-edge Lipschitz slack certificate.
    """
    if dist is None:
        dist = graph_distances(mesh, mesh.boundary, rounds)
    if bd is None:
        bd = dist[:, mesh.boundary]
        bd = 0.5 * (bd + bd.T)
    bv = np.asarray(boundary_values, dtype=float)
    check_boundary_lipschitz(bv, bd)
    vals = np.full((len(mesh.vertices), bv.shape[1]), np.inf)
    for i in range(len(bv)):
        np.minimum(vals, bv[i][None, :] + dist[i][:, None], out=vals)
    vals[mesh.boundary] = bv
    if R is not None:
        vals = np.clip(vals, -R / 2, R / 2)
    surf = DiscreteSurface.from_values(mesh, vals)
    cert = edge_lipschitz(mesh, vals)
    if cert > LIPSCHITZ_SLACK:
        raise LipschitzError(f"extension violates the per-edge Lipschitz bound by {cert:.3e}")
    return surf, cert


def edge_lengths(mesh: DiscMesh):
    """g'-length of each edge (shorter of the two adjacent triangle tensors)."""
    edges = mesh.edges()
    lengths = {}
    for t, g in zip(mesh.triangles, mesh.tensors):
        for p, q in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            d = mesh.vertices[q] - mesh.vertices[p]
            key = (min(p, q), max(p, q))
            L = math.sqrt(d @ g @ d)
            lengths[key] = min(L, lengths.get(key, np.inf))
    return edges, np.array([lengths[tuple(e)] for e in edges])


def edge_lipschitz(mesh: DiscMesh, values):
    """Largest ``|f(a) - f(b)|_inf - len(ab)`` over mesh edges."""
    edges, L = edge_lengths(mesh)
    gap = np.abs(values[edges[:, 0]] - values[edges[:, 1]]).max(axis=1)
    return float((gap - L).max())


# --------------------------------------------------------------- volumes


def riemannian_volume(mesh: DiscMesh):
    return float(mesh.chart_areas @ np.sqrt(np.linalg.det(mesh.tensors)))


def hyperbolic_disc_area(radius):
    return 2 * math.pi * (math.cosh(radius) - 1.0)


def _triangle_data(emb, mesh, surf, sigma):
    bary = surf.barycentric(mesh)
    out = []
    for t in range(len(mesh.triangles)):
        phi = BoundaryFunction(emb.grid, bary[t])
        try:
            out.append(compression(emb, phi, sigma))
        except ProjectionError as exc:
            raise ProjectionError(f"projection failed on triangle {t}: {exc}",
                                  exc.residual, exc.iterations) from exc
    return out


def surface_volume_G(emb: EmbeddingField, mesh: DiscMesh, surf: DiscreteSurface, data=None,
                     sigma=0.1):
    """``vol_G(f)``: per-triangle ``sqrt det(df^T G df)`` times chart area, summed."""
    if data is None:
        data = _triangle_data(emb, mesh, surf, sigma)
    return float(sum(
        math.sqrt(max(np.linalg.det(df.T @ (cd.pd.gamma[:, None] * df)), 0.0)) * a
        for df, cd, a in zip(surf.derivs, data, mesh.chart_areas)
    ))


def filling_report(emb: EmbeddingField, mesh_g: DiscMesh, mesh_gp: DiscMesh, sigma=0.1,
                   R=3.0, rounds=2, tol=MESH_TOL):
    """Run the rehearsal and collect the volume chain.

    ``mesh_g`` carries the reference metric ``g`` of ``D`` and ``mesh_gp``
    the competitor ``g'`` on the same triangulation.  Raises DominationError
    when ``bd_{g'} < bd_g`` somewhere on the boundary.
    """
    if mesh_g.vertices.shape != mesh_gp.vertices.shape or not np.array_equal(
        mesh_g.triangles, mesh_gp.triangles
    ):
        raise MeshError("g and g' must share the triangulation")
    bd_g = boundary_distances(mesh_g, rounds)
    dist = graph_distances(mesh_gp, mesh_gp.boundary, rounds)
    bd_gp = 0.5 * (dist[:, mesh_gp.boundary] + dist[:, mesh_gp.boundary].T)
    dom = float((bd_g - bd_gp).max())
    if dom > 1e-9 * max(1.0, float(bd_g.max())):
        i, j = np.unravel_index(np.argmax(bd_g - bd_gp), bd_g.shape)
        raise DominationError(
            f"g' does not dominate g on the boundary: bd' < bd by {dom:.3e} at pair ({i}, {j})"
        )
    phi_b = np.array([emb.at_chart(mesh_g.vertices[i]).phi for i in mesh_g.boundary])
    surf, cert = lipschitz_extension(mesh_gp, phi_b, bd=bd_gp, dist=dist, R=R)
    data = _triangle_data(emb, mesh_gp, surf, sigma)
    areas = mesh_gp.chart_areas
    volG = 0.0
    intJ = 0.0
    image = 0.0
    hmax = 0.0
    for df, cd, a in zip(surf.derivs, data, areas):
        gam = cd.pd.gamma
        vg = math.sqrt(max(np.linalg.det(df.T @ (gam[:, None] * df)), 0.0))
        volG += vg * a
        intJ += cd.J * vg * a
        image += abs(np.linalg.det(cd.L @ df)) * a
        hmax = max(hmax, cd.h)
    r_D = float(2 * np.arctanh(np.linalg.norm(mesh_g.vertices[mesh_g.boundary], axis=1).max()))
    # the disc is a hyperbolic ball when g is exact; otherwise use the mesh
    vol_D = hyperbolic_disc_area(r_D) if emb.exact else riemannian_volume(mesh_g)
    vol_Mp = riemannian_volume(mesh_gp)
    chain = {
        "vol_D_g": vol_D,
        "image_volume": image,
        "integral_J_P_sigma": intJ,
        "vol_G_extension": volG,
        "vol_M_prime": vol_Mp,
    }
    names = list(chain)
    links = {f"{names[k]} <= {names[k + 1]}": chain[names[k]] <= chain[names[k + 1]] * (1 + tol)
             for k in range(len(names) - 1)}
    return {
        "triangles": int(len(mesh_gp.triangles)),
        "vertices": int(len(mesh_gp.vertices)),
        "sigma": sigma,
        "mesh_tolerance": tol,
        "chain": chain,
        "links": links,
        "vol_D_mesh": riemannian_volume(mesh_g),
        "max_h": hmax,
        "lipschitz_certificate": cert,
        "domination_margin": -dom,
        "verdict": bool(vol_Mp >= vol_D * (1 - tol)),
        "equality_note": "per-triangle h is a heuristic stand-in for the isometry argument",
    }


def refinement_study(emb, metric=None, factor=None, sizes=(500, 1000, 2000), sigma=0.1, radius=0.6):
    """Reported volumes for a sequence of meshes; used to watch first-order convergence."""
    rows = []
    for T in sizes:
        mg = make_disc_mesh(radius, T, metric)
        mp = make_disc_mesh(radius, T, metric, factor)
        rep = filling_report(emb, mg, mp, sigma)
        rows.append({"triangles": rep["triangles"], **rep["chain"], "max_h": rep["max_h"]})
    return rows
