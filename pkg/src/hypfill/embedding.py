"""Busemann embedding ``x -> (s -> Phi_s(x))`` for exact and perturbed metrics.

Per point ``x`` everything downstream needs three arrays over the sphere
grid: the values ``Phi_s(x)``, the unit gradients ``grad Phi_s(x)`` in the
g-orthonormal frame ``exp(-w) d/dz_k`` of the disc chart, and the density
``lambda(x, s)`` of the measure ``mu_x``.  The exact metric has closed forms
for all three.

For a perturbed metric the arrays come from a fan of g-geodesic rays shot
from ``x``.  Rays are labelled by ``theta0``, the endpoint they would have
under g0, and shot in the g0 gradient direction of that endpoint.  The true
endpoint is ``theta0 + c(theta0)`` with a small periodic correction ``c``,
which is resampled spectrally so that the arrays line up with the grid
nodes.  The Busemann value of a ray is its g-length to the exit of the
bump plus the g0 Busemann value at the exit point.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from . import hyperboloid as hb
from .metric import MetricField
from .sphere import BoundaryFunction, SphereGrid, make_grid

UPSAMPLE = 8
FD_STEP = 2.5e-3


@dataclass(frozen=True, eq=False)
class PointData:
    """Embedding data at one point; ``grad`` is in the g-orthonormal frame."""

    z: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    lam: np.ndarray
    w: float  # chart conformal log-factor at z
    correction: object = None  # _Correction for perturbed fans

    @property
    def x(self):
        return hb.disc_to_hyperboloid(self.z)


class _Correction:
    """Periodic endpoint correction ``c(theta0)`` and Busemann offset of a fan."""

    def __init__(self, theta0, c, dF):
        N = theta0.size
        M = UPSAMPLE * N
        fine = 2 * np.pi * np.arange(M + 1) / M
        ck = np.fft.rfft(c)
        fk = np.fft.rfft(dF)
        k = np.arange(ck.size)
        if N % 2 == 0:
            # split the Nyquist mode so that the interpolant stays real
            ck[-1] *= 0.5
            fk[-1] *= 0.5
        cf = np.fft.irfft(ck, M) * UPSAMPLE
        cpf = np.fft.irfft(1j * k * ck, M) * UPSAMPLE
        ff = np.fft.irfft(fk, M) * UPSAMPLE
        wrap = lambda a: np.append(a, a[0])
        self.c = CubicSpline(fine, wrap(cf), bc_type="periodic")
        self.cp = CubicSpline(fine, wrap(cpf), bc_type="periodic")
        self.dF = CubicSpline(fine, wrap(ff), bc_type="periodic")

    def invert(self, target, tol=1e-14, max_iter=30):
        """Solve ``t0 + c(t0) = target`` (mod 2 pi) by Newton."""
        t0 = np.mod(target - self.c(np.mod(target, 2 * np.pi)), 2 * np.pi)
        for _ in range(max_iter):
            r = t0 + self.c(t0) - target
            r = (r + np.pi) % (2 * np.pi) - np.pi
            step = r / (1.0 + self.cp(t0))
            t0 = np.mod(t0 - step, 2 * np.pi)
            if np.max(np.abs(step)) < tol:
                break
        return t0


def _unit_angles(theta):
    return np.column_stack([np.cos(theta), np.sin(theta)])


class EmbeddingField:
    """Busemann embedding into functions on a sphere grid.

    Parameters
    ----------
    metric : MetricField
    grid : SphereGrid, optional
        Defaults to the standard grid of the metric's dimension.
    cache_size : int
        Number of perturbed point evaluations kept in an LRU cache.
    """

    def __init__(self, metric: MetricField, grid: SphereGrid | None = None, cache_size=512):
        self.metric = metric
        self.grid = grid if grid is not None else make_grid(metric.n)
        if self.grid.n != metric.n:
            raise ValueError("grid and metric dimensions differ")
        if not metric.exact and self.grid.angles is None:
            raise ValueError("perturbed embedding needs an equispaced circle grid")
        self.n = metric.n
        self.R_horo = metric.R
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        self._raw_origin = None
        self.fan_count = 0
        if not metric.exact:
            self._raw_origin = self._fan_raw(np.zeros(2))[0]

    @property
    def exact(self):
        return self.metric.exact

    # -- point data

    def _exact_data(self, z):
        nodes = self.grid.nodes
        phi = hb.busemann0_disc(nodes, z[None, :])
        grad = hb.busemann0_grad_frame(nodes, z[None, :])
        lam = np.exp(-(self.n - 1) * phi)
        w = float(np.log(2.0 / (1.0 - z @ z)))
        return PointData(z, phi, grad, lam, w)

    def _fan_raw(self, z):
        """Fan from chart point ``z`` resampled onto the grid nodes (raw values)."""
        theta = self.grid.angles
        v0 = _unit_angles(theta)
        dirs = -hb.busemann0_grad_frame(v0, z[None, :])
        end, raw, hit = self.metric.fan(z, dirs)
        self.fan_count += 1
        F0 = hb.busemann0_disc(v0, z[None, :])
        if not np.any(hit):
            lam = np.exp(-F0)
            return raw, hb.busemann0_grad_frame(v0, z[None, :]), lam, None
        c = (end - theta + np.pi) % (2 * np.pi) - np.pi
        corr = _Correction(theta, c, raw - F0)
        t0 = corr.invert(theta)
        v = _unit_angles(t0)
        phi = hb.busemann0_disc(v, z[None, :]) + corr.dF(t0)
        grad = hb.busemann0_grad_frame(v, z[None, :])
        lam = np.exp(-hb.busemann0_disc(v, z[None, :])) / (1.0 + corr.cp(t0))
        return phi, grad, lam, corr

    def at_chart(self, z):
        z = np.asarray(z, dtype=float).copy()
        if z @ z >= 1.0:
            raise ValueError("point outside the chart")
        if self.exact:
            return self._exact_data(z)
        key = z.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        raw, grad, lam, corr = self._fan_raw(z)
        w = float(self.metric.conformal_log(z)[0])
        data = PointData(z, raw - self._raw_origin, grad, lam, w, corr)
        self._cache[key] = data
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return data

    def at(self, x):
        return self.at_chart(hb.hyperboloid_to_disc(hb.coords(x)))

    # -- public operations

    def phi_embed(self, x):
        return BoundaryFunction(self.grid, self.at(x).phi)

    def gradients(self, x):
        """Unit gradients of all ``Phi_s`` at ``x`` in the orthonormal frame, shape (N, n)."""
        return self.at(x).grad

    def frame_to_tangent(self, x, f):
        """Frame components at ``x`` to a hyperboloid tangent vector."""
        x = hb.coords(x)
        z = hb.hyperboloid_to_disc(x)
        w = float(self.metric.conformal_log(z)[0])
        return hb.disc_vector_to_hyperboloid(z, np.asarray(f) * np.exp(-w))

    def tangent_to_frame(self, x, v):
        x = hb.coords(x)
        z = hb.hyperboloid_to_disc(x)
        w = float(self.metric.conformal_log(z)[0])
        return hb.hyperboloid_vector_to_disc(x, hb.coords(v)) * np.exp(w)

    def alpha(self, v: hb.TangentVec):
        """Ideal point ``s`` whose Busemann gradient at the base is ``v``."""
        x = v.base.coords
        f = self.tangent_to_frame(x, v.vec)
        if abs(np.linalg.norm(f) - 1.0) > 1e-6:
            raise ValueError("alpha expects a unit vector for the metric")
        if self.exact:
            return hb.ideal_point_of_ray(x, -v.vec)
        z = hb.hyperboloid_to_disc(x)
        end, _, _ = self.metric.fan(z, -f[None, :] / np.linalg.norm(f))
        return _unit_angles(end)[0]

    def alpha_inv(self, x, s):
        """``grad Phi_s(x)`` as a TangentVec."""
        x = hb.coords(x)
        s = np.asarray(s, dtype=float)
        if self.exact:
            return hb.TangentVec(hb.HPoint(x), hb.busemann0_grad(s, x))
        z = hb.hyperboloid_to_disc(x)
        data = self.at_chart(z)
        if data.correction is None:
            g = hb.busemann0_grad_frame(s, z)
        else:
            t0 = data.correction.invert(np.array([math.atan2(s[1], s[0])]))
            g = hb.busemann0_grad_frame(_unit_angles(t0)[0], z)
        return hb.TangentVec(hb.HPoint(x), self.frame_to_tangent(x, g))

    def density_lambda(self, x, s=None, method="auto"):
        """Density of ``mu_x`` against the Haar measure.

        With ``s=None`` the whole grid is returned.  ``method="fd"`` (circle
        only) differentiates the angle of ``alpha_inv(x, .)`` spectrally over
        the grid instead of using the closed form or the fan.
        """
        if method == "fd":
            if self.n == 2:
                lam = self._lambda_spectral(x)
            else:
                lam = self._lambda_fd_sphere(x)
        else:
            lam = self.at(x).lam
        if s is None:
            return lam
        s = np.asarray(s, dtype=float)
        if self.exact and method != "fd":
            return float(np.exp(-(self.n - 1) * hb.busemann0(s, x)))
        i = int(np.argmax(self.grid.nodes @ s))
        if not np.allclose(self.grid.nodes[i], s, atol=1e-12):
            raise ValueError("s must be a grid node here")
        return float(lam[i])

    def _lambda_spectral(self, x):
        g = self.at(x).grad
        psi = np.unwrap(np.arctan2(g[:, 1], g[:, 0]))
        theta = self.grid.angles
        per = psi - theta
        N = theta.size
        k = np.fft.rfftfreq(N, 1.0 / N)
        ck = np.fft.rfft(per)
        if N % 2 == 0:
            ck[-1] = 0.0
        dper = np.fft.irfft(1j * k * ck, N)
        return np.abs(1.0 + dper)

    def _lambda_fd_sphere(self, x, h=1e-5):
        # Jacobian of s -> grad Phi_s(x) between unit spheres, exact metric only
        if not self.exact:
            raise ValueError("FD density on S^2 implemented for the exact metric")
        x = hb.coords(x)
        z = hb.hyperboloid_to_disc(x)
        out = np.empty(self.grid.size)
        for i, s in enumerate(self.grid.nodes):
            a = np.cross(s, [1.0, 0.0, 0.0] if abs(s[0]) < 0.9 else [0.0, 1.0, 0.0])
            a /= np.linalg.norm(a)
            b = np.cross(s, a)
            cols = []
            for e in (a, b):
                sp = (s + h * e) / np.linalg.norm(s + h * e)
                sm = (s - h * e) / np.linalg.norm(s - h * e)
                cols.append(
                    (hb.busemann0_grad_frame(sp, z) - hb.busemann0_grad_frame(sm, z)) / (2 * h)
                )
            J = np.column_stack(cols)
            out[i] = np.sqrt(np.linalg.det(J.T @ J))
        return out

    # -- derivatives of the gradient field (operator A_{x,s})

    def _stencil(self, z, h):
        offs = (-2, -1, 1, 2)
        coef = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * h)
        pts = {}
        for j in range(self.n):
            for o in offs:
                e = np.zeros(self.n)
                e[j] = o * h
                pts[(j, o)] = self.at_chart(z + e)
        return offs, coef, pts

    def covariant_data(self, x, h=FD_STEP):
        """Chart derivatives needed for ``A_{x,s}`` and the Laplacian, per node.

        Returns ``(nablaG, dl)``: ``nablaG[i, k, j]`` is the covariant
        derivative ``nabla_j (grad Phi_i)^k`` in chart components, ``dl[i, j]``
        the chart derivative of ``n Phi_i + log lambda_i``.
        """
        z = hb.hyperboloid_to_disc(hb.coords(x))
        base = self.at_chart(z)
        offs, coef, pts = self._stencil(z, h)
        n = self.n
        N = self.grid.size
        dG = np.zeros((N, n, n))
        dl = np.zeros((N, n))
        for j in range(n):
            for o, c in zip(offs, coef):
                d = pts[(j, o)]
                dG[:, :, j] += c * d.grad * np.exp(-d.w)
                dl[:, j] += c * (n * d.phi + np.log(d.lam))
        Gc = base.grad * np.exp(-base.w)
        gam = self.metric.christoffel_chart(z)
        nablaG = dG + np.einsum("kji,ni->nkj", gam, Gc)
        return nablaG, dl, Gc

    def a_xs_all(self, x, method="auto", h=FD_STEP):
        """``A_{x,s}`` for every grid node, frame components, shape (N, n, n)."""
        N, n = self.grid.size, self.n
        if method == "auto" and self.exact:
            return np.broadcast_to(np.eye(n), (N, n, n)).copy()
        nablaG, dl, Gc = self.covariant_data(x, h)
        return nablaG + Gc[:, :, None] * dl[:, None, :]

    def laplacian_phi(self, x, h=FD_STEP):
        """``Delta Phi_s(x)`` for all grid nodes by finite differences."""
        nablaG, _, _ = self.covariant_data(x, h)
        return np.trace(nablaG, axis1=1, axis2=2)

    # -- horosphere-distance oracle for the perturbed Busemann function

    def busemann_perturbed(self, s, x, tol=1e-8, normalize=True):
        """``Phi_s(x)`` as ``d_g(x, H_s) - R`` by geodesic shooting.

        ``H_s`` is the g0-horosphere ``{busemann0_s = -R}``.  The foot point
        is found by bounded scalar minimization over the horocycle parameter.
        Slow; meant as an independent check of the fan construction.
        Returns the value and the frame gradient at ``x``.
        """
        if self.n != 2:
            raise ValueError("horosphere oracle implemented for n = 2")
        s = np.asarray(s, dtype=float)
        s = s / np.linalg.norm(s)
        R = self.R_horo
        val, grad = self._horo_distance(s, hb.coords(x), R, tol)
        if normalize:
            val -= self._horo_distance(s, hb.origin(2), R, tol)[0]
        return val, grad

    def _horo_distance(self, s, x, R, tol):
        p = hb.ray_point(s, R)
        b = hb.ideal_null(s)
        beta = math.exp(-R)
        E = np.array([-s[1], s[0], 0.0])

        def foot(tau):
            return p + tau * E + tau * tau / (2.0 * beta) * b

        # g0 foot point: follow x's g0 gradient line towards s
        d0 = float(hb.busemann0(s, x)) + R
        y0 = hb.exp_map(x, -d0 * hb.busemann0_grad(s, x))
        tau0 = float(hb.mink_inner(y0, E))
        if self.metric.exact:
            return d0 - R, hb.busemann0_grad_frame(s, hb.hyperboloid_to_disc(x))

        def length(tau):
            return self.metric.bvp_direction(x, foot(tau))[1]

        width = 0.5 * math.exp(-R) * math.cosh(d0) + 0.05
        res = minimize_scalar(
            length, bounds=(tau0 - width, tau0 + width), method="bounded",
            options={"xatol": tol},
        )
        d, L = self.metric.bvp_direction(x, foot(res.x))
        return L - R, -d


def sample_points(rng, count, radius, n=2):
    """Points uniform in chart area within hyperbolic radius ``radius`` of o."""
    r = hb.disc_radius(radius)
    out = []
    while len(out) < count:
        z = rng.uniform(-r, r, size=n)
        if z @ z < r * r:
            out.append(hb.disc_to_hyperboloid(z))
    return np.array(out)
