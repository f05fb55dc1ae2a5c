"""Exact hyperbolic geometry in the hyperboloid model.

Points of H^n live on the upper sheet ``<x, x> = -1, x[-1] > 0`` of Minkowski
space R^{n,1}; the Minkowski form is positive on the first n coordinates and
negative on the last one.  The origin is ``o = (0, ..., 0, 1)``.

An ideal point ``s`` is identified with the unit vector ``v_s`` at ``o`` that
starts the ray towards it, ``gamma_s(t) = (sinh t * v_s, cosh t)``.  With this
convention ``grad busemann0(s, o) = -v_s``.

Besides the hyperboloid formulas the module carries the Poincare-ball chart
used by the perturbed-metric code; conversions go both ways.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHEET_TOL = 1e-12


def mink_inner(a, b):
    """Minkowski product, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sum(a[..., :-1] * b[..., :-1], axis=-1) - a[..., -1] * b[..., -1]


def origin(n):
    o = np.zeros(n + 1)
    o[-1] = 1.0
    return o


def renormalize(x):
    """Put ``x`` back on the sheet by recomputing the timelike coordinate."""
    x = np.array(x, dtype=float)
    x[..., -1] = np.sqrt(1.0 + np.sum(x[..., :-1] ** 2, axis=-1))
    return x


@dataclass(frozen=True)
class HPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 3:
            raise ValueError("HPoint needs a flat (n+1)-vector with n >= 2")
        if abs(mink_inner(c, c) + 1.0) > 1e-9 or c[-1] < 1.0 - 1e-12:
            raise ValueError(f"not on the upper sheet: {c}")
        object.__setattr__(self, "coords", renormalize(c))

    @property
    def n(self):
        return self.coords.size - 1

    @classmethod
    def from_disc(cls, z):
        return cls(disc_to_hyperboloid(z))

    def disc(self):
        return hyperboloid_to_disc(self.coords)


@dataclass(frozen=True)
class TangentVec:
    base: HPoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        b = self.base.coords
        if v.shape != b.shape:
            raise ValueError("tangent vector and base point differ in dimension")
        scale = max(1.0, float(np.max(np.abs(v))))
        if abs(mink_inner(b, v)) > 1e-9 * scale * b[-1]:
            raise ValueError("vector is not tangent to the hyperboloid at its base")
        # drop the small normal component left by arithmetic
        v = v + mink_inner(b, v) * b
        object.__setattr__(self, "vec", v)

    def norm(self):
        return float(np.sqrt(max(mink_inner(self.vec, self.vec), 0.0)))


def coords(p):
    """Accept an HPoint, TangentVec or bare array and hand back coordinates."""
    if isinstance(p, HPoint):
        return p.coords
    if isinstance(p, TangentVec):
        return p.vec
    return np.asarray(p, dtype=float)


def point_from_direction(v, t):
    """The point ``exp_o(t v)`` for a unit spatial direction ``v``."""
    v = np.asarray(v, dtype=float)
    return np.append(np.sinh(t) * v, np.cosh(t))


def dist0(x, y):
    # 2 asinh(|x - y| / 2) keeps full precision for nearby points
    x, y = coords(x), coords(y)
    d = x - y
    return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(mink_inner(d, d), 0.0)))


def exp_map(x, v):
    """Exponential map at ``x`` of the tangent vector ``v``.

    ``exp_map(tv)`` with a TangentVec works as well as ``exp_map(x, v)``
    with arrays.
    """
    if isinstance(x, TangentVec):
        x, v = x.base.coords, x.vec
    x, v = coords(x), coords(v)
    nv = np.sqrt(np.maximum(mink_inner(v, v), 0.0))
    nv_ = np.asarray(nv)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        shoot = np.where(nv_ > 1e-15, np.sinh(nv_) / np.where(nv_ > 0, nv_, 1.0), 1.0)
    return renormalize(np.cosh(nv_) * x + shoot * v)


def log_map(x, y):
    """Tangent vector at ``x`` pointing to ``y`` with length ``dist0(x, y)``."""
    x, y = coords(x), coords(y)
    d = np.asarray(dist0(x, y))
    c = -np.asarray(mink_inner(x, y))
    u = y - c[..., None] * x
    nu = np.sqrt(np.maximum(mink_inner(u, u), 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(nu > 1e-300, d / np.where(nu > 0, nu, 1.0), 1.0)
    v = fac[..., None] * u
    return v + mink_inner(x, v)[..., None] * x


def homothety_At(t, x):
    """``exp_o(t * log_o(x))``: radial scaling by ``t`` about the origin."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("homothety parameter must lie in [0, 1]")
    x = coords(x)
    o = origin(x.shape[-1] - 1)
    return exp_map(o, t * log_map(o, x))


def ideal_null(s):
    """Null vector ``b_s = (v_s, 1)`` of the ideal point with direction ``s``."""
    s = np.asarray(s, dtype=float)
    return np.concatenate([s, np.ones(s.shape[:-1] + (1,))], axis=-1)


def busemann0(s, x):
    """Busemann function of the g0-ray from ``o`` towards ``s``, zero at ``o``."""
    x = coords(x)
    return np.log(-mink_inner(x, ideal_null(s)))


def busemann0_grad(s, x):
    """Ambient gradient ``x - b_s / beta`` (unit, tangent at ``x``)."""
    x = coords(x)
    b = ideal_null(s)
    beta = -mink_inner(x, b)
    return x - b / np.asarray(beta)[..., None]


def busemann0_hess(s, x, u, w):
    """Hessian ``D^2 Phi_s(u, w) = <u, w> - dPhi(u) dPhi(w)``."""
    grad = busemann0_grad(s, x)
    return mink_inner(u, w) - mink_inner(grad, u) * mink_inner(grad, w)


def ray_point(s, t):
    return point_from_direction(s, t)


def ray_velocity(s, t):
    s = np.asarray(s, dtype=float)
    return np.append(np.cosh(t) * s, np.sinh(t))


def busemann0_limit(s, x, T=20.0):
    """Truncated limit ``d(x, gamma_s(T)) - T``; an oracle for the closed form."""
    return dist0(x, ray_point(s, T)) - T


# ---------------------------------------------------------------- disc chart


def hyperboloid_to_disc(x):
    x = np.asarray(x, dtype=float)
    return x[..., :-1] / (1.0 + x[..., -1:])


def disc_to_hyperboloid(z):
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    d = 1.0 - r2
    if np.any(d <= 0):
        raise ValueError("point outside the unit ball")
    return np.concatenate([2.0 * z / d, (1.0 + r2) / d], axis=-1)


def disc_vector_to_hyperboloid(z, zdot):
    """Push a chart velocity at ``z`` to the hyperboloid."""
    z = np.asarray(z, dtype=float)
    zdot = np.asarray(zdot, dtype=float)
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    d = 1.0 - r2
    zz = np.sum(z * zdot, axis=-1, keepdims=True)
    spatial = 2.0 * zdot / d + 4.0 * z * zz / d**2
    time = 4.0 * zz / d**2
    return np.concatenate([spatial, time], axis=-1)


def hyperboloid_vector_to_disc(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    one = 1.0 + x[..., -1:]
    return v[..., :-1] / one - x[..., :-1] * v[..., -1:] / one**2


def disc_radius(r):
    """Chart radius of the hyperbolic ball of radius ``r`` about ``o``."""
    return np.tanh(0.5 * r)


def frame_scale(z):
    """g0-length of a chart unit vector at ``z``: ``2 / (1 - |z|^2)``."""
    z = np.asarray(z, dtype=float)
    return 2.0 / (1.0 - np.sum(z * z, axis=-1))


def busemann0_disc(v, z):
    """``log(|z - v|^2 / (1 - |z|^2))``; same function in ball coordinates."""
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.log(np.sum((z - v) ** 2, axis=-1) / (1.0 - np.sum(z * z, axis=-1)))


def busemann0_grad_frame(v, z):
    """Gradient of ``busemann0`` in the orthonormal frame ``(1 - |z|^2)/2 * d/dz_k``."""
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    d = 1.0 - np.sum(z * z, axis=-1, keepdims=True)
    diff = z - v
    return d * diff / np.sum(diff * diff, axis=-1, keepdims=True) + z


def ideal_point_of_ray(x, w):
    """Direction on S of the endpoint of the g0-ray from ``x`` with unit velocity ``w``."""
    nul = np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
    sp = nul[..., :-1]
    return sp / np.linalg.norm(sp, axis=-1, keepdims=True)
