"""Conformally perturbed hyperbolic metrics ``g = exp(2u) g0`` on H^2.

All tensor work happens in the Poincare-disc chart, where
``g = exp(2w) |dz|^2`` with ``w = u + log(2 / (1 - |z|^2))``.  The
perturbation ``u`` is one polynomial bump ``eps * (1 - (r/rho)^2)^3`` of the
g0-distance ``r`` to a centre point, extended by zero.  The exact metric is
the case ``bump is None`` and works in any dimension; perturbed metrics are
two-dimensional.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.integrate import solve_ivp

from . import hyperboloid as hb

MAX_AMPLITUDE = 0.2
BVP_STEP = 0.004


class GeodesicError(RuntimeError):
    """A geodesic solver failed to converge."""


@dataclass(frozen=True)
class ConformalBump:
    center: np.ndarray  # hyperboloid coordinates
    radius: float
    amplitude: float

    def __post_init__(self):
        c = hb.coords(self.center)
        object.__setattr__(self, "center", hb.renormalize(np.array(c, dtype=float)))
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        if abs(self.amplitude) > MAX_AMPLITUDE:
            raise ValueError(f"bump amplitude {self.amplitude} exceeds {MAX_AMPLITUDE}")

    @classmethod
    def at(cls, offset, angle, radius, amplitude):
        """Bump centred ``offset`` away from o in direction ``angle``."""
        c = hb.point_from_direction([math.cos(angle), math.sin(angle)], offset)
        return cls(c, radius, amplitude)

    def scaled(self, amplitude):
        return ConformalBump(self.center, self.radius, amplitude)

    @property
    def offset(self):
        return float(hb.dist0(self.center, hb.origin(self.center.size - 1)))


def default_bump(amplitude=0.05):
    return ConformalBump.at(0.3, 0.5, 1.0, amplitude)


# --------------------------------------------------------------- bump profile


def _acosh2_derivs(q):
    """``a(q) = arccosh(q)^2`` and its first two derivatives (smooth at q = 1)."""
    q = np.maximum(np.asarray(q, dtype=float), 1.0)
    y = np.arccosh(q)
    s = np.sqrt(q * q - 1.0)
    small = y < 1e-3
    ys = np.where(small, 1.0, y)
    ss = np.where(small, 1.0, s)
    a1 = np.where(small, 2.0 * (1.0 - y**2 / 6.0 + 7.0 * y**4 / 360.0), 2.0 * ys / ss)
    a2 = np.where(small, -2.0 / 3.0 + 4.0 * y**2 / 15.0, 2.0 / ss**2 - 2.0 * ys * q / ss**3)
    return y * y, a1, a2


def _cosh_dist_derivs(z, center):
    """``q(z) = cosh d0(z, c)`` with chart gradient and Hessian."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    cs, ct = center[:-1], center[-1]
    r2 = np.sum(z * z, axis=1)
    D = 1.0 - r2
    N = -2.0 * z @ cs + (1.0 + r2) * ct
    q = N / D
    gN = -2.0 * cs[None, :] + 2.0 * z * ct
    gD = -2.0 * z
    gq = (gN * D[:, None] - N[:, None] * gD) / D[:, None] ** 2
    n = z.shape[1]
    eye = np.eye(n)[None]
    hN = 2.0 * ct * eye
    hD = -2.0 * eye
    outer = gN[:, :, None] * gD[:, None, :]
    hq = (
        hN / D[:, None, None]
        - (outer + np.swapaxes(outer, 1, 2)) / D[:, None, None] ** 2
        - N[:, None, None] * hD / D[:, None, None] ** 2
        + 2.0 * N[:, None, None] * gD[:, :, None] * gD[:, None, :] / D[:, None, None] ** 3
    )
    return q, gq, hq


def bump_derivs(bump, z):
    """Chart value, gradient and Hessian of ``u`` at points ``z`` (shape (M, 2))."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    M, n = z.shape
    if bump is None or bump.amplitude == 0.0:
        return np.zeros(M), np.zeros((M, n)), np.zeros((M, n, n))
    q, gq, hq = _cosh_dist_derivs(z, bump.center)
    a, a1, a2 = _acosh2_derivs(q)
    rho2 = bump.radius**2
    inside = a < rho2
    m = np.where(inside, 1.0 - a / rho2, 0.0)
    eps = bump.amplitude
    F = eps * m**3
    F1 = np.where(inside, -3.0 * eps / rho2 * m**2, 0.0)
    F2 = np.where(inside, 6.0 * eps / rho2**2 * m, 0.0)
    grad = (F1 * a1)[:, None] * gq
    outer = gq[:, :, None] * gq[:, None, :]
    hess = (F2 * a1**2 + F1 * a2)[:, None, None] * outer + (F1 * a1)[:, None, None] * hq
    return F, grad, hess


# --------------------------------------------------------------- numba kernels


@numba.njit(cache=True)
def _u_grad2(z0, z1, cs0, cs1, ct, rho2, eps):
    r2 = z0 * z0 + z1 * z1
    D = 1.0 - r2
    N = -2.0 * (z0 * cs0 + z1 * cs1) + (1.0 + r2) * ct
    q = N / D
    if q < 1.0:
        q = 1.0
    y = math.acosh(q)
    a = y * y
    if a >= rho2:
        return 0.0, 0.0
    if y < 1e-3:
        a1 = 2.0 * (1.0 - y * y / 6.0)
    else:
        a1 = 2.0 * y / math.sqrt(q * q - 1.0)
    m = 1.0 - a / rho2
    F1 = -3.0 * eps / rho2 * m * m
    g0 = ((-2.0 * cs0 + 2.0 * z0 * ct) * D + N * 2.0 * z0) / (D * D)
    g1 = ((-2.0 * cs1 + 2.0 * z1 * ct) * D + N * 2.0 * z1) / (D * D)
    return F1 * a1 * g0, F1 * a1 * g1


@numba.njit(cache=True)
def _u_val2(z0, z1, cs0, cs1, ct, rho2, eps):
    r2 = z0 * z0 + z1 * z1
    D = 1.0 - r2
    q = (-2.0 * (z0 * cs0 + z1 * cs1) + (1.0 + r2) * ct) / D
    if q < 1.0:
        q = 1.0
    a = math.acosh(q) ** 2
    if a >= rho2:
        return 0.0
    m = 1.0 - a / rho2
    return eps * m * m * m


@numba.njit(cache=True)
def _geo_rhs(s, cs0, cs1, ct, rho2, eps, out):
    z0, z1, v0, v1 = s[0], s[1], s[2], s[3]
    ug0, ug1 = _u_grad2(z0, z1, cs0, cs1, ct, rho2, eps)
    D = 1.0 - z0 * z0 - z1 * z1
    w0 = ug0 + 2.0 * z0 / D
    w1 = ug1 + 2.0 * z1 / D
    wv = w0 * v0 + w1 * v1
    vv = v0 * v0 + v1 * v1
    out[0] = v0
    out[1] = v1
    out[2] = -2.0 * wv * v0 + vv * w0
    out[3] = -2.0 * wv * v1 + vv * w1


@numba.njit(cache=True)
def _minus_inner_c(x0, x1, xt, cs0, cs1, ct):
    return -(x0 * cs0 + x1 * cs1 - xt * ct)


@numba.njit(cache=True)
def _rk4_step(s, h, cs0, cs1, ct, rho2, eps, out, k1, k2, k3, k4, tmp):
    _geo_rhs(s, cs0, cs1, ct, rho2, eps, k1)
    for i in range(4):
        tmp[i] = s[i] + 0.5 * h * k1[i]
    _geo_rhs(tmp, cs0, cs1, ct, rho2, eps, k2)
    for i in range(4):
        tmp[i] = s[i] + 0.5 * h * k2[i]
    _geo_rhs(tmp, cs0, cs1, ct, rho2, eps, k3)
    for i in range(4):
        tmp[i] = s[i] + h * k3[i]
    _geo_rhs(tmp, cs0, cs1, ct, rho2, eps, k4)
    for i in range(4):
        out[i] = s[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0


@numba.njit(cache=True)
def _q_chart(s, cs0, cs1, ct):
    """``cosh d0(z, c)`` and its derivative along the chart velocity."""
    z0, z1 = s[0], s[1]
    r2 = z0 * z0 + z1 * z1
    D = 1.0 - r2
    N = -2.0 * (z0 * cs0 + z1 * cs1) + (1.0 + r2) * ct
    g0 = ((-2.0 * cs0 + 2.0 * z0 * ct) * D + N * 2.0 * z0) / (D * D)
    g1 = ((-2.0 * cs1 + 2.0 * z1 * ct) * D + N * 2.0 * z1) / (D * D)
    return N / D, g0 * s[2] + g1 * s[3]


@numba.njit(cache=True, parallel=True)
def _fan_kernel(z, dirs, cs0, cs1, ct, rho, eps, dt, max_steps):
    """Shoot g-geodesic rays from chart point ``z`` with unit frame directions.

    Each ray is followed in closed form while it stays outside the support
    ball, and by RK4 in the chart while inside.  The last step is shortened
    so that it ends on the support boundary, which keeps the result a smooth
    function of the initial data.  Returns the ideal endpoint angle of each
    ray and the Busemann value ``length - log(N_t)`` with ``N = X + W`` the
    null vector of the exit state.
    """
    K = dirs.shape[0]
    theta = np.empty(K)
    raw = np.empty(K)
    hit = np.zeros(K, dtype=np.bool_)
    rho2 = rho * rho
    coshK = math.cosh(rho)
    z0, z1 = z[0], z[1]
    r2 = z0 * z0 + z1 * z1
    D = 1.0 - r2
    X0 = 2.0 * z0 / D
    X1 = 2.0 * z1 / D
    Xt = (1.0 + r2) / D
    u_here = _u_val2(z0, z1, cs0, cs1, ct, rho2, eps)
    for k in numba.prange(K):
        s = np.empty(4)
        nxt = np.empty(4)
        k1 = np.empty(4)
        k2 = np.empty(4)
        k3 = np.empty(4)
        k4 = np.empty(4)
        tmp = np.empty(4)
        # g0-unit chart velocity and its hyperboloid image
        f0 = dirs[k, 0] * D / 2.0
        f1 = dirs[k, 1] * D / 2.0
        zz = z0 * f0 + z1 * f1
        W0 = 2.0 * f0 / D + 4.0 * z0 * zz / (D * D)
        W1 = 2.0 * f1 / D + 4.0 * z1 * zz / (D * D)
        Wt = 4.0 * zz / (D * D)
        Y0, Y1, Yt = X0, X1, Xt
        V0, V1, Vt = W0, W1, Wt
        T = 0.0
        enter = False
        a = _minus_inner_c(X0, X1, Xt, cs0, cs1, ct)
        b = _minus_inner_c(W0, W1, Wt, cs0, cs1, ct)
        if eps != 0.0:
            if a < coshK:
                enter = True
            elif b < 0.0:
                fmin2 = a * a - b * b
                if fmin2 < coshK * coshK:
                    # g0 chord through the ball; skip chords shorter than a step
                    A = 0.5 * (a + b)
                    sq = math.sqrt(coshK * coshK - fmin2)
                    t0 = math.log((coshK - sq) / (2.0 * A))
                    t1 = math.log((coshK + sq) / (2.0 * A))
                    if t1 - t0 > 2.0 * dt:
                        ch = math.cosh(t0)
                        sh = math.sinh(t0)
                        Y0 = ch * X0 + sh * W0
                        Y1 = ch * X1 + sh * W1
                        Yt = ch * Xt + sh * Wt
                        V0 = sh * X0 + ch * W0
                        V1 = sh * X1 + ch * W1
                        Vt = sh * Xt + ch * Wt
                        T = t0
                        enter = True
        if enter:
            hit[k] = True
            # to the chart; speed 1 in g
            one = 1.0 + Yt
            s[0] = Y0 / one
            s[1] = Y1 / one
            ue = u_here if T == 0.0 else 0.0
            sc = math.exp(-ue)
            s[2] = (V0 / one - Y0 * Vt / (one * one)) * sc
            s[3] = (V1 / one - Y1 * Vt / (one * one)) * sc
            steps = 0
            while steps < max_steps:
                _rk4_step(s, dt, cs0, cs1, ct, rho2, eps, nxt, k1, k2, k3, k4, tmp)
                q, _ = _q_chart(nxt, cs0, cs1, ct)
                if q >= coshK:
                    # land on the boundary: Newton on the step length
                    q0, dq0 = _q_chart(s, cs0, cs1, ct)
                    tau = dt * (coshK - q0) / (q - q0)
                    for _ in range(20):
                        _rk4_step(s, tau, cs0, cs1, ct, rho2, eps, nxt, k1, k2, k3, k4, tmp)
                        qt, dqt = _q_chart(nxt, cs0, cs1, ct)
                        dtau = (qt - coshK) / dqt
                        tau -= dtau
                        if abs(dtau) < 1e-15:
                            break
                    _rk4_step(s, tau, cs0, cs1, ct, rho2, eps, nxt, k1, k2, k3, k4, tmp)
                    T += tau
                    for i in range(4):
                        s[i] = nxt[i]
                    break
                for i in range(4):
                    s[i] = nxt[i]
                T += dt
                steps += 1
            zr2 = s[0] * s[0] + s[1] * s[1]
            Dz = 1.0 - zr2
            Y0 = 2.0 * s[0] / Dz
            Y1 = 2.0 * s[1] / Dz
            Yt = (1.0 + zr2) / Dz
            zz = s[0] * s[2] + s[1] * s[3]
            V0 = 2.0 * s[2] / Dz + 4.0 * s[0] * zz / (Dz * Dz)
            V1 = 2.0 * s[3] / Dz + 4.0 * s[1] * zz / (Dz * Dz)
            Vt = 4.0 * zz / (Dz * Dz)
            # tangent + unit again (u = 0 on the boundary)
            ip = Y0 * V0 + Y1 * V1 - Yt * Vt
            V0 += ip * Y0
            V1 += ip * Y1
            Vt += ip * Yt
            nv = math.sqrt(V0 * V0 + V1 * V1 - Vt * Vt)
            V0 /= nv
            V1 /= nv
            Vt /= nv
        N0 = Y0 + V0
        N1 = Y1 + V1
        Nt = Yt + Vt
        theta[k] = math.atan2(N1, N0)
        raw[k] = T - math.log(Nt)
    return theta, raw, hit


@numba.njit(cache=True)
def _integrate(s0, L, steps, cs0, cs1, ct, rho2, eps, record):
    """Fixed-step RK4 over parameter length ``L``; optionally keep every state."""
    s = s0.copy()
    nxt = np.empty(4)
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    h = L / steps
    path = np.empty((steps + 1 if record else 1, 4))
    path[0] = s
    for i in range(steps):
        _rk4_step(s, h, cs0, cs1, ct, rho2, eps, nxt, k1, k2, k3, k4, tmp)
        for j in range(4):
            s[j] = nxt[j]
        if record:
            path[i + 1] = s
    if not record:
        path[0] = s
    return path


# --------------------------------------------------------------- metric field


@dataclass(frozen=True, eq=False)
class MetricField:
    n: int = 2
    R: float = 3.0
    bump: ConformalBump | None = None
    dt: float = 0.01

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("only n = 2 or 3 supported")
        if self.bump is not None:
            if self.n != 2:
                raise ValueError("perturbed metrics are two-dimensional")
            if self.bump.offset + self.bump.radius >= self.R / 2:
                raise ValueError("bump support must lie inside B_o(R/2)")

    @property
    def exact(self):
        return self.bump is None or self.bump.amplitude == 0.0

    @property
    def amplitude(self):
        return 0.0 if self.bump is None else float(self.bump.amplitude)

    def with_amplitude(self, eps):
        bump = (self.bump or default_bump()).scaled(eps)
        return MetricField(self.n, self.R, bump, self.dt)

    def key(self):
        """Stable hash of the metric parameters (for caches and reports)."""
        if self.bump is None:
            desc = f"n={self.n};R={self.R!r};exact"
        else:
            b = self.bump
            desc = (
                f"n={self.n};R={self.R!r};c={tuple(map(repr, b.center))};"
                f"rho={b.radius!r};eps={b.amplitude!r};dt={self.dt!r}"
            )
        return hashlib.sha256(desc.encode()).hexdigest()[:16]

    # -- pointwise quantities in the chart

    def u(self, z):
        return bump_derivs(self.bump, z)[0]

    def conformal_log(self, z):
        """``w(z)`` with ``g = exp(2w)|dz|^2``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        u = self.u(z)
        return u + np.log(2.0 / (1.0 - np.sum(z * z, axis=1)))

    def _w_derivs(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        u, gu, hu = bump_derivs(self.bump, z)
        r2 = np.sum(z * z, axis=1)
        D = 1.0 - r2
        n = z.shape[1]
        w = u + np.log(2.0 / D)
        gw = gu + 2.0 * z / D[:, None]
        hw = hu + 2.0 * np.eye(n)[None] / D[:, None, None] + 4.0 * z[:, :, None] * z[:, None, :] / (
            D[:, None, None] ** 2
        )
        return w, gw, hw

    def metric_at(self, x):
        """Chart metric tensor at the point ``x``."""
        z = hb.hyperboloid_to_disc(hb.coords(x))
        w = self.conformal_log(z)[0]
        return np.exp(2 * w) * np.eye(self.n)

    def metric_chart(self, z):
        return np.exp(2 * self.conformal_log(z)[0]) * np.eye(self.n)

    def christoffel_chart(self, z):
        """``Gamma[k, i, j]`` in chart coordinates at the chart point ``z``."""
        _, gw, _ = self._w_derivs(z)
        gw = gw[0]
        n = self.n
        eye = np.eye(n)
        return (
            eye[:, :, None] * gw[None, None, :]
            + eye[:, None, :] * gw[None, :, None]
            - eye[None, :, :] * gw[:, None, None]
        )

    def christoffel(self, x):
        return self.christoffel_chart(hb.hyperboloid_to_disc(hb.coords(x)))

    def curvature_chart(self, z):
        if self.n != 2:
            return -np.ones(np.atleast_2d(z).shape[0])
        w, _, hw = self._w_derivs(z)
        return -np.exp(-2 * w) * np.trace(hw, axis1=1, axis2=2)

    def curvature_at(self, x):
        if self.n != 2:
            raise ValueError("curvature_at is implemented for n = 2")
        return float(self.curvature_chart(hb.hyperboloid_to_disc(hb.coords(x)))[0])

    def check_negative_curvature(self, samples=41):
        zs = sample_disc(hb.disc_radius(self.R / 2), samples)
        K = self.curvature_chart(zs)
        return float(K.max())

    def epsilon_norm(self, samples=61):
        """C^2 size of ``u`` in g0-orthonormal frames, max over a chart grid."""
        if self.exact:
            return 0.0
        zs = sample_disc(hb.disc_radius(self.R / 2), samples)
        u, gu, hu = bump_derivs(self.bump, zs)
        r2 = np.sum(zs * zs, axis=1)
        D = 1.0 - r2
        scale = D / 2.0
        gw0 = 2.0 * zs / D[:, None]
        # covariant g0-Hessian: d_ij u - Gamma0^k_ij d_k u
        n = self.n
        eye = np.eye(n)
        corr = (
            gw0[:, :, None] * gu[:, None, :]
            + gu[:, :, None] * gw0[:, None, :]
            - eye[None] * np.sum(gw0 * gu, axis=1)[:, None, None]
        )
        cov = (hu - corr) * scale[:, None, None] ** 2
        hnorm = np.max(np.abs(np.linalg.eigvalsh(cov)), axis=1)
        gnorm = np.linalg.norm(gu, axis=1) * scale
        return float(max(np.max(np.abs(u)), gnorm.max(), hnorm.max()))

    # -- geodesics

    def _bump_args(self):
        b = self.bump
        c = b.center
        return c[0], c[1], c[2], b.radius**2, b.amplitude

    def _rhs(self, t, y):
        if self.n == 2 and not self.exact:
            out = np.empty(4)
            _geo_rhs(y, *self._bump_args(), out)
            return out
        n = self.n
        z, v = y[:n], y[n:]
        _, gw, _ = self._w_derivs(z)
        gw = gw[0]
        acc = -2.0 * np.dot(gw, v) * v + np.dot(v, v) * gw
        return np.concatenate([v, acc])

    def speed(self, z, v):
        return float(np.exp(self.conformal_log(z)[0]) * np.linalg.norm(v))

    def geodesic_ivp_chart(self, z, v, T, rtol=1e-12, atol=1e-13, dense=False):
        y0 = np.concatenate([np.asarray(z, float), np.asarray(v, float)])
        sol = solve_ivp(
            self._rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=dense
        )
        if not sol.success:
            raise GeodesicError(sol.message)
        return sol

    def geodesic_ivp(self, x, v, T, samples=101):
        """Follow the g-geodesic from ``x`` with initial velocity ``v`` for time ``T``.

        Returns an array of hyperboloid points along the path (``samples`` of
        them, equally spaced in time) and the final velocity on the hyperboloid.
        """
        x = hb.coords(x)
        v = hb.coords(v)
        z = hb.hyperboloid_to_disc(x)
        zdot = hb.hyperboloid_vector_to_disc(x, v)
        # g0 -> g velocity keeps the g0 speed value as g speed scale
        sol = self.geodesic_ivp_chart(z, zdot * np.exp(-self.u(z)[0]), T, dense=True)
        ts = np.linspace(0.0, T, samples)
        ys = sol.sol(ts).T
        pts = hb.disc_to_hyperboloid(ys[:, : self.n])
        vel = hb.disc_vector_to_hyperboloid(ys[-1, : self.n], ys[-1, self.n :])
        return pts, vel

    def distance(self, x, y):
        if self.exact:
            return float(hb.dist0(x, y))
        return self.geodesic_bvp(x, y)[1]

    def shoot_chart(self, z, direction, L, record=False):
        """RK4 geodesic from chart point ``z`` with unit frame ``direction`` for g-length ``L``.

        Returns the final chart state ``(z, zdot)`` or, with ``record``, all
        intermediate states.
        """
        if self.exact or self.n != 2:
            raise ValueError("shoot_chart is for perturbed planar metrics")
        z = np.asarray(z, dtype=float)
        w = self.conformal_log(z)[0]
        s0 = np.concatenate([z, np.asarray(direction, dtype=float) * np.exp(-w)])
        steps = max(8, int(math.ceil(L / BVP_STEP)))
        path = _integrate(s0, float(L), steps, *self._bump_args(), record)
        return path if record else path[0]

    def bvp_direction(self, x, y, tol=1e-10, max_iter=30):
        """Initial unit frame direction and g-length of the geodesic from ``x`` to ``y``.

        Newton on (direction angle, length) with a finite-difference
        Jacobian, started from the g0 logarithm.
        """
        x = hb.coords(x)
        y = hb.coords(y)
        zx = hb.hyperboloid_to_disc(x)
        zy = hb.hyperboloid_to_disc(y)
        L = float(hb.dist0(x, y))
        v0 = hb.log_map(x, y)
        vchart = hb.hyperboloid_vector_to_disc(x, v0)
        if L < 1e-14:
            return np.array([1.0, 0.0]), 0.0
        ang = math.atan2(vchart[1], vchart[0])
        if self.exact:
            return np.array([math.cos(ang), math.sin(ang)]), L

        def shoot(p):
            return self.shoot_chart(zx, [math.cos(p[0]), math.sin(p[0])], p[1])[:2]

        def residual(zend):
            return float(hb.dist0(hb.disc_to_hyperboloid(zend), y))

        p = np.array([ang, L])
        h = 1e-7
        for _ in range(max_iter):
            zend = shoot(p)
            res = residual(zend)
            if res < tol:
                break
            r = zend - zy
            J = np.empty((2, 2))
            for j in range(2):
                dp = np.zeros(2)
                dp[j] = h
                J[:, j] = (shoot(p + dp) - zend) / h
            step = np.linalg.solve(J, -r)
            lam = 1.0
            while lam > 1e-4:
                trial = p + lam * step
                if trial[1] > 0 and residual(shoot(trial)) < res:
                    break
                lam *= 0.5
            p = p + lam * step
        else:
            raise GeodesicError(f"geodesic BVP did not converge (residual {res:.2e})")
        return np.array([math.cos(p[0]), math.sin(p[0])]), float(p[1])

    def geodesic_bvp(self, x, y, tol=1e-10, max_iter=30, samples=51):
        """Geodesic from ``x`` to ``y`` by shooting.  Returns (chart path, g-length)."""
        if self.n != 2 and not self.exact:
            raise ValueError("perturbed geodesics are two-dimensional")
        x = hb.coords(x)
        y = hb.coords(y)
        if self.exact:
            L = float(hb.dist0(x, y))
            v = hb.log_map(x, y)
            ts = np.linspace(0.0, 1.0, samples)
            path = hb.hyperboloid_to_disc(hb.exp_map(x, ts[:, None] * v[None, :]))
            return path, L
        d, L = self.bvp_direction(x, y, tol, max_iter)
        zx = hb.hyperboloid_to_disc(x)
        if L == 0.0:
            return np.array([zx, zx]), 0.0
        states = self.shoot_chart(zx, d, L, record=True)
        idx = np.linspace(0, len(states) - 1, samples).round().astype(int)
        return states[idx, :2], L

    # -- ray fans (used by the embedding)

    def fan(self, z, dirs):
        """Shoot unit-frame directions ``dirs`` (K, 2) from chart point ``z``.

        Returns (endpoint angle, raw Busemann value, hit-support flag) per ray.
        """
        z = np.asarray(z, dtype=float)
        dirs = np.ascontiguousarray(dirs, dtype=float)
        if self.exact:
            x = hb.disc_to_hyperboloid(z)
            w = hb.disc_vector_to_hyperboloid(
                np.broadcast_to(z, dirs.shape), dirs * (1 - z @ z) / 2.0
            )
            nul = x[None, :] + w
            return (
                np.arctan2(nul[:, 1], nul[:, 0]),
                -np.log(nul[:, -1]),
                np.zeros(len(dirs), dtype=bool),
            )
        b = self.bump
        c = b.center
        max_steps = int(4.0 * b.radius / self.dt) + 10
        return _fan_kernel(z, dirs, c[0], c[1], c[2], b.radius, b.amplitude, self.dt, max_steps)


def sample_disc(chart_radius, m):
    """Square lattice of chart points inside the given chart radius."""
    t = np.linspace(-chart_radius, chart_radius, m)
    zz = np.array(np.meshgrid(t, t)).reshape(2, -1).T
    return zz[np.sum(zz * zz, axis=1) <= chart_radius**2]
