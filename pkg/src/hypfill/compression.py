"""The compressed projection ``P_sigma(phi) = A_t(P(phi))``, ``t = 1 / (1 + sigma^3 h^2)``.

``h(phi)`` is the L^2 distance from ``phi`` to ``Phi(P(phi))`` and ``A_t``
the geodesic homothety of ratio ``t`` about o.  The homothety is the g0 one
in all cases; for perturbed metrics it only differs from the g-homothety
inside the bump, which changes the Jacobian at order ``eps * h^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hyperboloid as hb
from .embedding import EmbeddingField
from .projector import ProjectionDifferential, differential, project

SIGMA_CANDIDATES = (0.1, 0.05, 0.02, 0.01, 0.005)


class RadiusError(ValueError):
    """A point lies outside the radius where the shrinking estimate applies."""


def h_value(pd: ProjectionDifferential):
    r = pd.phi - pd.Phi
    return float(math.sqrt(pd.weights @ (r * r)))


def h(emb: EmbeddingField, phi):
    return h_value(differential(emb, phi))


def dh2_row(pd: ProjectionDifferential):
    """Row vector ``v`` with ``d h^2 (delta) = v . delta``."""
    r = pd.phi - pd.Phi
    wr = pd.weights * r
    return 2.0 * wr - 2.0 * pd.dP.T @ (wr @ pd.grad)


def dh2(pd: ProjectionDifferential, delta):
    return float(dh2_row(pd) @ np.asarray(getattr(delta, "values", delta), dtype=float))


# --------------------------------------------------------------- homothety


def homothety_chart(z, t):
    """``A_t`` in the disc chart."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z)
    if r == 0.0:
        return z.copy()
    return math.tanh(t * math.atanh(r)) * z / r


def homothety_chart_derivs(z, t):
    """Chart Jacobian of ``A_t`` at ``z`` and the chart vector ``d/dt A_t(z)``."""
    z = np.asarray(z, dtype=float)
    n = z.size
    r = np.linalg.norm(z)
    if r < 1e-14:
        return t * np.eye(n), np.zeros(n)
    a = math.atanh(r)
    u = z / r
    sech2 = 1.0 / math.cosh(t * a) ** 2
    radial = t * sech2 / (1.0 - r * r)
    tang = math.tanh(t * a) / r
    J = tang * np.eye(n) + (radial - tang) * np.outer(u, u)
    return J, a * sech2 * u


def shrink_factor(sigma, hh):
    return 1.0 / (1.0 + sigma * hh * hh)


def q_sigma(x, hh, sigma):
    """``Q_sigma(x, h) = A_{1/(1 + sigma h^2)}(x)``."""
    x = hb.coords(x)
    r = float(hb.dist0(hb.origin(x.size - 1), x))
    if r >= (4.0 * sigma) ** -0.5:
        raise RadiusError(f"dist(o, x) = {r:.3f} exceeds (4 sigma)^-1/2 = {(4 * sigma) ** -0.5:.3f}")
    return hb.homothety_At(shrink_factor(sigma, hh), x)


def jacobian_q_model(r, hh, sigma, n=2):
    """Euclidean comparison value for the Jacobian of ``Q_sigma``."""
    a = 1.0 + sigma * hh * hh
    return a ** -(n + 1) * math.sqrt(a * a + (2.0 * sigma * hh * r) ** 2)


def jacobian_q_bound(hh, sigma):
    return shrink_factor(sigma, hh)


def jacobian_q_hyperbolic(r, hh, sigma, n=2):
    """Closed-form Jacobian of ``Q_sigma`` at distance ``r`` from o in H^n."""
    t = shrink_factor(sigma, hh)
    radial = math.sqrt(t * t + (2.0 * sigma * hh * t * t * r) ** 2)
    tang = t if r < 1e-12 else math.sinh(t * r) / math.sinh(r)
    return radial * tang ** (n - 1)


def jacobian_q_numeric(x, hh, sigma, step=1e-6):
    """Central-difference Jacobian of ``(z, h) -> A_t(z)`` converted to g0 frames."""
    x = hb.coords(x)
    z = hb.hyperboloid_to_disc(x)
    n = z.size

    def f(zz, hv):
        return homothety_chart(zz, shrink_factor(sigma, hv))

    out = hb.hyperboloid_to_disc(q_sigma(x, hh, sigma))
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        cols.append((f(z + e, hh) - f(z - e, hh)) / (2 * step))
    J = np.column_stack(cols)
    Jh = (f(z, hh + step) - f(z, hh - step)) / (2 * step)
    s_in = hb.frame_scale(z)
    s_out = hb.frame_scale(out)
    L = np.column_stack([J * s_out / s_in, Jh * s_out])
    return float(math.sqrt(np.linalg.det(L @ L.T)))


# --------------------------------------------------------------- P_sigma


@dataclass(frozen=True, eq=False)
class CompressionData:
    sigma: float
    h: float
    t: float
    point: np.ndarray  # P_sigma(phi)
    L: np.ndarray  # d P_sigma in frames, (n, N)
    pd: ProjectionDifferential

    @property
    def J(self):
        return self.pd.jacobian_G(self.L)


def compression(emb: EmbeddingField, phi, sigma, pd: ProjectionDifferential | None = None):
    """``P_sigma(phi)`` and its differential.

    The differential chains ``dP``, ``dh^2`` and the chart derivatives of the
    homothety, ``d P_sigma = DA_t dP + (d/dt A_t) (-sigma^3 t^2 dh^2)``.
    """
    if pd is None:
        pd = differential(emb, phi)
    hv = h_value(pd)
    t = 1.0 / (1.0 + sigma**3 * hv * hv)
    z = pd.z
    zo = homothety_chart(z, t)
    Jc, dt_vec = homothety_chart_derivs(z, t)
    w_in = float(emb.metric.conformal_log(z)[0])
    w_out = float(emb.metric.conformal_log(zo)[0])
    DA = math.exp(w_out - w_in) * Jc
    dAt = math.exp(w_out) * dt_vec
    row = dh2_row(pd)
    L = DA @ pd.dP + np.outer(dAt, -(sigma**3) * t * t * row)
    return CompressionData(sigma, hv, t, hb.disc_to_hyperboloid(zo), L, pd)


def p_sigma(emb, phi, sigma):
    return compression(emb, phi, sigma).point


def jacobian_p_sigma(emb, phi, sigma):
    return compression(emb, phi, sigma).J


def jacobian_F(pd: ProjectionDifferential, c):
    """n-dimensional G-Jacobian of ``F_c(phi) = (P(phi), c h(phi))``."""
    hv = h_value(pd)
    n = pd.n
    if hv < 1e-14:
        return pd.JG
    row = c * dh2_row(pd) / (2.0 * hv)
    L = np.vstack([pd.dP, row[None, :]])
    M = (L / pd.gamma) @ L.T
    ev = np.sort(np.clip(np.linalg.eigvalsh(M), 0.0, None))[::-1]
    return float(math.sqrt(np.prod(ev[:n])))


def admissible_sigma(R1, candidates=SIGMA_CANDIDATES):
    """Largest candidate with ``(4 sigma)^-1/2 > R1``, or None."""
    ok = [s for s in candidates if (4.0 * s) ** -0.5 > R1]
    return max(ok) if ok else None


def projection_radius(emb, phis):
    """Largest ``dist(o, P(phi))`` over samples (the radius ``R1``)."""
    o = hb.origin(emb.n)
    return max(float(hb.dist0(o, project(emb, p).point)) for p in phis)
