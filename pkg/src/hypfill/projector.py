"""Projection ``P`` from boundary functions back to the manifold, and its differential.

``P(phi)`` is the zero of the vector field
``W_phi(x) = sum_i w_i lambda_i exp(n (Phi_i(x) - phi_i)) grad Phi_i(x)``.
In the exact model ``W_phi = grad F_phi`` with ``F_phi(x) = -<x, B>`` and
``B = sum_i w_i exp(-n phi_i) b_i``, so ``P(phi)`` is ``B`` rescaled onto the
sheet.  That closed form is used as an oracle and as the starting point of
the perturbed solver.

Tangent vectors are frame components in the g-orthonormal frame at the
point in question.  Linear maps on boundary functions are ``(n, N)``
arrays acting on grid values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hyperboloid as hb
from .embedding import EmbeddingField
from .sphere import BoundaryFunction

MAX_NEWTON = 12
FD_JAC_STEP = 1e-4


class ProjectionError(RuntimeError):
    """The projection solver did not reach its residual tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _values(phi):
    return phi.values if isinstance(phi, BoundaryFunction) else np.asarray(phi, dtype=float)


def _weights_exp(n, Phi, phi):
    """``exp(n (Phi - phi))`` split into a scale and a bounded factor."""
    e = n * (Phi - phi)
    m = e.max()
    return m, np.exp(e - m)


def w_frame(emb: EmbeddingField, phi, z):
    """``W_phi`` at chart point ``z`` in frame components."""
    d = emb.at_chart(z)
    m, r = _weights_exp(emb.n, d.phi, _values(phi))
    return math.exp(m) * ((emb.grid.weights * d.lam * r) @ d.grad)


def w_field(emb: EmbeddingField, phi, x):
    """``W_phi(x)`` as a TangentVec."""
    x = hb.coords(x)
    z = hb.hyperboloid_to_disc(x)
    return hb.TangentVec(hb.HPoint(x), emb.frame_to_tangent(x, w_frame(emb, phi, z)))


def f_phi(emb: EmbeddingField, phi, x):
    """``F_phi(x) = sum_i w_i exp(-n phi_i) exp(Phi_i(x))`` (exact metric)."""
    d = emb.at(x)
    return float(emb.grid.weights @ np.exp(-emb.n * _values(phi) + d.phi))


def projection_closed_form(emb: EmbeddingField, phi):
    """Exact-model projection ``B / sqrt(-<B, B>)``."""
    v = _values(phi)
    sc = np.exp(-emb.n * (v - v.min()))
    B = (emb.grid.weights * sc) @ hb.ideal_null(emb.grid.nodes)
    return hb.renormalize(B / math.sqrt(-hb.mink_inner(B, B)))


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray  # hyperboloid coordinates
    iterations: int
    residual: float

    @property
    def z(self):
        return hb.hyperboloid_to_disc(self.point)


def _project_exact(emb, phi, tol, max_iter, x0=None):
    n = emb.n
    v = _values(phi)
    shift = v.min()
    B = (emb.grid.weights * np.exp(-n * (v - shift))) @ hb.ideal_null(emb.grid.nodes)
    x = hb.origin(n) if x0 is None else hb.coords(x0).copy()
    scale = math.exp(-n * shift)
    for it in range(max_iter + 1):
        F = -hb.mink_inner(x, B)
        grad = -B + F * x
        res = math.sqrt(max(hb.mink_inner(grad, grad), 0.0)) * scale
        if res <= tol or it == max_iter:
            break
        x = hb.exp_map(x, grad_step(x, B / F - x))
    if res > tol:
        # the residual is relative to exp(n min phi); accept round-off level
        rel = res / (abs(F) * scale)
        if rel > 1e-13:
            raise ProjectionError(f"exact projection stalled at residual {res:.3e}", res, it)
    return ProjectionResult(x, it, res)


def grad_step(x, v):
    """Project an ambient vector to the tangent space at ``x``."""
    return v + hb.mink_inner(x, v) * x


def _project_perturbed(emb, phi, tol, max_iter, x0=None):
    z = hb.hyperboloid_to_disc(projection_closed_form(emb, phi) if x0 is None else hb.coords(x0))
    W = w_frame(emb, phi, z)
    res = float(np.linalg.norm(W))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = FD_JAC_STEP
            J[:, j] = (w_frame(emb, phi, z + e) - W) / FD_JAC_STEP
        step = np.linalg.solve(J, -W)
        lam = 1.0
        while True:
            zt = z + lam * step
            if zt @ zt < 1.0:
                Wt = w_frame(emb, phi, zt)
                rt = float(np.linalg.norm(Wt))
                if rt < res or lam < 1e-3:
                    break
            lam *= 0.5
        z, W, res = zt, Wt, rt
    if res > tol:
        raise ProjectionError(
            f"perturbed projection did not converge: residual {res:.3e} after {it} steps",
            res, it,
        )
    return ProjectionResult(hb.disc_to_hyperboloid(z), it, res)


def project(emb: EmbeddingField, phi, tol=1e-10, max_iter=MAX_NEWTON, x0=None):
    """Zero of ``W_phi``; raises ProjectionError when the residual stays above ``tol``."""
    if emb.exact:
        return _project_exact(emb, phi, tol, max_iter, x0)
    return _project_perturbed(emb, phi, tol, max_iter, x0)


# --------------------------------------------------------------- differential


@dataclass(frozen=True, eq=False)
class ProjectionDifferential:
    """All first-order data of ``P`` at ``phi``.

    Attributes
    ----------
    phi : ndarray
        Grid values of the input.
    point : ndarray
        ``P(phi)`` on the hyperboloid.
    Phi, grad, lam : ndarray
        Embedding data at ``P(phi)``.
    rho, rho_bar : ndarray
        ``exp(n (Phi - phi))`` and its normalisation against ``mu_x``.
    gamma : ndarray
        Node weights of the scalar product ``G``.
    E, A, dP : ndarray
        ``E_phi`` (n, N), ``A_phi`` (n, n) and ``A^-1 E`` (n, N).
    """

    phi: np.ndarray
    point: np.ndarray
    Phi: np.ndarray
    grad: np.ndarray
    lam: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    rho_bar: np.ndarray
    gamma: np.ndarray
    E: np.ndarray
    A: np.ndarray
    dP: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    @property
    def n(self):
        return self.grad.shape[1]

    @property
    def z(self):
        return hb.hyperboloid_to_disc(self.point)

    def G(self, a, b):
        return float(np.sum(self.gamma * _values(a) * _values(b)))

    def d_phi(self, v):
        """``dPhi(v)`` as grid values, for a frame vector ``v``."""
        return self.grad @ np.asarray(v, dtype=float)

    def deficiency(self, delta):
        """``|| delta - dPhi(E delta) ||`` in the Haar L^2 norm."""
        d = _values(delta)
        r = d - self.d_phi(self.E @ d)
        return float(np.sqrt(self.weights @ (r * r)))

    def jacobian_G(self, L):
        """``sqrt det(L G^-1 L^T)`` for a linear map ``L`` (n, N) on grid values."""
        M = (L / self.gamma) @ L.T
        return float(math.sqrt(max(np.linalg.det(M), 0.0)))

    def jacobian_Y(self, L, Y):
        """``|det(L Y)| / sqrt(det Gram_G(Y))`` for ``Y`` of shape (N, n)."""
        gram = Y.T @ (self.gamma[:, None] * Y)
        dg = np.linalg.det(gram)
        if dg <= 0:
            return 0.0
        return float(abs(np.linalg.det(L @ Y)) / math.sqrt(dg))

    def op_norm_G(self, L):
        """Operator norm of ``L`` from (grid values, G) to the tangent space."""
        M = (L / self.gamma) @ L.T
        return float(math.sqrt(max(np.linalg.eigvalsh(M).max(), 0.0)))

    @property
    def JG(self):
        return self.jacobian_G(self.dP)

    @property
    def JE(self):
        return self.jacobian_G(self.E)


def differential(emb: EmbeddingField, phi, result: ProjectionResult | None = None, a_xs=None):
    """Assemble ``rho``, ``G``, ``E``, ``A`` and ``dP`` at ``phi``."""
    v = _values(phi)
    if result is None:
        result = project(emb, phi)
    d = emb.at(result.point)
    n = emb.n
    w = emb.grid.weights
    m, r = _weights_exp(n, d.phi, v)
    mass = w @ (d.lam * r)
    rho_bar = r / mass
    rho = np.exp(n * (d.phi - v))
    gamma = n * w * d.lam * rho_bar
    E = (gamma[:, None] * d.grad).T
    if a_xs is None:
        a_xs = emb.a_xs_all(result.point)
    A = np.einsum("i,ijk->jk", w * d.lam * rho_bar, a_xs)
    dP = np.linalg.solve(A, E)
    return ProjectionDifferential(
        v, result.point, d.phi, d.grad, d.lam, w, rho, rho_bar, gamma, E, A, dP,
        result.iterations, result.residual,
    )


# thin functional wrappers


def metric_G(emb, phi):
    return differential(emb, phi).gamma


def e_map(emb, phi):
    return differential(emb, phi).E


def a_xs(emb, x, s):
    """``A_{x,s}`` for a grid node ``s``."""
    i = int(np.argmax(emb.grid.nodes @ np.asarray(s, dtype=float)))
    return emb.a_xs_all(x)[i]


def a_phi(emb, phi):
    return differential(emb, phi).A


def dP(emb, phi):
    return differential(emb, phi).dP


def jacobian_JG(emb, phi):
    return differential(emb, phi).JG


def jacobian_JY(emb, phi, Y):
    Y = np.column_stack([_values(y) for y in Y])
    pd = differential(emb, phi)
    return pd.jacobian_Y(pd.dP, Y)
