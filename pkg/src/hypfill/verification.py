"""Property checks, sweeps and constant fits for the embedding/projection machinery.

Every check returns a ``CheckResult`` carrying the measured extremum, the
tolerance it was held to and the sample count, so reports never reduce to a
bare boolean.  Randomness flows from one ``numpy.random.Generator`` per
check, seeded from the sweep seed and the check name, which keeps each
check reproducible on its own.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import hyperboloid as hb
from .compression import (
    admissible_sigma,
    compression,
    h_value,
    jacobian_F,
    jacobian_q_bound,
    jacobian_q_hyperbolic,
    jacobian_q_model,
    jacobian_q_numeric,
)
from .embedding import EmbeddingField, sample_points
from .metric import MetricField, default_bump
from .projector import ProjectionError, differential, project
from .sphere import BoundaryFunction, make_grid


@dataclass
class SweepConfig:
    """Sample sizes, sampler settings and tolerances of a verification run."""

    seed: int = 7
    n: int = 2
    N: int = 720
    R: float = 3.0
    eps: float = 0.05
    eps_list: tuple = (0.02, 0.01, 0.005)
    eps_compress: float = 0.02
    amplitude: float = 0.5
    modes: int = 32
    sigma: float | None = None
    busemann_samples: int = 50
    pairs: int = 100
    lambda_points: int = 20
    lattice: int = 50
    isometry_samples: int = 100
    jacobian_samples: int = 1000
    deficiency_train: int = 500
    deficiency_heldout: int = 500
    scaling_samples: int = 16
    det_line_samples: int = 20
    mc_points: int = 10
    mc_normals: int = 10
    mc_points_perturbed: int = 2
    mc_normals_perturbed: int = 3
    compression_samples: int = 1000
    compression_perturbed: int = 40
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))

    def rng(self, name):
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])


TOLERANCES = {
    "busemann": 1e-6,
    "distance_exact": 1e-3,
    "distance_perturbed": 5e-3,
    "lambda": 1e-3,
    "lambda_mass": 1e-6,
    "unit_gradient_exact": 1e-10,
    "unit_gradient_perturbed": 1e-4,
    "projection_exact": 1e-8,
    "projection_perturbed": 1e-5,
    "newton_iterations": 12,
    "isometry": 1e-4,
    "jacobian_E": 1e-4,
    "a_identity": 1e-6,
    "slope_A": 0.2,
    "slope_det": 0.3,
    "det_line_point": 1e-5,
    "det_line_derivative": 1e-4,
    "trace": 1e-4,
    "mean_curvature": 1e-3,
    "laplacian_identity": 1e-3,
    "laplacian_exact": 1e-6,
    "liouville": 1e-3,
    "q_bound": 1e-6,
    "f_c_exact": 1e-4,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    extremum: float
    tolerance: float
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.extremum = float(self.extremum)
        self.tolerance = float(self.tolerance)
        self.samples = int(self.samples)

    def to_dict(self):
        d = asdict(self)
        d.pop("name")
        d["pass"] = d.pop("passed")
        return d


@dataclass
class FitResult:
    """One-sided constant ``c`` fitted on training ratios, validated on held-out ones."""

    constant: float
    margin: float
    train: int
    heldout: int
    violations: int

    @property
    def ok(self):
        return self.constant > 0 and self.margin > 0 and self.violations == 0


@dataclass
class EstimateReport:
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)

    def add(self, result: CheckResult):
        self.checks[result.name] = result

    def to_dict(self):
        return {
            "constants": self.constants,
            "slopes": self.slopes,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
        }


# --------------------------------------------------------------- fitting


class FitError(ValueError):
    """Too few samples to fit a constant."""


def fit_lower_constant(train, heldout, min_samples=10, quantile=5.0):
    """Fit ``c`` with ``ratio >= c`` from training ratios; report the held-out margin.

    ``c`` is half the smallest training ratio; the margin is the given
    percentile of ``heldout - c``.
    """
    train = np.asarray(train, dtype=float)
    heldout = np.asarray(heldout, dtype=float)
    if train.size < min_samples or heldout.size < min_samples:
        raise FitError("too few samples to fit a constant")
    c = 0.5 * float(train.min())
    diff = heldout - c
    return FitResult(c, float(np.percentile(diff, quantile)), train.size, heldout.size,
                     int(np.sum(diff < 0)))


def fit_upper_constant(ratios, min_samples=5):
    """Smallest ``C`` with ``value <= C * scale`` on the sample (the max ratio)."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size < min_samples:
        raise FitError("too few samples to fit a constant")
    return float(ratios.max())


def loglog_slope(x, y):
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def fit_constants(ratios_train, ratios_heldout):
    return fit_lower_constant(ratios_train, ratios_heldout)


# --------------------------------------------------------------- sampling


def _band_limited(rng, grid, amplitude, modes):
    """Random function with Fourier (or plane-wave) amplitudes decaying like k^-2."""
    if grid.n == 2:
        k = np.arange(1, modes + 1)
        a = rng.normal(size=modes) * amplitude * k**-2.0
        b = rng.normal(size=modes) * amplitude * k**-2.0
        th = grid.angles
        vals = a @ np.cos(np.outer(k, th)) + b @ np.sin(np.outer(k, th))
    else:
        vals = np.zeros(grid.size)
        for k in range(1, modes + 1):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            vals += amplitude * k**-2.0 * rng.normal() * np.cos(k * grid.nodes @ u + rng.uniform(0, 2 * np.pi))
    return vals + amplitude * rng.normal()


def unit_l2(grid, vals):
    return vals / math.sqrt(grid.weights @ (vals * vals))


def sample_phi(config: SweepConfig, kind, rng, emb: EmbeddingField, radius=1.2, t_max=0.5):
    """Random element of B.

    ``ball``: band-limited and clipped to ``|phi| <= R``.  ``near-surface``:
    ``Phi(x) + t delta`` for random ``x``, ``t`` and unit ``delta``.
    ``normal-perturbation``: as before with ``delta`` made G-orthogonal to
    the tangent space of ``Phi(M)`` at ``Phi(x)``.
    """
    grid = emb.grid
    if kind == "ball":
        vals = _band_limited(rng, grid, config.amplitude, config.modes)
        return BoundaryFunction(grid, np.clip(vals, -config.R, config.R))
    if kind not in ("near-surface", "normal-perturbation"):
        raise ValueError(f"unknown sample kind {kind!r}")
    x = sample_points(rng, 1, radius, emb.n)[0]
    delta = _band_limited(rng, grid, 1.0, config.modes)
    t = rng.uniform(0.0, t_max)
    base = emb.phi_embed(x)
    if kind == "normal-perturbation":
        delta = normal_part(emb, x, delta)
    delta = unit_l2(grid, delta)
    vals = np.clip(base.values + t * delta, -config.R, config.R)
    return BoundaryFunction(grid, vals)


def normal_part(emb, x, delta):
    """Remove the G-projection of ``delta`` onto ``dPhi(T_x M)`` at ``Phi(x)``."""
    d = emb.at(x)
    gamma = emb.n * emb.grid.weights * d.lam
    gram = d.grad.T @ (gamma[:, None] * d.grad)
    coef = np.linalg.solve(gram, d.grad.T @ (gamma * delta))
    out = delta - d.grad @ coef
    # one more pass removes round-off left by the first
    coef = np.linalg.solve(gram, d.grad.T @ (gamma * out))
    return out - d.grad @ coef


def random_unit(rng, n):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


# --------------------------------------------------------------- embedding checks


def check_busemann_closed_form(config: SweepConfig, count=None, T=20.0):
    """Closed-form Busemann function against its defining limit."""
    rng = config.rng("busemann")
    count = count or config.busemann_samples
    errs = []
    for _ in range(count):
        s = random_unit(rng, config.n)
        x = sample_points(rng, 1, config.R / 2, config.n)[0]
        errs.append(abs(float(hb.busemann0(s, x)) - float(hb.busemann0_limit(s, x, T))))
    tol = config.tolerances["busemann"]
    m = max(errs)
    return CheckResult("busemann_closed_form", m <= tol, m, tol, count, config.seed)


def check_special_embedding(emb: EmbeddingField, config: SweepConfig, count=20, grad_override=None):
    """Unit gradients (FD of the values against the frame gradients) and a bijective ``alpha_x``."""
    rng = config.rng("special")
    tol = config.tolerances["unit_gradient_exact" if emb.exact else "unit_gradient_perturbed"]
    worst = 0.0
    mono = True
    h = 1e-5
    for x in sample_points(rng, count, config.R / 2, emb.n):
        z = hb.hyperboloid_to_disc(x)
        d = emb.at_chart(z)
        grad = d.grad if grad_override is None else grad_override(d.grad)
        cols = []
        for j in range(emb.n):
            e = np.zeros(emb.n)
            e[j] = h
            cols.append((emb.at_chart(z + e).phi - emb.at_chart(z - e).phi) / (2 * h))
        fd = np.column_stack(cols) * math.exp(-d.w)
        worst = max(worst, float(np.abs(fd - grad).max()))
        norms = np.abs(np.linalg.norm(grad, axis=1) - 1.0).max()
        worst = max(worst, float(norms))
        if emb.n == 2:
            psi = np.arctan2(grad[:, 1], grad[:, 0])
            steps = (np.diff(np.append(psi, psi[0])) + np.pi) % (2 * np.pi) - np.pi
            # one positive turn, every step forward: s -> grad Phi_s is a bijection
            mono = mono and bool(np.all(steps > 0)) and abs(steps.sum() - 2 * np.pi) < 1e-9
    # FD truncation limits the exact-case comparison, so allow it explicitly
    fd_floor = 1e-8
    eff = max(tol, fd_floor)
    return CheckResult("special_embedding", worst <= eff and mono, worst, eff, count, config.seed,
                       {"alpha_bijective": bool(mono)})


def check_isometry(emb: EmbeddingField, config: SweepConfig, count=None, grad_override=None):
    """``G(dPhi v, dPhi v) = |v|^2`` at ``phi = Phi(x)`` and ``E o dPhi = I``."""
    rng = config.rng("isometry")
    count = count or config.isometry_samples
    worst = 0.0
    worst_e = 0.0
    pts = sample_points(rng, count, config.R / 2, emb.n)
    for x in pts:
        d = emb.at(x)
        grad = d.grad if grad_override is None else grad_override(d.grad)
        gamma = emb.n * emb.grid.weights * d.lam
        v = random_unit(rng, emb.n)
        dv = grad @ v
        worst = max(worst, abs(float(gamma @ (dv * dv)) - 1.0))
        E = (gamma[:, None] * grad).T
        worst_e = max(worst_e, float(np.abs(E @ grad - np.eye(emb.n)).max()))
    tol = config.tolerances["isometry"]
    return CheckResult("isometric_immersion", worst <= tol and worst_e <= 1e-6, worst, tol, count,
                       config.seed, {"E_dPhi_identity_error": worst_e})


def check_lambda(emb: EmbeddingField, config: SweepConfig, points=None, exponent=None):
    """Spectral-FD density against ``exp(-(n-1) Phi)``, plus positivity and unit mass."""
    rng = config.rng("lambda")
    points = points or config.lambda_points
    k = (emb.n - 1) if exponent is None else exponent
    worst = 0.0
    worst_mass = 0.0
    min_lam = np.inf
    for x in sample_points(rng, points, config.R / 2, emb.n):
        lam_fd = emb.density_lambda(x, method="fd")
        lam = emb.density_lambda(x)
        min_lam = min(min_lam, float(lam.min()))
        worst_mass = max(worst_mass, abs(float(emb.grid.weights @ lam) - 1.0))
        if emb.exact:
            ref = np.exp(-k * emb.at(x).phi)
            worst = max(worst, float(np.abs(lam_fd / ref - 1.0).max()))
        else:
            worst = max(worst, float(np.abs(lam_fd / lam - 1.0).max()))
    tol = config.tolerances["lambda"]
    ok = worst <= tol and worst_mass <= config.tolerances["lambda_mass"] and min_lam > 0
    return CheckResult("lambda_identity", ok, worst, tol, points * emb.grid.size, config.seed,
                       {"mass_error": worst_mass, "min_lambda": min_lam})


def check_distance_preservation(emb: EmbeddingField, config: SweepConfig, pairs=None):
    """``sup_s |Phi_s(x) - Phi_s(y)|`` against ``d_g(x, y)`` on random pairs."""
    rng = config.rng("distance")
    pairs = pairs or config.pairs
    worst = 0.0
    for _ in range(pairs):
        x, y = sample_points(rng, 2, config.R / 2, emb.n)
        gap = float(np.abs(emb.at(x).phi - emb.at(y).phi).max())
        d = emb.metric.distance(x, y)
        worst = max(worst, abs(gap - d))
    tol = config.tolerances["distance_exact" if emb.exact else "distance_perturbed"]
    return CheckResult("distance_preservation", worst <= tol, worst, tol, pairs, config.seed)


def lattice_points(count, radius, n=2):
    """Deterministic points: a Fibonacci-like spiral in the chart disc."""
    if n != 2:
        rng = np.random.default_rng(count)
        return sample_points(rng, count, radius, n)
    r = hb.disc_radius(radius)
    k = np.arange(count)
    rad = r * np.sqrt((k + 0.5) / count)
    ang = k * math.pi * (3.0 - math.sqrt(5.0))
    return hb.disc_to_hyperboloid(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))


def check_projection_identity(emb: EmbeddingField, config: SweepConfig, count=None):
    """``P(Phi(x)) = x`` on a lattice, with the Newton iteration count."""
    count = count or config.lattice
    worst = 0.0
    iters = 0
    for x in lattice_points(count, config.R / 2, emb.n):
        res = project(emb, emb.phi_embed(x))
        worst = max(worst, float(hb.dist0(res.point, x)))
        iters = max(iters, res.iterations)
    tol = config.tolerances["projection_exact" if emb.exact else "projection_perturbed"]
    ok = worst <= tol and iters <= config.tolerances["newton_iterations"]
    return CheckResult("projection_identity", ok, worst, tol, count, config.seed,
                       {"max_newton_iterations": iters})


# --------------------------------------------------------------- Jacobian sweeps


def jacobian_sweep(emb: EmbeddingField, config: SweepConfig, count=None, kinds=("ball",)):
    """Per-sample rows: h, J_G(E), G-norm of E, J_G P, det A, |A - I|, residual."""
    rng = config.rng("jacobian-sweep")
    count = count or config.jacobian_samples
    rows = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        phi = sample_phi(config, kind, rng, emb)
        pd = differential(emb, phi)
        rows.append({
            "sample": i,
            "kind": kind,
            "h": h_value(pd),
            "J_G": pd.JG,
            "J_E": pd.JE,
            "E_norm": pd.op_norm_G(pd.E),
            "detA": float(np.linalg.det(pd.A)),
            "A_minus_I": float(np.linalg.norm(pd.A - np.eye(emb.n), 2)),
            "residual": pd.residual,
            "radius": float(hb.dist0(hb.origin(emb.n), pd.point)),
        })
    return rows


def check_jacobian_E(rows, config: SweepConfig, n):
    tol = config.tolerances["jacobian_E"]
    jmax = max(r["J_E"] for r in rows)
    nmax = max(r["E_norm"] for r in rows)
    ok = jmax <= 1 + tol and nmax <= n + tol
    return CheckResult("jacobian_E", ok, jmax - 1.0, tol, len(rows), config.seed,
                       {"max_E_norm": nmax, "max_J_E": jmax})


def check_a_identity(rows, config: SweepConfig):
    tol = config.tolerances["a_identity"]
    a = max(r["A_minus_I"] for r in rows)
    d = max(abs(r["detA"] - 1.0) for r in rows)
    return CheckResult("a_identity", a <= tol and d <= tol, max(a, d), tol, len(rows), config.seed,
                       {"max_A_minus_I": a, "max_detA_minus_1": d})


def deficiency_ratios(emb: EmbeddingField, config: SweepConfig, count, stream):
    """Samples of ``(1 - J_{G,Y}(E)) / |delta - dPhi(E delta)|^2`` for G-unit ``delta`` in ``Y``."""
    rng = config.rng(stream)
    out = []
    n = emb.n
    kinds = ("ball", "near-surface")
    for i in range(count):
        phi = sample_phi(config, kinds[i % 2], rng, emb)
        pd = differential(emb, phi)
        tang = pd.grad
        mix = 10.0 ** rng.uniform(-2, 0)
        Y = tang @ rng.normal(size=(n, n)) + mix * np.column_stack(
            [unit_l2(emb.grid, _band_limited(rng, emb.grid, 1.0, config.modes)) for _ in range(n)]
        )
        coef = rng.normal(size=n)
        delta = Y @ coef
        delta /= math.sqrt(pd.G(delta, delta))
        d = pd.deficiency(delta)
        J = pd.jacobian_Y(pd.E, Y)
        if d > 1e-6:
            out.append((1.0 - J) / (d * d))
    return np.array(out)


def check_deficiency(emb: EmbeddingField, config: SweepConfig):
    train = deficiency_ratios(emb, config, config.deficiency_train, "deficiency-train")
    held = deficiency_ratios(emb, config, config.deficiency_heldout, "deficiency-heldout")
    fit = fit_lower_constant(train, held)
    return fit, CheckResult("quadratic_deficiency", fit.constant > 0 and fit.margin > 0,
                            fit.margin, 0.0, fit.train + fit.heldout, config.seed,
                            {"c0": fit.constant, "train": fit.train, "heldout": fit.heldout,
                             "heldout_violations": fit.violations})


def check_j_y_le_jg(emb: EmbeddingField, config: SweepConfig, count=100):
    """``J_Y(dP) <= J_G P`` for random subspaces ``Y``."""
    rng = config.rng("jy")
    phi = sample_phi(config, "ball", rng, emb)
    pd = differential(emb, phi)
    worst = -np.inf
    for _ in range(count):
        Y = rng.normal(size=(emb.grid.size, emb.n))
        worst = max(worst, pd.jacobian_Y(pd.dP, Y) - pd.JG)
    return CheckResult("jy_below_jg", worst <= 1e-12, worst, 1e-12, count, config.seed)


def perturbation_scaling(config: SweepConfig, eps_list=None, samples=None, base_metric=None):
    """Max ``|A - I|`` and ``|det A - 1|`` over a fixed set of phi for each eps; log-log slopes."""
    eps_list = tuple(eps_list or config.eps_list)
    samples = samples or config.scaling_samples
    grid = make_grid(config.n, config.N)
    rng = config.rng("scaling")
    exact = EmbeddingField(MetricField(config.n, config.R), grid)
    phis = [sample_phi(config, "ball", rng, exact) for _ in range(samples)]
    table = []
    for eps in eps_list:
        metric = (base_metric or MetricField(2, config.R, default_bump())).with_amplitude(eps)
        emb = EmbeddingField(metric, grid)
        amax = dmax = tmax = 0.0
        ca = cd = 0.0
        for phi in phis:
            pd = differential(emb, phi)
            hv = h_value(pd)
            a = float(np.linalg.norm(pd.A - np.eye(2), 2))
            d = abs(float(np.linalg.det(pd.A)) - 1.0)
            amax, dmax = max(amax, a), max(dmax, d)
            tmax = max(tmax, abs(float(np.trace(pd.A)) - 2.0))
            if hv > 1e-3:
                ca = max(ca, a / (eps * hv))
                cd = max(cd, d / (eps * eps * hv * hv))
        table.append({"eps": eps, "max_A_minus_I": amax, "max_detA_minus_1": dmax,
                      "max_trace_error": tmax, "C_A": ca, "C_det": cd,
                      "epsilon_norm": metric.epsilon_norm()})
    eps_arr = np.array([r["eps"] for r in table])
    slope_a = loglog_slope(eps_arr, [r["max_A_minus_I"] for r in table])
    slope_d = loglog_slope(eps_arr, [r["max_detA_minus_1"] for r in table])
    return table, slope_a, slope_d


def check_scaling(config: SweepConfig, **kw):
    table, sa, sd = perturbation_scaling(config, **kw)
    ta, td = config.tolerances["slope_A"], config.tolerances["slope_det"]
    ok = abs(sa - 1.0) <= ta and abs(sd - 2.0) <= td
    return table, CheckResult("perturbation_scaling", ok, max(abs(sa - 1.0), abs(sd - 2.0)),
                              ta, len(table) * (kw.get("samples") or config.scaling_samples),
                              config.seed, {"slope_A": sa, "slope_det": sd,
                                            "C_A": max(r["C_A"] for r in table),
                                            "C_det": max(r["C_det"] for r in table)})


# --------------------------------------------------------------- det line


def det_line_check(emb: EmbeddingField, phi, ts=(0.0, 0.25, 0.5, 0.75, 1.0), steps=(1e-3, 5e-4)):
    """Along ``psi_t = 1 - t + t exp(n (Phi(p) - phi))`` the projection stays at ``p``.

    Returns the largest point drift, the Richardson-extrapolated derivative
    of ``det A_{phi_t}`` at ``t = 0`` and ``|trace(A_phi - I)|``.
    """
    n = emb.n
    v = getattr(phi, "values", phi)
    res = project(emb, phi)
    p = res.point
    Phi = emb.at(p).phi
    ratio = np.exp(n * (Phi - v))

    def phi_t(t):
        return Phi - np.log(1.0 - t + t * ratio) / n

    drift = 0.0
    for t in ts:
        q = project(emb, phi_t(t)).point
        drift = max(drift, float(hb.dist0(p, q)))
    a_xs = emb.a_xs_all(p)

    def det_at(t):
        return float(np.linalg.det(differential(emb, phi_t(t), res, a_xs).A))

    d1, d2 = [(det_at(s) - det_at(-s)) / (2 * s) for s in steps]
    deriv = (4 * d2 - d1) / 3
    A = differential(emb, phi, res, a_xs).A
    return {"drift": drift, "derivative": abs(deriv),
            "trace_error": abs(float(np.trace(A)) - n), "detA_minus_1": float(np.linalg.det(A)) - 1.0}


def check_det_line(emb: EmbeddingField, config: SweepConfig, count=None):
    rng = config.rng("det-line")
    count = count or config.det_line_samples
    rows = [det_line_check(emb, sample_phi(config, "ball", rng, emb)) for _ in range(count)]
    drift = max(r["drift"] for r in rows)
    der = max(r["derivative"] for r in rows)
    tr = max(r["trace_error"] for r in rows)
    tol = config.tolerances
    ok = drift <= tol["det_line_point"] and der <= tol["det_line_derivative"] and tr <= tol["trace"]
    return rows, CheckResult("det_line", ok, der, tol["det_line_derivative"], count, config.seed,
                             {"max_drift": drift, "max_trace_error": tr,
                              "max_detA_minus_1": max(abs(r["detA_minus_1"]) for r in rows)})


# --------------------------------------------------------------- mean curvature


def normal_jacobian_derivative(emb: EmbeddingField, x, V, steps=(1e-3, 5e-4)):
    """Richardson central difference of ``t -> J_G P(Phi(x) + t V)`` at 0."""
    base = emb.at(x).phi

    def J(t):
        return differential(emb, base + t * V).JG

    d1, d2 = [(J(s) - J(-s)) / (2 * s) for s in steps]
    return (4 * d2 - d1) / 3


def laplacian_identity(emb: EmbeddingField, x):
    """``L_s(grad Phi_s) + lambda Delta Phi_s`` per node, with ``Delta Phi_s``.

    ``L_s(v)`` is the derivative of ``lambda(., s)`` along the geodesic with
    velocity ``v``.  For ``v = grad Phi_s`` that geodesic is the gradient
    line of ``Phi_s``, so to first order the derivative is the chart
    derivative of ``log lambda`` contracted with the chart velocity; the
    same stencil as for ``A_{x,s}`` supplies both terms.
    """
    nablaG, dl, Gc = emb.covariant_data(x)
    lap = np.trace(nablaG, axis1=1, axis2=2)
    lam = emb.at(x).lam
    # dl holds d(n Phi + log lambda); d Phi(grad Phi) = 1
    L = lam * (np.einsum("ij,ij->i", dl, Gc) - emb.n)
    return L + lam * lap, lap, lam


def _cross2(a, b):
    """z-component of the cross product of planar vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def liouville_mass(emb: EmbeddingField, s_index, center, radius=0.1, rings=5, times=(0.0, 0.25, 0.5)):
    """Mass of ``lambda(., s) dvol`` over a small disc flowed along ``grad Phi_s``.

    The disc is triangulated in polar rings around ``center``; vertices move
    along gradient geodesics (closed form for the exact metric, RK4 shots
    otherwise) and each triangle contributes its chart area times the
    vertex average of ``lambda exp(2w)``.
    """
    from scipy.spatial import Delaunay

    center = hb.coords(center)
    zc = hb.hyperboloid_to_disc(center)
    rc = hb.disc_radius(radius) * (1 - zc @ zc) / 2
    pts = [zc]
    for k in range(1, rings + 1):
        m = 6 * k
        ang = 2 * np.pi * np.arange(m) / m
        pts.extend(zc + rc * k / rings * np.column_stack([np.cos(ang), np.sin(ang)]))
    pts = np.array(pts)
    tris = Delaunay(pts).simplices
    s = emb.grid.nodes[s_index]
    if not emb.exact:
        grads = [emb.at_chart(p).grad[s_index] for p in pts]
    masses = []
    for t in times:
        if t == 0.0:
            Zt = pts
        elif emb.exact:
            X = hb.disc_to_hyperboloid(pts)
            Zt = hb.hyperboloid_to_disc(hb.exp_map(X, t * hb.busemann0_grad(s, X)))
        else:
            Zt = np.array([emb.metric.shoot_chart(p, d, t)[:2] for p, d in zip(pts, grads)])
        lam = np.array([emb.at_chart(p).lam[s_index] for p in Zt])
        dens = lam * np.exp(2 * emb.metric.conformal_log(Zt))
        P = Zt[tris]
        area = 0.5 * np.abs(_cross2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]))
        masses.append(float(area @ dens[tris].mean(axis=1)))
    return np.array(masses)


def mean_curvature_check(emb: EmbeddingField, config: SweepConfig, points=None, normals=None,
                         laplacian_points=3, liouville=True):
    """First variation of ``J_G P`` in normal directions and the Laplacian identities."""
    rng = config.rng("mean-curvature")
    points = points or config.mc_points
    normals = normals or config.mc_normals
    worst = 0.0
    for x in sample_points(rng, points, 1.0, emb.n):
        for _ in range(normals):
            V = normal_part(emb, x, _band_limited(rng, emb.grid, 1.0, config.modes))
            V = unit_l2(emb.grid, V)
            worst = max(worst, abs(normal_jacobian_derivative(emb, x, V)))
    lap_worst = 0.0
    lap_exact = 0.0
    for x in sample_points(rng, laplacian_points, 1.0, emb.n):
        ident, lap, lam = laplacian_identity(emb, x)
        lap_worst = max(lap_worst, float(np.abs(ident / np.maximum(lam, 1.0)).max()))
        if emb.exact:
            lap_exact = max(lap_exact, float(np.abs(lap - (emb.n - 1)).max()))
    liou = 0.0
    if liouville:
        x = sample_points(rng, 1, 0.8, emb.n)[0]
        m = liouville_mass(emb, int(rng.integers(emb.grid.size)), x)
        liou = float(np.abs(m / m[0] - 1.0).max())
    tol = config.tolerances
    ok = (worst <= tol["mean_curvature"] and lap_worst <= tol["laplacian_identity"]
          and lap_exact <= tol["laplacian_exact"] and liou <= tol["liouville"])
    return CheckResult("mean_curvature", ok, worst, tol["mean_curvature"], points * normals,
                       config.seed, {"laplacian_identity": lap_worst,
                                     "laplacian_exact_error": lap_exact,
                                     "liouville_drift": liou})


# --------------------------------------------------------------- compression


def compression_sweep(emb: EmbeddingField, config: SweepConfig, sigma, count, stream="compress"):
    rng = config.rng(stream)
    rows = []
    kinds = ("ball", "near-surface", "normal-perturbation")
    for i in range(count):
        kind = kinds[i % 3]
        phi = sample_phi(config, kind, rng, emb)
        cd = compression(emb, phi, sigma)
        rows.append({"sample": i, "kind": kind, "h": cd.h, "J": cd.J, "J_G": cd.pd.JG,
                     "J_F": jacobian_F(cd.pd, sigma),
                     "radius": float(hb.dist0(hb.origin(emb.n), cd.pd.point))})
    return rows


def choose_sigma(emb: EmbeddingField, config: SweepConfig, count=200):
    """Admissible sigma from the projection radius of a ball sweep."""
    if config.sigma is not None:
        return config.sigma, None
    rng = config.rng("sigma")
    R1 = 0.0
    for _ in range(count):
        p = project(emb, sample_phi(config, "ball", rng, emb)).point
        R1 = max(R1, float(hb.dist0(hb.origin(emb.n), p)))
    return admissible_sigma(R1), R1


def check_q_bound(config: SweepConfig, sigma, count=200, n=2):
    """Numeric and closed-form Jacobians of ``Q_sigma`` against ``1/(1 + sigma h^2)``."""
    rng = config.rng("q-bound")
    rmax = (4 * sigma) ** -0.5
    worst = -np.inf
    model_gap = -np.inf
    for _ in range(count):
        r = rng.uniform(0, 0.999 * rmax)
        hv = rng.uniform(0, 3.0)
        x = hb.point_from_direction(random_unit(rng, n), r)
        num = jacobian_q_numeric(x, hv, sigma)
        bound = jacobian_q_bound(hv, sigma)
        worst = max(worst, num - bound)
        model_gap = max(model_gap, jacobian_q_hyperbolic(r, hv, sigma, n) - jacobian_q_model(r, hv, sigma, n))
    tol = config.tolerances["q_bound"]
    return CheckResult("q_sigma_bound", worst <= tol and model_gap <= tol, worst, tol, count,
                       config.seed, {"hyperbolic_minus_model": model_gap})


def check_compression(rows_exact, rows_pert, config: SweepConfig, sigma):
    """Fit ``c`` on half of the exact sweep; require ``J <= 1 - c h^2`` on every sample."""

    def ratios(rows):
        return np.array([(1.0 - r["J"]) / r["h"] ** 2 for r in rows if r["h"] > 1e-6])

    re = ratios(rows_exact)
    rp = ratios(rows_pert) if rows_pert else np.array([])
    fit = fit_lower_constant(re[::2], re[1::2])
    c = fit.constant
    if rp.size:
        c = min(c, 0.5 * float(rp.min())) if rp.min() > 0 else c
    viol_e = int(np.sum(np.array([r["J"] - (1 - c * r["h"] ** 2) for r in rows_exact]) > 0))
    viol_p = int(np.sum(np.array([r["J"] - (1 - c * r["h"] ** 2) for r in rows_pert]) > 0))
    jf = max(r["J_F"] for r in rows_exact)
    ok = c > 0 and fit.margin > 0 and viol_e == 0 and viol_p == 0
    return CheckResult("compression", ok, c, 0.0, len(rows_exact) + len(rows_pert), config.seed,
                       {"sigma": sigma, "c": c, "margin": fit.margin,
                        "violations_exact": viol_e, "violations_perturbed": viol_p,
                        "min_ratio_exact": float(re.min()),
                        "min_ratio_perturbed": float(rp.min()) if rp.size else None,
                        "max_J_F_exact": jf})


def check_f_c(rows_exact, config: SweepConfig):
    jf = max(r["J_F"] for r in rows_exact)
    tol = config.tolerances["f_c_exact"]
    return CheckResult("f_c_jacobian", jf <= 1 + tol, jf - 1.0, tol, len(rows_exact), config.seed)


# --------------------------------------------------------------- matrix lemma and controls


def matrix_lemma_check(config: SweepConfig, count=2000, n=2):
    """``|det(I + A) - 1| <= C |A|^2`` for trace-free ``|A| <= 1``; C from the expansion."""
    rng = config.rng("matrix-lemma")
    worst = 0.0
    for _ in range(count):
        A = rng.normal(size=(n, n))
        A -= np.trace(A) / n * np.eye(n)
        A *= rng.uniform(0, 1) / np.linalg.norm(A, 2)
        nrm = np.linalg.norm(A, 2)
        if nrm > 0:
            worst = max(worst, abs(np.linalg.det(np.eye(n) + A) - 1.0) / nrm**2)
    C = float(sum(math.comb(n, k) for k in range(2, n + 1)))
    return CheckResult("matrix_lemma", worst <= C, worst, C, count, config.seed)


def negative_controls(emb: EmbeddingField, config: SweepConfig):
    """Broken inputs that the checks must reject; ``pass`` means the check failed as it should."""
    out = {}
    stretch = check_isometry(emb, config, count=5, grad_override=lambda g: 1.01 * g)
    out["stretched_gradient_isometry"] = not stretch.passed
    flip2 = check_special_embedding(emb, config, count=3, grad_override=lambda g: -g)
    out["flipped_gradient_special"] = not flip2.passed
    if emb.exact:
        lam = check_lambda(emb, config, points=3, exponent=emb.n)
        out["wrong_lambda_exponent"] = not lam.passed
    ok = all(out.values())
    return CheckResult("negative_controls", ok, float(sum(not v for v in out.values())), 0.0,
                       len(out), config.seed, {k: bool(v) for k, v in out.items()})
