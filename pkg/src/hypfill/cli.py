"""Command-line entry point ``hypfill``.

Every subcommand writes a JSON report (``"schema": 1``, config hash and
seed embedded, sorted keys) and, where there is tabular data, a CSV with a
header row into the output directory, then prints one summary line.
Progress goes to standard error.

Exit status: 0 all checks pass, 1 a check failed, 2 a solver failed,
3 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import hyperboloid as hb
from .config import ConfigError, RunConfig, build_config
from .embedding import EmbeddingField
from .filling import DominationError, bump_factor, filling_report, make_disc_mesh, write_mesh
from .metric import GeodesicError, MetricField, default_bump
from .projector import ProjectionError, project
from .sphere import BoundaryFunction, make_grid
from . import verification as vf

SCHEMA = 1
# wall-clock seconds per timed step of the last run; kept out of reports
TIMINGS: dict = {}
EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def log(msg):
    print(msg, file=sys.stderr, flush=True)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, vf.CheckResult):
        return jsonable(obj.to_dict())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path, rows):
    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([jsonable(r[k]) for k in keys])


class Context:
    """Lazily built embeddings shared by the checks of one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.sweep = cfg.sweep()
        self.grid = make_grid(cfg.n, cfg.N)
        self._emb = {}

    def emb(self, eps=0.0):
        if eps and self.cfg.n != 2:
            raise UsageError("perturbed metrics are available for n = 2 only")
        if eps not in self._emb:
            metric = MetricField(self.cfg.n, self.cfg.R, default_bump(eps) if eps else None)
            self._emb[eps] = EmbeddingField(metric, self.grid)
        return self._emb[eps]

    @property
    def perturbed(self):
        return self.cfg.n == 2 and self.cfg.eps > 0


def header(cfg: RunConfig, command):
    return {"schema": SCHEMA, "command": command, "seed": cfg.seed,
            "config_hash": cfg.hash(), "config": cfg.persisted()}


def _timed(name, fn, *a, **k):
    t = time.perf_counter()
    log(f"[hypfill] {name} ...")
    out = fn(*a, **k)
    TIMINGS[name] = time.perf_counter() - t
    log(f"[hypfill] {name} done in {TIMINGS[name]:.1f} s")
    return out


def _suffix(res, tag):
    res.name = f"{res.name}_{tag}"
    return res


# --------------------------------------------------------------- subcommands


def run_embed_check(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    ex = ctx.emb()
    checks = [
        _timed("busemann", vf.check_busemann_closed_form, sw),
        _suffix(vf.check_special_embedding(ex, sw), "exact"),
        _suffix(vf.check_isometry(ex, sw), "exact"),
        _suffix(vf.check_lambda(ex, sw), "exact"),
        _suffix(_timed("distance exact", vf.check_distance_preservation, ex, sw), "exact"),
        _suffix(vf.check_projection_identity(ex, sw), "exact"),
        vf.negative_controls(ex, sw),
    ]
    if ctx.perturbed:
        pe = ctx.emb(cfg.eps)
        checks += [
            _suffix(_timed("special perturbed", vf.check_special_embedding, pe, sw, count=5), "perturbed"),
            _suffix(_timed("isometry perturbed", vf.check_isometry, pe, sw), "perturbed"),
            _suffix(_timed("lambda perturbed", vf.check_lambda, pe, sw), "perturbed"),
            _suffix(_timed("distance perturbed", vf.check_distance_preservation, pe, sw), "perturbed"),
            _suffix(_timed("projection perturbed", vf.check_projection_identity, pe, sw), "perturbed"),
        ]
    return {c.name: c for c in checks}, {}, []


def run_jacobian_sweep(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    ex = ctx.emb()
    rows = _timed("jacobian sweep exact", vf.jacobian_sweep, ex, sw, kinds=("ball", "near-surface"))
    checks = [_suffix(vf.check_jacobian_E(rows, sw, cfg.n), "exact"), vf.check_a_identity(rows, sw)]
    fit, dres = _timed("deficiency fit", vf.check_deficiency, ex, sw)
    checks.append(dres)
    checks.append(vf.check_j_y_le_jg(ex, sw))
    checks.append(vf.matrix_lemma_check(sw, n=cfg.n))
    for r in rows:
        r["metric"] = "exact"
    if ctx.perturbed and cfg.jacobian_perturbed:
        prow = _timed("jacobian sweep perturbed", vf.jacobian_sweep, ctx.emb(cfg.eps), sw,
                      count=cfg.jacobian_perturbed, kinds=("ball", "near-surface"))
        checks.append(_suffix(vf.check_jacobian_E(prow, sw, cfg.n), "perturbed"))
        for r in prow:
            r["metric"] = f"eps={cfg.eps}"
        rows += prow
    extra = {"constants": {"c0": fit.constant, "c0_margin": fit.margin,
                           "c0_samples": fit.train + fit.heldout}}
    return {c.name: c for c in checks}, extra, rows


def run_compress_sweep(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    ex = ctx.emb()
    sigma, R1 = vf.choose_sigma(ex, sw)
    if sigma is None:
        raise UsageError("no admissible sigma for the sampled projection radius")
    rows = _timed("compression exact", vf.compression_sweep, ex, sw, sigma, cfg.compression_samples)
    for r in rows:
        r["metric"] = "exact"
    prow = []
    if cfg.n == 2 and cfg.eps_compress > 0 and cfg.compression_perturbed:
        prow = _timed("compression perturbed", vf.compression_sweep, ctx.emb(cfg.eps_compress), sw,
                      sigma, cfg.compression_perturbed, "compress-perturbed")
        for r in prow:
            r["metric"] = f"eps={cfg.eps_compress}"
    comp = vf.check_compression(rows, prow, sw, sigma)
    checks = [comp, vf.check_q_bound(sw, sigma, n=cfg.n), vf.check_f_c(rows, sw)]
    extra = {"constants": {"sigma": sigma, "R1": R1, "c": comp.details["c"],
                           "c_margin": comp.details["margin"]}}
    return {c.name: c for c in checks}, extra, rows + prow


def run_perturb_scaling(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    if cfg.n != 2:
        raise UsageError("perturbation scaling needs n = 2")
    table, res = _timed("perturbation scaling", vf.check_scaling, sw, eps_list=cfg.eps_list)
    extra = {"slopes": {"A_minus_I": res.details["slope_A"], "detA_minus_1": res.details["slope_det"]},
             "constants": {"C_A": res.details["C_A"], "C_det": res.details["C_det"]}}
    return {res.name: res}, extra, table


def run_det_line(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    if not ctx.perturbed:
        raise UsageError("det-line needs a perturbed metric (n = 2, eps > 0)")
    rows, res = _timed("det line", vf.check_det_line, ctx.emb(cfg.eps), sw)
    return {res.name: res}, {}, [{"sample": i, **r} for i, r in enumerate(rows)]


def run_mean_curvature(ctx: Context):
    cfg, sw = ctx.cfg, ctx.sweep
    checks = [_suffix(_timed("mean curvature exact", vf.mean_curvature_check, ctx.emb(), sw), "exact")]
    if ctx.perturbed and cfg.mc_points_perturbed:
        checks.append(_suffix(_timed(
            "mean curvature perturbed", vf.mean_curvature_check, ctx.emb(cfg.eps), sw,
            points=cfg.mc_points_perturbed, normals=cfg.mc_normals_perturbed,
            laplacian_points=1), "perturbed"))
    return {c.name: c for c in checks}, {}, []


def run_filling(ctx: Context, mesh_out=None):
    cfg = ctx.cfg
    if cfg.n != 2:
        raise UsageError("the filling experiment is planar")
    emb = ctx.emb()
    tol = 0.01
    mesh_g = make_disc_mesh(cfg.fill_radius, cfg.fill_triangles)
    reports = {}
    reports["equal"] = _timed("filling g'=g", filling_report, emb, mesh_g, mesh_g)
    mesh_big = make_disc_mesh(cfg.fill_radius, cfg.fill_triangles, factor=bump_factor(cfg.fill_amplitude))
    reports["enlarged"] = _timed("filling g' enlarged", filling_report, emb, mesh_g, mesh_big)
    mesh_small = make_disc_mesh(cfg.fill_radius, cfg.fill_triangles, factor=bump_factor(-3 * cfg.fill_amplitude))
    try:
        filling_report(emb, mesh_g, mesh_small)
        rejected, msg = False, "accepted"
    except DominationError as exc:
        rejected, msg = True, str(exc)
    if mesh_out:
        write_mesh(mesh_big, mesh_out)
    eq = reports["equal"]["chain"]
    spread = max(eq.values()) / min(eq.values()) - 1.0
    big = reports["enlarged"]["chain"]
    gain = big["vol_M_prime"] / big["vol_D_g"] - 1.0
    chain_ok = all(all(r["links"].values()) for r in reports.values())
    checks = [
        vf.CheckResult("filling_equality", spread <= tol and chain_ok, spread, tol,
                       reports["equal"]["triangles"], cfg.seed,
                       {"max_h": reports["equal"]["max_h"]}),
        vf.CheckResult("filling_strict", gain > tol and reports["enlarged"]["verdict"], gain, tol,
                       reports["enlarged"]["triangles"], cfg.seed),
        vf.CheckResult("filling_domination_rejected", rejected, 0.0, 0.0, 1, cfg.seed,
                       {"message": msg}),
    ]
    return {c.name: c for c in checks}, {"filling": reports}, []


RUNNERS = {
    "embed-check": run_embed_check,
    "jacobian-sweep": run_jacobian_sweep,
    "compress-sweep": run_compress_sweep,
    "perturb-scaling": run_perturb_scaling,
    "det-line": run_det_line,
    "mean-curvature": run_mean_curvature,
    "filling": run_filling,
}


def run_verify_all(ctx: Context):
    checks, extra = {}, {"constants": {}, "slopes": {}}
    for name in ("embed-check", "jacobian-sweep", "perturb-scaling", "det-line",
                 "mean-curvature", "compress-sweep", "filling"):
        if name in ("perturb-scaling", "det-line") and not ctx.perturbed:
            continue
        c, e, _ = _timed(f"section {name}", RUNNERS[name], ctx)
        checks.update(c)
        for k, v in e.items():
            if k in ("constants", "slopes"):
                extra[k].update(v)
            else:
                extra[k] = v
    return checks, extra, []


# --------------------------------------------------------------- phi parsing


def parse_phi(spec, grid, cfg: RunConfig):
    """``const:c``, ``fourier:seed`` (sampler draw) or ``csv:path`` (one row of grid values)."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "const":
            return grid.constant(float(arg))
        if kind == "fourier":
            sw = cfg.sweep()
            rng = np.random.default_rng(int(arg or cfg.seed))
            vals = vf._band_limited(rng, grid, sw.amplitude, sw.modes)
            return BoundaryFunction(grid, np.clip(vals, -cfg.R, cfg.R))
        if kind == "csv":
            with open(arg) as fh:
                row = fh.readline().strip()
            return BoundaryFunction.from_csv_row(grid, row)
    except (ValueError, OSError, StopIteration) as exc:
        raise UsageError(f"cannot build phi from {spec!r}: {exc}") from exc
    raise UsageError(f"unknown phi spec {spec!r}; use const:c, fourier:seed or csv:path")


def run_project(ctx: Context, phi_spec):
    emb = ctx.emb(ctx.cfg.eps if ctx.perturbed and ctx.cfg.eps else 0.0)
    phi = parse_phi(phi_spec, ctx.grid, ctx.cfg)
    res = project(emb, phi)
    r = float(hb.dist0(hb.origin(ctx.cfg.n), res.point))
    payload = {"phi": phi_spec, "point": res.point, "chart": res.z, "iterations": res.iterations,
               "residual": res.residual, "distance_from_origin": r}
    return payload


# --------------------------------------------------------------- report


def summarize(report):
    lines = []
    for name, c in sorted(report.get("checks", {}).items()):
        lines.append(f"{'PASS' if c['pass'] else 'FAIL'}  {name:36s} extremum={c['extremum']:.3e} "
                     f"tol={c['tolerance']:.1e} samples={c['samples']}")
    return lines


def run_report(path):
    try:
        with open(path) as fh:
            report = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read report {path}: {exc}") from exc
    if report.get("schema") != SCHEMA:
        raise UsageError(f"unsupported report schema {report.get('schema')!r}")
    for line in summarize(report):
        print(line)
    ok = all(c["pass"] for c in report.get("checks", {}).values())
    print(f"{report.get('command')}: {'all checks pass' if ok else 'failures present'} "
          f"(seed {report.get('seed')}, config {report.get('config_hash')})")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------- argparse


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


COMMON = {
    "--seed": int, "--n": int, "--N": int, "--R": float, "--eps": float, "--sigma": float,
    "--amplitude": float, "--eps-compress": float,
}


def build_parser():
    p = Parser(prog="hypfill", description="Busemann embedding, projection and filling checks.")
    sub = p.add_subparsers(dest="command", parser_class=Parser, required=True)
    names = list(RUNNERS) + ["verify-all", "project", "report"]
    for name in names:
        sp = sub.add_parser(name)
        if name == "report":
            sp.add_argument("path", help="JSON report to summarize")
            continue
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--threads", type=int, help="cap on worker threads")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
        for flag, typ in COMMON.items():
            sp.add_argument(flag, type=typ)
        if name == "perturb-scaling":
            sp.add_argument("--eps-list", "--eps-scaling", dest="eps_list",
                            help="comma separated bump amplitudes")
        if name == "project":
            sp.add_argument("--phi", required=True, help="const:c | fourier:seed | csv:path")
        if name == "filling":
            sp.add_argument("--mesh-out", help="write the enlarged competitor mesh here")
    return p


def _overrides(args):
    ov = {}
    for flag in COMMON:
        key = flag.lstrip("-").replace("-", "_")
        ov[key] = getattr(args, key, None)
    ov["out"] = args.out
    ov["threads"] = args.threads
    if getattr(args, "eps_list", None):
        ov["eps_list"] = args.eps_list
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        ov[k.strip()] = v.strip()
    return ov


def _set_threads(k):
    try:
        import numba
    except ImportError:  # pragma: no cover
        return
    k = k or os.cpu_count() or 1
    numba.set_num_threads(max(1, min(k, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        try:
            return run_report(args.path)
        except UsageError as exc:
            log(f"hypfill: {exc}")
            return EXIT_USAGE
    try:
        cfg = build_config(args.config, _overrides(args))
    except ConfigError as exc:
        log(f"hypfill: {exc}")
        return EXIT_USAGE
    _set_threads(cfg.threads)
    os.makedirs(cfg.out, exist_ok=True)
    ctx = Context(cfg)
    stem = args.command.replace("-", "_")
    payload = header(cfg, args.command)
    try:
        if args.command == "project":
            payload.update(run_project(ctx, args.phi))
            write_json(os.path.join(cfg.out, "project.json"), payload)
            print(" ".join(f"{v:.12g}" for v in payload["point"]))
            return EXIT_OK
        if args.command == "verify-all":
            checks, extra, rows = run_verify_all(ctx)
        elif args.command == "filling":
            checks, extra, rows = run_filling(ctx, args.mesh_out)
        else:
            checks, extra, rows = RUNNERS[args.command](ctx)
    except (UsageError, ConfigError) as exc:
        log(f"hypfill: {exc}")
        return EXIT_USAGE
    except vf.FitError as exc:
        log(f"hypfill: cannot fit constants: {exc}")
        return EXIT_USAGE
    except (ProjectionError, GeodesicError) as exc:
        payload["solver_failure"] = {"type": type(exc).__name__, "message": str(exc)}
        write_json(os.path.join(cfg.out, f"{stem}.json"), payload)
        log(f"hypfill: solver failure: {exc}")
        return EXIT_SOLVER
    payload.update(extra)
    payload["checks"] = checks
    ok = all(c.passed for c in checks.values())
    payload["pass"] = ok
    write_json(os.path.join(cfg.out, f"{stem}.json"), payload)
    if rows:
        write_csv(os.path.join(cfg.out, f"{stem}.csv"), rows)
    failed = sorted(k for k, c in checks.items() if not c.passed)
    print(f"{args.command}: {len(checks) - len(failed)}/{len(checks)} checks pass"
          + (f"; failed: {', '.join(failed)}" if failed else "")
          + f" [seed {cfg.seed}, config {cfg.hash()}]")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
