"""The fourteen acceptance criteria, read off one ``verify-all --seed 7`` run.

Each test records a single pass/fail line; the lines are collected into an
``acceptance criteria`` section at the end of the pytest summary.  The run
uses the default configuration (n = 2, N = 720, R = 3, eps = 0.05), so the
sample counts and tolerances are the ones the criteria state.
"""
import filecmp
import json

import pytest

from hypfill import cli

pytestmark = pytest.mark.slow


def _run(outdir):
    cli.TIMINGS.clear()
    code = cli.main(["verify-all", "--seed", "7", "--out", str(outdir)])
    path = outdir / "verify_all.json"
    return code, json.loads(path.read_text()), dict(cli.TIMINGS), path


@pytest.fixture(scope="module")
def run1(tmp_path_factory):
    return _run(tmp_path_factory.mktemp("verify1"))


def _check(report, name):
    return report["checks"][name]


def _line(c):
    return f"extremum={c['extremum']:.3e} tol={c['tolerance']:.1e} n={c['samples']}"


def test_criterion_01_busemann(run1, acceptance_record):
    _, rep, t, _ = run1
    c = _check(rep, "busemann_closed_form")
    ok = c["pass"] and c["samples"] >= 50 and c["tolerance"] == 1e-6 and t["busemann"] < 5.0
    acceptance_record(1, ok, f"Busemann closed form vs limit: {_line(c)} runtime={t['busemann']:.2f}s")
    assert ok


def test_criterion_02_distance(run1, acceptance_record):
    _, rep, _, _ = run1
    ce, cp = _check(rep, "distance_preservation_exact"), _check(rep, "distance_preservation_perturbed")
    ok = (ce["pass"] and cp["pass"] and ce["samples"] >= 100 and cp["samples"] >= 100
          and ce["tolerance"] == 1e-3 and cp["tolerance"] == 5e-3)
    acceptance_record(2, ok, f"distance preservation: exact {_line(ce)}; eps=0.05 {_line(cp)}")
    assert ok


def test_criterion_03_lambda(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "lambda_identity_exact")
    ok = c["pass"] and c["samples"] >= 20 * 720 and c["tolerance"] == 1e-3
    acceptance_record(3, ok, f"lambda identity: {_line(c)}")
    assert ok


def test_criterion_04_projection_identity(run1, acceptance_record):
    _, rep, _, _ = run1
    ce, cp = _check(rep, "projection_identity_exact"), _check(rep, "projection_identity_perturbed")
    iters = max(ce["details"]["max_newton_iterations"], cp["details"]["max_newton_iterations"])
    ok = ce["pass"] and cp["pass"] and iters <= 12 and ce["samples"] >= 50
    acceptance_record(4, ok, f"P o Phi = id: exact {_line(ce)}; perturbed {_line(cp)}; max Newton {iters}")
    assert ok


def test_criterion_05_isometry(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "isometric_immersion_exact")
    ok = c["pass"] and c["samples"] >= 100 and c["tolerance"] == 1e-4
    acceptance_record(5, ok, f"isometric immersion: {_line(c)}")
    assert ok


def test_criterion_06_jacobian_E(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "jacobian_E_exact")
    nmax = c["details"]["max_E_norm"]
    ok = c["pass"] and c["samples"] >= 1000 and nmax <= 2 + 1e-4
    acceptance_record(6, ok, f"J_G(E) <= 1 + 1e-4 and |E|_G <= n: {_line(c)} max|E|={nmax:.4f}")
    assert ok


def test_criterion_07_deficiency(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "quadratic_deficiency")
    d = c["details"]
    ok = c["pass"] and d["c0"] > 0 and c["extremum"] > 0 and d["train"] >= 450 and d["heldout"] >= 450
    acceptance_record(7, ok, f"quadratic deficiency: c0={d['c0']:.3e} margin={c['extremum']:.3e} "
                             f"train={d['train']} heldout={d['heldout']}")
    assert ok


def test_criterion_08_A_identity(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "a_identity")
    ok = c["pass"] and c["tolerance"] == 1e-6
    acceptance_record(8, ok, f"exact A_phi = I, det A_phi = 1: {_line(c)}")
    assert ok


def test_criterion_09_scaling(run1, acceptance_record):
    _, rep, t, _ = run1
    c = _check(rep, "perturbation_scaling")
    sa, sd = c["details"]["slope_A"], c["details"]["slope_det"]
    rt = t["perturbation scaling"]
    ok = abs(sa - 1) <= 0.2 and abs(sd - 2) <= 0.3 and rt < 600
    acceptance_record(9, ok, f"perturbation scaling: slope |A-I| {sa:.3f}, slope |detA-1| {sd:.3f}, runtime {rt:.0f}s")
    assert ok


def test_criterion_10_det_line(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "det_line")
    d = c["details"]
    ok = (c["pass"] and c["samples"] >= 20 and d["max_drift"] <= 1e-5 and c["extremum"] <= 1e-4
          and d["max_trace_error"] <= 1e-4)
    acceptance_record(10, ok, f"det line: d/dt det A={c['extremum']:.2e} drift={d['max_drift']:.2e} "
                              f"trace={d['max_trace_error']:.2e}")
    assert ok


def test_criterion_11_mean_curvature(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "mean_curvature_exact")
    cp = _check(rep, "mean_curvature_perturbed")
    d = c["details"]
    ok = (c["pass"] and cp["pass"] and c["samples"] >= 100 and d["laplacian_exact_error"] <= 1e-6
          and d["laplacian_identity"] <= 1e-3)
    acceptance_record(11, ok, f"first variation: exact {_line(c)} lap={d['laplacian_exact_error']:.1e} "
                              f"liouville={d['liouville_drift']:.1e}; perturbed {_line(cp)}")
    assert ok


def test_criterion_12_compression(run1, acceptance_record):
    _, rep, _, _ = run1
    c = _check(rep, "compression")
    q = _check(rep, "q_sigma_bound")
    d = c["details"]
    ok = (c["pass"] and q["pass"] and d["c"] > 0 and d["violations_exact"] == 0
          and d["violations_perturbed"] == 0 and c["samples"] >= 1000 and q["tolerance"] == 1e-6)
    acceptance_record(12, ok, f"compression: sigma={d['sigma']} c={d['c']:.3e} "
                              f"min ratio exact {d['min_ratio_exact']:.3e} perturbed {d['min_ratio_perturbed']:.3e}; "
                              f"Q bound {q['extremum']:.1e}")
    assert ok


def test_criterion_13_filling(run1, acceptance_record):
    _, rep, t, _ = run1
    eq, st, dom = (_check(rep, k) for k in ("filling_equality", "filling_strict", "filling_domination_rejected"))
    rt = t["section filling"]
    ok = eq["pass"] and st["pass"] and dom["pass"] and rt < 300 and eq["samples"] >= 1900
    acceptance_record(13, ok, f"filling: equality spread {eq['extremum']:.2e}, enlarged gain {st['extremum']:.2e}, "
                              f"domination rejected {dom['pass']}, runtime {rt:.0f}s")
    assert ok


def test_criterion_14_determinism(run1, tmp_path_factory, acceptance_record):
    code1, _, _, first = run1
    code2, _, _, second = _run(tmp_path_factory.mktemp("verify2"))
    same = filecmp.cmp(first, second, shallow=False)
    ok = same and code1 == code2
    acceptance_record(14, ok, f"verify-all --seed 7 twice: byte-identical={same}")
    assert ok


def test_verify_all_exit_status(run1):
    code, rep, _, _ = run1
    assert code == (0 if rep["pass"] else 1)
