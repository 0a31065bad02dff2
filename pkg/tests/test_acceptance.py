"""Acceptance criteria 1-10.

Each test prints (and records for the terminal summary) one line
``PASS|FAIL <n> <name>: <detail>`` before asserting.
"""

from __future__ import annotations

import json
import time

import numpy as np
import pytest
from scipy.special import erfc

from parahyp import heat_kernel as hk
from parahyp import problem_b as pb
from parahyp import spectral as sp
from parahyp import volterra as vt
from parahyp.cli import main
from parahyp.kernel import KernelEvaluator, apply_kernel
from parahyp.quadrature import panel_rule

from conftest import ACCEPTANCE_LINES

PAIRS = [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)]
PROBES = [(0.3, 0.5), (0.6, 0.2), (0.9, 0.8), (0.5, -0.2), (0.8, -0.1), (0.55, -0.35)]


def report(n: int, name: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} {n} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def verify_checks(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = main(["verify", "--out", str(out)])
    data = json.loads((out / "verify.json").read_text())
    return code, {c["name"]: c for c in data["checks"]}


@pytest.fixture(scope="module")
def spectra11(ev11):
    return {m: sp.run_spectrum(ev11, m=m, literal=False) for m in (12, 24)}


def test_01_volterra_oracles():
    nodes = vt.graded_nodes(512)
    one = vt.GridFunction1D(nodes, np.ones(512))
    t0 = time.perf_counter()
    abel = vt.solve_collocation(vt.SingularConvolutionKernel.abel(1.0), one, 1)
    dt = time.perf_counter() - t0
    e_abel = float(np.max(np.abs(abel.values - np.exp(nodes) * erfc(np.sqrt(nodes)))))
    const = vt.solve_collocation(vt.SingularConvolutionKernel.constant(1.0), one, 1)
    e_const = float(np.max(np.abs(const.values - np.exp(-nodes))))
    report(1, "volterra oracles", e_abel < 1e-6 and dt < 1.0 and e_const < 1e-8,
           f"abel {e_abel:.2e} in {dt:.2f}s, constant {e_const:.2e}")


def test_02_sign_resolution(verify_checks):
    _, checks = verify_checks
    c = checks["sign_resolution"]
    rp, rm = c["residual_plus"], c["residual_minus"]
    exactly_one = (rp < 1e-6) != (rm < 1e-6)
    report(2, "sign resolution", exactly_one and c["sign"] in (1, -1),
           f"recorded sign {c['sign']}, residual(+) {rp:.2e}, residual(-) {rm:.2e}")


def test_03_heat_kernel_identities():
    rng = np.random.default_rng(2024)
    x = rng.uniform(0.01, 1.0, 100)
    y1 = rng.uniform(0.05, 0.95, 100)
    h = 1e-6
    fd = (hk.green_g(x, h, y1) - hk.green_g(x, -h, y1)) / (2 * h)
    exact = hk.flux_g0(x, y1)
    rel = float(np.max(np.abs(fd - exact) / np.abs(exact)))
    xs = np.linspace(0.0, 1.0, 101)
    wall = float(np.max(np.abs(hk.cumulative_flux(xs, 1.0))))
    X, Y = np.meshgrid(xs[1:], np.linspace(0.0, 1.0, 101), indexing="ij")
    qmin = float(np.min(hk.cumulative_flux(X, Y)))
    py, pw = panel_rule(np.linspace(0.0, 1.0, 41), 16)
    mass = float(np.sum(hk.green_g(1e-3, 0.5, py) * pw))
    report(3, "heat kernel identities", rel < 1e-4 and wall < 1e-10 and qmin >= -1e-10 and mass >= 0.999,
           f"fd rel {rel:.2e}, wall {wall:.1e}, min flux {qmin:.1e}, mass {mass:.6f}")


def test_04_manufactured_hyperbolic(verify_checks):
    _, c = verify_checks
    pde = c["manufactured_hyperbolic_pde"]["value"]
    exact = c["manufactured_hyperbolic_exact"]["value"]
    nu = c["manufactured_transmission"]["value"]
    report(4, "manufactured hyperbolic solution", pde < 1e-10 and exact < 1e-10 and nu < 1e-5,
           f"wave residual {pde:.2e}, u - tau - (eta-xi)(1-eta) {exact:.2e}, transmission {nu:.2e}")


def test_05_parabolic_convergence(verify_checks):
    _, c = verify_checks
    order = c["parabolic_convergence_order"]["value"]
    aa0, a0b0 = c["boundary_AA0"]["value"], c["boundary_A0B0"]["value"]
    report(5, "parabolic residual convergence", order >= 0.8 and aa0 < 1e-8 and a0b0 < 1e-8,
           f"order {order:.2f}, AA0 {aa0:.1e}, A0B0 {a0b0:.1e}")


def test_06_kernel_representation(ev11):
    t0 = time.perf_counter()
    worst = 0.0
    for f in pb.random_smooth_sources(5, seed=3):
        sol = pb.solve_tau(f, ev11.params, 512)
        for x, y in PROBES:
            u = float(pb.evaluate_u(x, y, f, sol))
            v = apply_kernel(ev11, f, x, y)["total"]
            worst = max(worst, abs(v - u) / abs(u))
    dt = time.perf_counter() - t0
    report(6, "kernel representation", worst < 0.02 and dt < 120,
           f"max relative difference {worst:.2e} over 5 sources x 6 points in {dt:.0f}s")


def test_07_positivity():
    t0 = time.perf_counter()
    parts, ok = [], True
    for a, b in PAIRS:
        ev = KernelEvaluator.build(pb.TransmissionParams(a, b))
        rep = sp.run_spectrum(ev, m=12, literal=False)
        f = rep.positivity_flags
        good = all(f[k] is True for k in ("gamma1_ge_1", "I1_positive", "I2_plus_I3_positive",
                                           "trace_positive")) and rep.trace_gaal > 0
        ok &= good
        parts.append(f"({a:g},{b:g}) I1 {rep.I1:.4g} I2+I3 {rep.I2 + rep.I3:.4g} trace {rep.trace_gaal:.4g}")
    dt = time.perf_counter() - t0
    report(7, "positivity suite", ok and dt < 300, "; ".join(parts) + f"; {dt:.0f}s")


def test_08_lidskii(spectra11):
    sur = sp.run_spectrum(sp.SeparableKernel(), m=12)
    g12 = spectra11[12].lidskii_gap_reference
    g24 = spectra11[24].lidskii_gap_reference
    report(8, "lidskii consistency", sur.lidskii_gap < 1e-10 and g24 < g12 and g24 < 0.1,
           f"surrogate {sur.lidskii_gap:.1e}; problem gap m=12 {g12:.3%}, m=24 {g24:.3%}")


def test_09_eigenvalue_existence(spectra11):
    l12 = spectra11[12].significant_eigenvalues
    l24 = spectra11[24].significant_eigenvalues
    ok = len(l12) > 0 and len(l24) > 0
    change = abs(abs(l24[0]) - abs(l12[0])) / abs(l12[0]) if ok else float("inf")
    s2 = float(np.sum(l24 ** 2).real) if ok else 0.0
    report(9, "eigenvalue existence", ok and change < 0.1 and s2 > 0,
           f"lambda_max m=12 {l12[0]:.5g}, m=24 {l24[0]:.5g}, change {change:.2%}, sum lambda^2 {s2:.4g}")


def test_10_stability_probe(tmp_path):
    res = pb.stability_probe(pb.TransmissionParams(1.0, 1.0), count=20)
    (tmp_path / "stability.json").write_text(json.dumps(res, indent=2))
    finite = np.isfinite(res["max_ratio"]) and res["min_ratio"] > 0
    report(10, "stability probe", finite and res["stable"],
           f"ratio in [{res['min_ratio']:.4g}, {res['max_ratio']:.4g}], "
           f"max change under refinement {res['max_relative_change']:.2%}")
