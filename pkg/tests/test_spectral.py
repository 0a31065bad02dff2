import dataclasses

import numpy as np
import pytest

from parahyp import problem_b as pb
from parahyp import spectral as sp
from parahyp.kernel import ConstantResolvent


@pytest.mark.parametrize("rule", ["masked", "duffy"])
def test_region_weights(rule):
    sq, tri = sp.QuadratureScheme.build(10, rule).region_areas()
    assert sq == pytest.approx(1.0, abs=1e-14)
    assert tri == pytest.approx(0.25, abs=1e-14)


def test_bad_scheme_arguments():
    with pytest.raises(ValueError):
        sp.QuadratureScheme.build(1)
    with pytest.raises(ValueError, match="unknown triangle rule"):
        sp.QuadratureScheme.build(4, "simpson")


def test_node_cap():
    with pytest.raises(sp.NodeCapError):
        sp.kernel_matrix(sp.ZeroKernel(), sp.QuadratureScheme.build(12), node_cap=100)


def test_separable_surrogate_is_rank_one():
    rep = sp.run_spectrum(sp.SeparableKernel(), m=12)
    assert len(rep.significant_eigenvalues) == 1
    lam = rep.eigenvalues[0]
    assert abs(lam.imag) < 1e-12
    assert rep.lidskii_gap < 1e-10
    # quadrature error of the masked rule only
    assert lam.real ** 2 == pytest.approx(sp.SeparableKernel().exact_trace(), rel=1e-3)


def test_zero_kernel():
    rep = sp.run_spectrum(sp.ZeroKernel(), m=6)
    assert rep.trace_gaal == 0.0
    assert rep.lidskii_gap == 0.0
    assert len(rep.significant_eigenvalues) == 0


def test_eigenvalue_ordering():
    lam = sp.eigen_estimate(np.diag([0.1, -3.0, 2.0]))
    assert np.allclose(lam, [-3.0, 2.0, 0.1])
    with pytest.raises(sp.EigenSolverError):
        sp.eigen_estimate(np.array([[np.nan]]))


def test_causality_of_parabolic_block(ev11):
    quad = sp.QuadratureScheme.build(6)
    K = sp.kernel_matrix(ev11, quad)
    p = quad.parabolic
    xi, xj = quad.x[p][:, None], quad.x[p][None, :]
    assert np.all(K[p, p][xi <= xj] == 0.0)
    assert np.any(K[p, p][xi > xj] != 0.0)


@pytest.mark.parametrize("r", [0.0, 1.0, 2.5])
def test_reduced_trace_without_resolvent(ev11, r):
    ev = dataclasses.replace(ev11, params=pb.TransmissionParams(1.0, r),
                             resolvent=ConstantResolvent(0.0), _tables={})
    d = sp.trace_decomposed(ev)
    assert d["I2"] + d["I3"] == pytest.approx(1 / 32 - 13 * r / 480 + r * r / 160, abs=1e-9)


def test_reduced_trace_signs(ev11):
    d = sp.trace_decomposed(ev11)
    assert d["I1"] > 0 and d["I2"] + d["I3"] > 0
    assert d["total"] == pytest.approx(0.71545, rel=1e-4)


def test_direct_trace_matches_reduced_trace(ev10):
    quad = sp.QuadratureScheme.build(16)
    tr = sp.trace_direct(ev10, quad)
    ref = sp.trace_decomposed(ev10)["total"]
    assert abs(tr - ref) / ref < 0.05


def test_positivity_gating(ev10):
    flags = sp.positivity_audit(ev10, sp.trace_decomposed(ev10), None)
    assert flags["trace_positive"] == "skipped"
    assert flags["gamma1_ge_1"] is True


def test_report_serialisation():
    d = sp.run_spectrum(sp.SeparableKernel(), m=4).to_dict()
    assert d["kernel"] == "SeparableKernel"
    assert all(len(z) == 2 for z in d["eigenvalues"])
    assert d["n_significant"] == 1
