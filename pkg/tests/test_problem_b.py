import numpy as np
import pytest

from parahyp import problem_b as pb
from parahyp.source import PRESETS, SourceField

HYP4 = SourceField("constant", (4.0,), "hyperbolic_only")


def test_rhs_for_constant_hyperbolic_source():
    x = np.linspace(0, 1, 11)
    F = pb.rhs_F(x, HYP4, pb.TransmissionParams(1.0, 1.0))
    assert np.allclose(F, -2 * (1 - x) + 2 * x - x ** 2, atol=1e-12)
    F0 = pb.rhs_F(x, HYP4, pb.TransmissionParams(1.0, 0.0))
    assert np.allclose(F0, -2 * (1 - x), atol=1e-12)


def test_phi0_vanishes_without_parabolic_source():
    assert np.all(pb.phi0(np.linspace(0, 1, 5), HYP4) == 0)


def test_phi0_small_x_scaling():
    f = SourceField("constant", (1.0,))
    # near x = 0 the flux of a unit source behaves like 2 sqrt(x / pi) (twice, from both walls)
    x = np.array([1e-4])
    assert pb.phi0(x, f)[0] == pytest.approx(2 * np.sqrt(x[0] / np.pi), rel=1e-3)


def test_parameter_validation():
    with pytest.raises(pb.ProblemBError):
        pb.TransmissionParams(0.0, 0.0)
    with pytest.raises(pb.UnsupportedParameterError, match="alpha != 0"):
        pb.solve_tau(HYP4, pb.TransmissionParams(0.0, 1.0))


@pytest.fixture(scope="module")
def bump_trace():
    return pb.solve_tau(PRESETS["smooth-bump"], pb.TransmissionParams(1.0, 1.0), n=256)


def test_trace_starts_at_zero_and_is_consistent(bump_trace):
    assert abs(bump_trace.tau.values[0]) < 1e-12
    assert bump_trace.gamma1_consistency < 1e-4


def test_linearity():
    p = pb.TransmissionParams(1.0, 0.5)
    a = pb.solve_tau(HYP4, p, n=256)
    b = pb.solve_tau(HYP4.scaled(-3.0), p, n=256)
    assert np.allclose(b.tau.values, -3.0 * a.tau.values, atol=1e-12)


def test_sign_resolution_picks_minus(bump_trace):
    r = pb.resolve_sign(pb.TransmissionParams(1.0, 1.0), bump_trace.F)
    assert r["sign"] == -1


def test_zero_source_gives_zero_solution():
    sol = pb.solve_u(PRESETS["zero"], pb.TransmissionParams(1.0, 1.0), pb.Grids(8, 8, 8, 128))
    assert np.all(sol.u_parabolic == 0)
    assert np.all(np.nan_to_num(sol.u_hyperbolic) == 0)


def test_constant_hyperbolic_solution_satisfies_conditions():
    p = pb.TransmissionParams(1.0, 0.0)
    sol = pb.solve_u(HYP4, p, pb.Grids(16, 16, 16, 512))
    res = pb.verify_solution(sol, HYP4, p)
    assert res["hyperbolic_pde"] < 1e-8
    assert res["transmission_nu"] < 1e-5
    assert res["boundary_AA0"] < 1e-8
    assert res["tau_at_zero"] < 1e-12


def test_evaluate_u_matches_grid():
    p = pb.TransmissionParams(1.0, 1.0)
    f = PRESETS["smooth-bump"]
    sol = pb.solve_u(f, p, pb.Grids(8, 8, 8, 256))
    u = pb.evaluate_u(sol.x[3], sol.y[4], f, sol.trace)
    assert float(u) == pytest.approx(sol.u_parabolic[3, 4], abs=1e-10)
