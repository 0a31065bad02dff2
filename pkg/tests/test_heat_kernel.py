import numpy as np
import pytest

from parahyp import heat_kernel as hk
from parahyp.quadrature import panel_rule


def test_green_value_small_time():
    # single-image limit 1 / sqrt(4 pi x) at y = y1 mid-strip
    assert hk.green_g(0.01, 0.5, 0.5) == pytest.approx(2.8209479, abs=1e-6)


def test_flux_value_and_finite_difference():
    assert hk.flux_g0(0.04, 0.2) == pytest.approx(5.4923910, abs=1e-6)
    h = 1e-6
    fd = (hk.green_g(0.04, h, 0.2) - hk.green_g(0.04, -h, 0.2)) / (2 * h)
    assert fd == pytest.approx(hk.flux_g0(0.04, 0.2), rel=1e-6)


def test_boundary_kernel_and_smooth_part():
    assert hk.boundary_kernel_k(0.1) == pytest.approx(1.7842861, abs=1e-6)
    x = np.array([0.0, 1e-3, 0.1, 0.5])
    s = hk.boundary_kernel_smooth(x)
    assert s[0] == 0.0
    assert s[2] == pytest.approx(hk.boundary_kernel_k(0.1) - 1 / np.sqrt(np.pi * 0.1), abs=1e-14)


def test_symmetry_and_dirichlet_walls():
    rng = np.random.default_rng(0)
    x, y, y1 = rng.uniform(0.01, 1, 50), rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)
    assert np.allclose(hk.green_g(x, y, y1), hk.green_g(x, y1, y))
    assert np.max(np.abs(hk.green_g(x, 0.0, y1))) < 1e-12
    assert np.max(np.abs(hk.green_g(x, 1.0, y1))) < 1e-12


def test_semigroup():
    py, pw = panel_rule(np.linspace(0, 1, 41), 16)
    lhs = np.sum(hk.green_g(0.05, 0.3, py) * hk.green_g(0.07, py, 0.6) * pw)
    assert lhs == pytest.approx(float(hk.green_g(0.12, 0.3, 0.6)), rel=1e-10)


def test_mass_bound():
    py, pw = panel_rule(np.linspace(0, 1, 41), 16)
    for x in (1e-3, 0.1, 1.0):
        m = np.sum(hk.green_g(x, 0.5, py) * pw)
        assert 0.0 < m <= 1.0 + 1e-12


def test_cumulative_flux_closed_form():
    from scipy.integrate import quad
    ref = quad(lambda t: float(hk.flux_g0(t, 0.5)), 0, 0.25, epsabs=1e-13)[0]
    assert hk.cumulative_flux(0.25, 0.5) == pytest.approx(ref, abs=1e-10)
    assert hk.cumulative_flux(0.0, 0.3) == 0.0
    assert np.max(np.abs(hk.cumulative_flux(np.linspace(0, 1, 11), 1.0))) < 1e-12


def test_domain_and_truncation_errors():
    with pytest.raises(hk.HeatKernelDomainError, match="positive time-like"):
        hk.green_g(0.0, 0.5, 0.5)
    with pytest.raises(hk.HeatKernelDomainError):
        hk.flux_g0(-1.0, 0.5)
    with pytest.raises(hk.TruncationError):
        hk.green_g(1.0, 0.5, 0.5, hk.SeriesEvalParams(eps=1e-14, n_cap=2))
