import dataclasses

import numpy as np
import pytest

from parahyp import heat_kernel as hk
from parahyp import problem_b as pb
from parahyp.kernel import (ConstantResolvent, DELTA_FLOOR, apply_kernel, kernel_K,
                            sector)
from parahyp.source import SourceField


@pytest.mark.parametrize("pt,name", [
    ((0.6, 0.3, 0.2, 0.5), "parabolic-parabolic"),
    ((0.6, 0.3, 0.2, -0.1), "parabolic-hyperbolic"),
    ((0.7, -0.1, 0.2, 0.5), "hyperbolic-parabolic"),
    ((0.7, -0.1, 0.2, -0.1), "hyperbolic-hyperbolic"),
    ((0.2, 0.3, 0.6, 0.5), "parabolic-parabolic (causal zero)"),
    ((0.2, -0.1, 0.6, 0.5), "hyperbolic-parabolic (causal zero)"),
])
def test_sector_labels(pt, name):
    assert sector(*pt) == name


def test_causal_zeros(ev11):
    assert kernel_K(0.2, 0.3, 0.6, 0.5, ev11) == 0.0
    assert kernel_K(0.3, 0.5, 0.3, 0.2, ev11) == 0.0  # d = 0 tie
    assert kernel_K(0.1, 0.5, 0.3, -0.1, ev11) == 0.0
    assert kernel_K(0.3, -0.1, 0.5, 0.5, ev11) == 0.0


def test_proximity_floor(ev11):
    with pytest.raises(pb.ProximityError):
        kernel_K(0.5 + DELTA_FLOOR / 2, 0.3, 0.5, 0.6, ev11)


def test_pp_reduces_to_green_for_small_lag(ev11):
    # the boundary correction is O(d) for y, y1 away from the wall
    d = 1e-3
    K = kernel_K(0.5 + d, 0.5, 0.5, 0.5, ev11)
    assert K == pytest.approx(float(hk.green_g(d, 0.5, 0.5)), rel=1e-3)


def test_hp_sign(ev11):
    assert kernel_K(0.8, -0.1, 0.2, 0.4, ev11) < 0


@pytest.mark.parametrize("c,r", [(0.0, 1.0), (0.7, 2.0)])
def test_hh_with_constant_resolvent(ev11, c, r):
    ev = dataclasses.replace(ev11, params=pb.TransmissionParams(1.0, r),
                             resolvent=ConstantResolvent(c), _tables={})
    xi, eta, xi1, eta1 = 0.1, 0.7, 0.3, 0.8
    u = eta - xi1
    H = -(1 + c * u) + r * (u + c * u * u / 2)
    assert ev.K_hh(xi, eta, xi1, eta1) == pytest.approx(0.5 + H, abs=1e-14)
    assert ev.K_hh(xi, eta, 0.05, 0.8) == pytest.approx(-(1 + c * 0.65) + r * (0.65 + c * 0.65 ** 2 / 2))


def test_reproducibility(ev11):
    a = kernel_K(0.6, 0.3, 0.2, -0.1, ev11)
    b = kernel_K(0.6, 0.3, 0.2, -0.1, ev11)
    assert a == b


@pytest.mark.parametrize("x,y", [(0.6, 0.4), (0.7, -0.2)])
def test_kernel_reproduces_representation(ev11, x, y):
    f = SourceField("gaussian_bump", (1.0, 0.5, 0.2, 0.25))
    tr = pb.solve_tau(f, ev11.params, 512)
    u = float(pb.evaluate_u(x, y, f, tr))
    v = apply_kernel(ev11, f, x, y)["total"]
    assert v == pytest.approx(u, rel=2e-3)
