import numpy as np
import pytest

from parahyp.source import (PRESETS, SourceField, SumSource, from_characteristic,
                            in_hyperbolic, in_parabolic, to_characteristic)


def test_characteristic_round_trip():
    x, y = np.array([0.3, 0.7]), np.array([-0.1, -0.2])
    xi, eta = to_characteristic(x, y)
    assert np.allclose(xi, [0.2, 0.5]) and np.allclose(eta, [0.4, 0.9])
    assert np.allclose(np.stack(from_characteristic(xi, eta)), np.stack([x, y]))


def test_region_membership():
    assert in_parabolic(0.5, 0.5) and not in_parabolic(0.5, -0.1)
    assert in_hyperbolic(0.5, -0.2) and not in_hyperbolic(0.1, -0.3)


def test_support_restrictions():
    f = SourceField("constant", (4.0,), "hyperbolic_only")
    assert f(0.5, 0.5) == 0.0
    assert f(0.5, -0.1) == 4.0
    assert f.f1(0.2, 0.6) == pytest.approx(1.0)
    g = SourceField("constant", (2.0,), "parabolic_only")
    assert g(0.5, 0.5) == 2.0 and g(0.5, -0.1) == 0.0


def test_polynomial_and_scaling():
    f = SourceField("polynomial", ((1, 0, 1.0), (0, 1, 1.0), (0, 0, 1.0)))
    assert f(0.2, 0.3) == pytest.approx(1.5)
    assert f.scaled(-2.0)(0.2, 0.3) == pytest.approx(-3.0)


def test_sum_and_round_trip():
    a = SourceField("gaussian_bump", (1.0, 0.5, 0.5, 0.1))
    b = SourceField("separable_product", (2.0, 1.0, 0.0, 3.0, 0.5))
    s = SumSource((a, b))
    assert s(0.4, 0.1) == pytest.approx(a(0.4, 0.1) + b(0.4, 0.1))
    assert SourceField.from_dict(b.to_dict()) == b


def test_validation():
    with pytest.raises(ValueError, match="unknown source kind"):
        SourceField("cubic")
    with pytest.raises(ValueError):
        SourceField("constant", (1.0, 2.0))
    assert "zero" in PRESETS
