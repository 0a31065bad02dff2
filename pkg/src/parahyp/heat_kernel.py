"""Dirichlet heat kernel of the unit strip 0 < y < 1 and its derived kernels.

The parabolic variable ``x`` plays the role of time.  All evaluators are
vectorised with numpy broadcasting and accept scalars or arrays.

    G(x, y, y1)  = (4 pi x)^-1/2 sum_n [exp(-(y-y1+2n)^2/4x) - exp(-(y+y1+2n)^2/4x)]
    G0(x, y1)    = dG/dy at y = 0
                 = (2 sqrt(pi) x^3/2)^-1 sum_n (y1+2n) exp(-(y1+2n)^2/4x)
    k(x)         = (pi x)^-1/2 sum_n exp(-n^2/x)
    Q(xi, y)     = int_0^xi G0(t, y) dt = sum_n sign(y+2n) erfc(|y+2n| / 2 sqrt(xi))

The flux kernel uses the squared exponent; the version with an unsquared
exponent is not the y-derivative of G and diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

SQRT_PI = math.sqrt(math.pi)


class HeatKernelDomainError(ValueError):
    """Raised for a non-positive time-like argument."""


class TruncationError(RuntimeError):
    """The image series would need more terms than ``n_cap`` allows."""

    def __init__(self, needed: int, n_cap: int):
        super().__init__(f"image series needs N={needed} terms but n_cap={n_cap}")
        self.needed = needed
        self.n_cap = n_cap


@dataclass(frozen=True)
class SeriesEvalParams:
    eps: float = 1e-14
    n_cap: int = 64

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n_cap < 1:
            raise ValueError("n_cap must be >= 1")

    def terms(self, x) -> int:
        """Image index N with exp(-N^2/x) < eps for every x <= max(x)."""
        xmax = float(np.max(x)) if np.size(x) else 1e-12
        n = math.ceil(math.sqrt(max(xmax, 1e-12) * math.log(1.0 / self.eps))) + 1
        if n > self.n_cap:
            raise TruncationError(n, self.n_cap)
        return n


DEFAULT_PARAMS = SeriesEvalParams()


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise HeatKernelDomainError("heat kernel requires positive time-like argument")
    return x


def _images(params, x):
    # one extra image on each side covers the y, y1 offsets inside [0, 1]
    n = params.terms(x) + 1
    return np.arange(-n, n + 1, dtype=float)


def green_g(x, y, y1, params: SeriesEvalParams = DEFAULT_PARAMS):
    """Dirichlet Green's function G(x, y, y1) of the heat operator on the strip."""
    x = _check_positive(x)
    x, y, y1 = np.broadcast_arrays(x, np.asarray(y, float), np.asarray(y1, float))
    n2 = 2.0 * _images(params, x)
    xe = x[..., None]
    a = (y - y1)[..., None] + n2
    b = (y + y1)[..., None] + n2
    s = np.exp(-a * a / (4 * xe)) - np.exp(-b * b / (4 * xe))
    return s.sum(axis=-1) / (2.0 * np.sqrt(np.pi * x))


def flux_g0(x, y1, params: SeriesEvalParams = DEFAULT_PARAMS):
    """Boundary flux kernel G0(x, y1) = G_y(x, 0, y1) (equal to G_{y1}(x, y1, 0))."""
    x = _check_positive(x)
    x, y1 = np.broadcast_arrays(x, np.asarray(y1, float))
    c = y1[..., None] + 2.0 * _images(params, x)
    s = (c * np.exp(-c * c / (4 * x[..., None]))).sum(axis=-1)
    return s / (2.0 * SQRT_PI * x ** 1.5)


def boundary_kernel_k(x, params: SeriesEvalParams = DEFAULT_PARAMS):
    """k(x) = (pi x)^-1/2 sum_n exp(-n^2/x)."""
    x = _check_positive(x)
    n = _images(params, x)
    s = np.exp(-(n * n) / x[..., None]).sum(axis=-1)
    return s / np.sqrt(np.pi * x)


def boundary_kernel_smooth(x, params: SeriesEvalParams = DEFAULT_PARAMS):
    """Smooth part k(x) - (pi x)^-1/2; extended by 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise HeatKernelDomainError("heat kernel requires positive time-like argument")
    xs = np.where(x > 0, x, 1.0)
    n = np.arange(1, _images(params, xs)[-1] + 1, dtype=float)
    s = 2.0 * np.exp(-(n * n) / xs[..., None]).sum(axis=-1) / np.sqrt(np.pi * xs)
    return np.where(x > 0, s, 0.0)


def cumulative_flux(xi, y, params: SeriesEvalParams = DEFAULT_PARAMS):
    """Q(xi, y) = int_0^xi G0(t, y) dt in closed erfc-difference form.

    Non-negative, and identically zero on the wall y = 1.  ``xi = 0`` is
    accepted and returns 0.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise HeatKernelDomainError("heat kernel requires positive time-like argument")
    xi, y = np.broadcast_arrays(xi, np.asarray(y, float))
    xs = np.where(xi > 0, xi, 1.0)
    c = y[..., None] + 2.0 * _images(params, xs)
    q = (np.sign(c) * erfc(np.abs(c) / (2.0 * np.sqrt(xs[..., None])))).sum(axis=-1)
    return np.where(xi > 0, q, 0.0)
