"""Gauss-type quadrature helpers shared by the solver and spectral code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=16)
def gauss_jacobi_sqrt(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^1 s**-0.5 g(s) ds``; exact for polynomial g of degree < 2n."""
    # weight (1-x)^0 (1+x)^{-1/2} on [-1, 1]; s = (1+x)/2
    x, w = roots_jacobi(n, 0.0, -0.5)
    return 0.5 * (x + 1.0), w / np.sqrt(2.0)


def panel_rule(breaks, n: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive panels ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    t, w = gauss_legendre(n)
    h = np.diff(breaks)
    nodes = breaks[:-1, None] + h[:, None] * t[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_breaks(a: float, b: float, left: bool = True, right: bool = True,
                  levels: int = 18, ratio: float = 0.4) -> np.ndarray:
    """Panel breakpoints on [a, b], geometrically refined toward the chosen ends."""
    if b <= a:
        return np.array([a, b])
    geo = ratio ** np.arange(levels, 0, -1)
    if left and right:
        half = 0.5 * (b - a)
        pts = np.concatenate([[a], a + half * geo, [a + half], b - half * geo[::-1], [b]])
    elif left:
        pts = np.concatenate([[a], a + (b - a) * geo, [b]])
    elif right:
        pts = np.concatenate([[a], b - (b - a) * geo[::-1], [b]])
    else:
        pts = np.array([a, b])
    return pts


def graded_rule(a: float, b: float, left: bool = True, right: bool = True,
                levels: int = 18, ratio: float = 0.4, n: int = 8):
    return panel_rule(graded_breaks(a, b, left, right, levels, ratio), n)


def batched_graded_rule(a, b, left: bool = True, right: bool = True,
                        levels: int = 18, ratio: float = 0.4, n: int = 8):
    """Vectorised :func:`graded_rule` for arrays of intervals ``[a, b]``.

    Returns arrays of shape ``a.shape + (npts,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ref = graded_breaks(0.0, 1.0, left, right, levels, ratio)
    t, w = panel_rule(ref, n)
    L = (b - a)[..., None]
    return a[..., None] + L * t, L * w


def triangle_rule(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapsed tensor rule on {0 < xi < eta < 1} in characteristic coordinates.

    Returns ``(xi, eta, w)`` with weights in the (xi, eta) measure (sum 1/2).
    """
    t, w = gauss_legendre(m)
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    eta = v
    xi = u * v
    return xi.ravel(), eta.ravel(), (wu * wv * v).ravel()
