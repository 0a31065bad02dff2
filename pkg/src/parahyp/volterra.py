"""Second-kind Volterra equations with weakly singular convolution kernels.

Solves

    phi(x) + sign * int_0^x k(x - t) phi(t) dt = F(x),    0 <= x <= 1,

for kernels of the form ``k(x) = a / sqrt(pi x) + s(x)`` with ``s`` bounded,
and builds the resolvent ``Gamma = sum_j k_j`` of the minus-sign equation
from the iterated kernels ``k_{j+1} = k_1 * k_j``.

Discretisation: product integration on the graded mesh ``x_i = (i/(N-1))**3``
with piecewise-cubic Lagrange interpolation of the unknown.  Interval moments
of the ``(x - t)**-1/2`` factor are computed by Gauss-Jacobi quadrature on the
interval touching the singularity and by Gauss-Legendre elsewhere; both are
exact (to rounding) for the polynomial interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_triangular

from . import heat_kernel as hk
from .quadrature import gauss_jacobi_sqrt, gauss_legendre

SQRT_PI = math.sqrt(math.pi)


class VolterraError(RuntimeError):
    pass


class ConvergenceError(VolterraError):
    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


class SingularStepError(VolterraError):
    pass


class DivergenceError(VolterraError):
    pass


class GridMismatchError(ValueError):
    pass


def graded_nodes(n: int = 512, grading: float = 3.0) -> np.ndarray:
    if n < 16:
        raise ValueError("Volterra grid needs at least 16 nodes")
    return np.linspace(0.0, 1.0, n) ** grading


@dataclass(frozen=True)
class GridFunction1D:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise GridMismatchError("nodes and values must be 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.nodes)

    def spline(self) -> Callable:
        """Cubic spline in sqrt(x); resolves sqrt-type behaviour at x = 0."""
        v = np.sqrt(self.nodes)
        cs = CubicSpline(v, self.values)
        return lambda x: cs(np.sqrt(np.asarray(x, dtype=float)))

    def integral(self) -> "GridFunction1D":
        """Running integral int_0^x (exact for the sqrt(x)-cubic interpolant)."""
        v = np.sqrt(self.nodes)
        cs = CubicSpline(v, self.values * 2.0 * v).antiderivative()
        return GridFunction1D(self.nodes, cs(v) - cs(v[0]))


@dataclass(frozen=True)
class SingularConvolutionKernel:
    """k(x) = singular_coefficient / sqrt(pi x) + smooth_part(x) + constant_shift."""

    singular_coefficient: float = 0.0
    smooth_part: Optional[Callable] = None
    constant_shift: float = 0.0

    def smooth(self, x):
        x = np.asarray(x, dtype=float)
        s = np.full(x.shape, float(self.constant_shift))
        if self.smooth_part is not None:
            s = s + self.smooth_part(x)
        return s

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            sing = self.singular_coefficient / np.sqrt(np.pi * x)
        return sing + self.smooth(x)

    @classmethod
    def constant(cls, c: float) -> "SingularConvolutionKernel":
        return cls(0.0, None, c)

    @classmethod
    def abel(cls, a: float = 1.0) -> "SingularConvolutionKernel":
        return cls(a, None, 0.0)

    @classmethod
    def problem(cls, alpha: float, beta: float,
                params: hk.SeriesEvalParams = hk.DEFAULT_PARAMS) -> "SingularConvolutionKernel":
        """k1 = (k + beta) / alpha with k the boundary kernel of the strip."""
        if alpha == 0:
            raise ValueError("kernel k1 requires alpha != 0")
        return cls(1.0 / alpha, lambda x: hk.boundary_kernel_smooth(x, params) / alpha, beta / alpha)

    def check_smooth(self, n: int = 257) -> bool:
        return bool(np.all(np.isfinite(self.smooth(np.linspace(0.0, 1.0, n)))))


def _lagrange(t, z):
    """Lagrange basis on nodes z (..., p+1) evaluated at t (..., q) -> (..., q, p+1)."""
    p1 = z.shape[-1]
    out = []
    for k in range(p1):
        b = np.ones(np.broadcast_shapes(t.shape, z.shape[:-1] + (1,)))
        for m in range(p1):
            if m != k:
                b = b * (t - z[..., m, None]) / (z[..., k, None] - z[..., m, None])
        out.append(b)
    return np.stack(out, axis=-1)


class ProductIntegrator:
    """Weights W with (W phi)_i ~ int_0^{x_i} k(x_i - t) phi(t) dt.

    ``phi`` is interpolated on each interval by a degree-``degree`` Lagrange
    polynomial through neighbouring nodes, never reaching beyond x_i.
    """

    def __init__(self, nodes, degree: int = 3, n_gauss: int = 10):
        nodes = np.asarray(nodes, dtype=float)
        if len(nodes) < degree + 2 or nodes[0] != 0.0:
            raise ValueError("product integration needs more nodes, starting at 0")
        self.nodes = nodes
        self.degree = degree
        self.h = np.diff(nodes)
        tg, wg = gauss_legendre(n_gauss)
        self.tq = nodes[:-1, None] + self.h[:, None] * tg
        self.wq = self.h[:, None] * wg
        self.sj, self.wj = gauss_jacobi_sqrt(n_gauss)
        self._singular = None
        self._interior = None

    def _stencil(self, j, i):
        """First node of the interpolation stencil for interval j in row i."""
        p = min(self.degree, i)
        return np.clip(j - (p - 1) // 2, 0, i - p), p

    def _basis_vals(self, i):
        # basis values for intervals j < i at GL points, plus Jacobi points of the last one
        j = np.arange(i)
        base, p = self._stencil(j, i)
        if p == self.degree:
            if self._interior is None:
                jj = np.arange(len(self.nodes) - 1)
                b0 = np.clip(jj - (p - 1) // 2, 0, None)
                b0 = np.minimum(b0, len(self.nodes) - 1 - p)
                z0 = self.nodes[b0[:, None] + np.arange(p + 1)]
                self._interior = (b0, _lagrange(self.tq, z0))
            b0, L0 = self._interior
            Lg = L0[:i].copy()
            changed = np.nonzero(b0[:i] != base)[0]
        else:
            Lg = np.empty((i, self.tq.shape[1], p + 1))
            changed = j
        z = self.nodes[base[:, None] + np.arange(p + 1)]
        if len(changed):
            Lg[changed] = _lagrange(self.tq[changed], z[changed])
        tj = self.nodes[i] - self.h[i - 1] * self.sj
        LJ = _lagrange(tj[None, :], z[-1:])[0]
        return base, p, Lg, LJ

    def _assemble(self, weight_fn, jacobi: bool) -> np.ndarray:
        x = self.nodes
        n = len(x)
        W = np.zeros((n, n))
        for i in range(1, n):
            base, p, Lg, LJ = self._basis_vals(i)
            last = i - 1 if jacobi else i
            if last > 0:
                vals = weight_fn(x[i] - self.tq[:last]) * self.wq[:last]
                c = np.einsum("jq,jqk->jk", vals, Lg[:last])
                idx = base[:last, None] + np.arange(p + 1)
                W[i] += np.bincount(idx.ravel(), c.ravel(), minlength=n)
            if jacobi:
                H = self.h[i - 1]
                s = H * self.sj
                g = np.sqrt(H) * self.wj * weight_fn(s) * np.sqrt(s)
                W[i, base[-1]:base[-1] + p + 1] += g @ LJ
        return W

    def singular_matrix(self) -> np.ndarray:
        """Weights for the kernel 1/sqrt(pi x)."""
        if self._singular is None:
            self._singular = self._assemble(lambda s: 1.0 / np.sqrt(np.pi * s), jacobi=True)
        return self._singular

    def smooth_matrix(self, fn: Callable) -> np.ndarray:
        return self._assemble(fn, jacobi=False)

    def matrix(self, kernel: SingularConvolutionKernel) -> np.ndarray:
        W = self.smooth_matrix(kernel.smooth)
        if kernel.singular_coefficient != 0.0:
            W = W + kernel.singular_coefficient * self.singular_matrix()
        return W


_INTEGRATORS: dict = {}


def integrator_for(nodes) -> ProductIntegrator:
    nodes = np.asarray(nodes, dtype=float)
    key = (len(nodes), nodes.tobytes())
    pi = _INTEGRATORS.get(key)
    if pi is None:
        if len(_INTEGRATORS) > 8:
            _INTEGRATORS.clear()
        pi = _INTEGRATORS[key] = ProductIntegrator(nodes)
    return pi


def solve_collocation(k1: SingularConvolutionKernel, F: GridFunction1D, sign: int = 1) -> GridFunction1D:
    """Solve phi + sign * (k1 * phi) = F on the nodes of F by forward substitution."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    W = integrator_for(F.nodes).matrix(k1)
    A = np.eye(len(F)) + sign * W
    diag = np.diag(A)
    if np.any(np.abs(diag) < 1e-12):
        raise SingularStepError("near-zero diagonal weight in forward substitution")
    phi = solve_triangular(A, F.values, lower=True)
    return GridFunction1D(F.nodes, phi)


def discrete_residual(k1: SingularConvolutionKernel, phi: GridFunction1D, F: GridFunction1D, sign: int) -> float:
    W = integrator_for(F.nodes).matrix(k1)
    return float(np.max(np.abs(phi.values + sign * (W @ phi.values) - F.values)))


@dataclass
class ResolventKernel:
    """Resolvent Gamma = sum_j k_j of phi - k1 * phi = F, stored on a grid.

    ``Gamma(x) = a / sqrt(pi x) + regular(x)`` where ``regular`` collects the
    smooth part of k1 and all iterated kernels k_j, j >= 2 (which are bounded).
    """

    nodes: np.ndarray
    singular_coefficient: float
    smooth: Callable
    iterated: list
    regular_values: np.ndarray
    truncation_error_bound: float
    ratios: list = field(default_factory=list)

    def __post_init__(self):
        v = np.sqrt(self.nodes)
        self._reg = CubicSpline(v, self.regular_values)
        c1 = CubicSpline(v, self.regular_values * 2 * v).antiderivative()
        self._rint = c1
        c2 = CubicSpline(v, (c1(v) - c1(0)) * 2 * v).antiderivative()
        self._rint2 = c2

    @property
    def gamma(self) -> GridFunction1D:
        vals = self.regular_values.copy()
        with np.errstate(divide="ignore"):
            vals = vals + self.singular_coefficient / np.sqrt(np.pi * self.nodes)
        if self.singular_coefficient == 0:
            vals[0] = self.regular_values[0]
        return GridFunction1D(self.nodes, vals)

    def regular(self, x):
        return self._reg(np.sqrt(np.asarray(x, dtype=float)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.singular_coefficient / np.sqrt(np.pi * x) + self.regular(x)

    def as_kernel(self) -> SingularConvolutionKernel:
        return SingularConvolutionKernel(self.singular_coefficient, self.regular, 0.0)

    def cumulative(self, u):
        """C(u) = int_0^u Gamma."""
        u = np.asarray(u, dtype=float)
        v = np.sqrt(np.clip(u, 0.0, None))
        return 2 * self.singular_coefficient * v / SQRT_PI + self._rint(v) - self._rint(0.0)

    def gamma1_of_gap(self, u):
        """Gamma_1 as a function of x - t: E(u) = 1 + C(u)."""
        return 1.0 + self.cumulative(u)

    def gamma1_integral(self, u):
        """D(u) = int_0^u E = int_{x-u}^x Gamma_1(x, t) dt."""
        u = np.asarray(u, dtype=float)
        v = np.sqrt(np.clip(u, 0.0, None))
        return (u + 4 * self.singular_coefficient * v ** 3 / (3 * SQRT_PI)
                + self._rint2(v) - self._rint2(0.0))


def iterated_kernels(k1: SingularConvolutionKernel, J: int = 40, nodes=None,
                     rtol: float = 1e-10) -> ResolventKernel:
    """Iterated kernels k_1..k_J and their sum on the grid.

    Stops early once the geometric tail bound on the remaining terms falls
    below ``rtol`` relative to the partial sum.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if nodes is None:
        nodes = graded_nodes()
    nodes = np.asarray(nodes, dtype=float)
    if len(nodes) < 16:
        raise ValueError("Volterra grid needs at least 16 nodes")
    pi = integrator_for(nodes)
    a = k1.singular_coefficient
    s = k1.smooth(nodes)
    with np.errstate(divide="ignore"):
        k_first = a / np.sqrt(np.pi * nodes) + s if a != 0 else s.copy()
    iterated = [k_first]
    tail = np.zeros_like(nodes)
    bound = 0.0
    ratios: list = []
    if J >= 2:
        Wsing = pi.singular_matrix()
        Wsm = pi.smooth_matrix(k1.smooth)
        Wfull = a * Wsing + Wsm
        kj = a * a + 2 * a * (Wsing @ s) + Wsm @ s
        iterated.append(kj)
        tail += kj
        prev = np.max(np.abs(kj))
        converged = False
        for _ in range(3, J + 1):
            kj = Wfull @ kj
            iterated.append(kj)
            tail += kj
            cur = np.max(np.abs(kj))
            r = cur / prev if prev > 0 else 0.0
            ratios.append(r)
            prev = cur
            scale = max(1.0, np.max(np.abs(tail + s)))
            if cur == 0.0:
                bound = 0.0
                converged = True
                break
            if r < 1:
                bound = cur * r / (1 - r)
                if bound < rtol * scale:
                    converged = True
                    break
            else:
                bound = math.inf
        if not converged and ratios and ratios[-1] >= 1:
            raise ConvergenceError(f"iterated kernels not decaying at j={J}: ratio {ratios[-1]:.3g}",
                                   ratios[-1])
    return ResolventKernel(nodes, a, k1.smooth, iterated, s + tail, bound, ratios)


def gamma1(res: ResolventKernel, x, t):
    """Gamma_1(x, t) = 1 + int_t^x Gamma(z - t) dz for 0 <= t <= x <= 1."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t > x):
        raise ValueError("gamma1 requires t <= x")
    return res.gamma1_of_gap(x - t)


def apply_resolvent(res: ResolventKernel, F: GridFunction1D) -> GridFunction1D:
    """F(x) + int_0^x Gamma(x - t) F(t) dt on the resolvent grid."""
    if len(F.nodes) != len(res.nodes) or not np.allclose(F.nodes, res.nodes, rtol=0, atol=1e-15):
        raise GridMismatchError("F must live on the resolvent grid")
    W = integrator_for(res.nodes).matrix(res.as_kernel())
    return GridFunction1D(F.nodes, F.values + W @ F.values)


def _linear_singular_weights(x):
    """Product-trapezoid weights for int_0^{x_i} (x_i - t)^-1/2 phi(t) dt."""
    n = len(x)
    A = np.zeros((n, n))
    xi = x[:, None]
    a = np.clip(xi - x[None, 1:], 0, None)
    b = np.clip(xi - x[None, :-1], 0, None)
    h = np.diff(x)[None, :]
    I0 = 2 * (np.sqrt(b) - np.sqrt(a))
    I1 = (2.0 / 3.0) * (b ** 1.5 - a ** 1.5)
    A[:, :-1] += (I1 - a * I0) / h
    A[:, 1:] += (b * I0 - I1) / h
    return A


def picard_oracle(k1: SingularConvolutionKernel, F: GridFunction1D, sign: int = 1,
                  iterations: int = 60, n_fine: int = 2048) -> GridFunction1D:
    """Fixed-point iteration phi <- F - sign * (k1 * phi) on a fine grid.

    Independent of :func:`solve_collocation`: piecewise-linear product
    integration for the singular part and the trapezoid rule for the smooth
    part.  Used as a test oracle.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    xf = graded_nodes(n_fine)
    Ff = F.spline()(xf)
    W = k1.singular_coefficient / SQRT_PI * _linear_singular_weights(xf)
    d = np.clip(xf[:, None] - xf[None, :], 0.0, None)
    S = np.tril(k1.smooth(d))
    tw = np.zeros((n_fine, n_fine))
    h = np.diff(xf)
    for i in range(1, n_fine):
        tw[i, :i] += 0.5 * h[:i]
        tw[i, 1:i + 1] += 0.5 * h[:i]
    W = W + S * tw
    phi = Ff.copy()
    growth = 0
    last = math.inf
    for m in range(iterations):
        new = Ff - sign * (W @ phi)
        diff = np.max(np.abs(new - phi))
        phi = new
        if not np.all(np.isfinite(phi)):
            raise DivergenceError("Picard iteration produced non-finite values")
        growth = growth + 1 if diff > last else 0
        last = diff
        if growth >= 5 and m >= iterations // 2:
            raise DivergenceError(f"Picard iteration diverging (step {m}, change {diff:.3g})")
        if diff == 0.0:
            break
    out = GridFunction1D(xf, phi).spline()(F.nodes)
    return GridFunction1D(F.nodes, out)
