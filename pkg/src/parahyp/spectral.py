"""Traces of the squared solution operator and Nystrom eigenvalue estimates.

The operator u = int K f is Hilbert-Schmidt, so its square is trace class
and Sp = int int K(z; w) K(w; z) dw dz equals the sum of squared
eigenvalues.  Three evaluations of Sp are provided:

* ``trace_direct`` -- the double sum over a product quadrature (equal to
  trace(M @ M) for the Nystrom matrix M on the same nodes);
* ``trace_decomposed`` -- the same integral reduced to low-dimensional
  integrals of the resolvent functions E, D, H (accurate reference);
* ``sum(eigenvalues**2)`` of the Nystrom matrix.

Sector bookkeeping (p = parabolic, h = hyperbolic): the p-p product
vanishes by causality, the two mixed products are equal, so

    Sp = I1 + I2 + I3,  I1 = 2 int_p int_h K K,
    I2 = cross terms between the indicator and H parts of the h-h kernel,
    I3 = the H * H part.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import heat_kernel as hk
from .kernel import KernelEvaluator
from .quadrature import batched_graded_rule, gauss_legendre, graded_rule, triangle_rule

NODE_CAP = 2000
EIG_THRESHOLD = 1e-8
THREADS_ENV = "PARAHYP_THREADS"


class NodeCapError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class QuadratureScheme:
    """Product Gauss rules on the square and on the characteristic triangle.

    Weights are in the (x, y) area measure and sum to 1 on the square and to
    1/4 on the triangle.  The default triangle rule is the m x m Gauss tensor
    in (xi, eta) masked to xi <= eta with half weight on the diagonal, which
    keeps the area exact and puts every theta-jump of K on node ties.  The
    ``duffy`` rule (collapsed tensor) integrates polynomials exactly but its
    error on the discontinuous kernel changes sign with m.
    """

    m: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    n_parabolic: int = 0
    triangle: str = "masked"

    @classmethod
    def build(cls, m: int = 12, triangle: str = "masked") -> "QuadratureScheme":
        if m < 2:
            raise ValueError("quadrature resolution m must be >= 2")
        t, wt = gauss_legendre(m)
        X, Y = np.meshgrid(t, t, indexing="ij")
        wp = np.outer(wt, wt).ravel()
        if triangle == "masked":
            I, J = np.triu_indices(m)
            xi, eta = t[I], t[J]
            wh = wt[I] * wt[J] * np.where(I == J, 0.5, 1.0)
        elif triangle == "duffy":
            xi, eta, wh = triangle_rule(m)
        else:
            raise ValueError(f"unknown triangle rule {triangle!r}")
        xh, yh = 0.5 * (xi + eta), 0.5 * (xi - eta)
        x = np.concatenate([X.ravel(), xh])
        y = np.concatenate([Y.ravel(), yh])
        w = np.concatenate([wp, 0.5 * wh])
        return cls(m, x, y, w, m * m, triangle)

    @property
    def size(self) -> int:
        return len(self.w)

    @property
    def parabolic(self) -> slice:
        return slice(0, self.n_parabolic)

    @property
    def hyperbolic(self) -> slice:
        return slice(self.n_parabolic, self.size)

    def region_areas(self) -> tuple[float, float]:
        return float(self.w[self.parabolic].sum()), float(self.w[self.hyperbolic].sum())


# ------------------------------------------------------------------ surrogates

@dataclass(frozen=True)
class SeparableKernel:
    """Rank-one surrogate K(z; z1) = g(z) h(z1) with g = 1 + x + y, h = x (1 - y)."""

    scale: float = 1.0

    @staticmethod
    def g(x, y):
        return 1.0 + x + y

    @staticmethod
    def h(x, y):
        return x * (1.0 - y)

    def __call__(self, x, y, x1, y1):
        return self.scale * self.g(x, y) * self.h(x1, y1)

    def exact_trace(self) -> float:
        # int g h: 1/2 over the square, 49/240 over the triangle
        return (self.scale * 169.0 / 240.0) ** 2


@dataclass(frozen=True)
class ZeroKernel:
    def __call__(self, x, y, x1, y1):
        return np.zeros(np.broadcast(x, y, x1, y1).shape)

    def exact_trace(self) -> float:
        return 0.0


# ------------------------------------------------------------------ matrices

def kernel_matrix(kernel, quad: QuadratureScheme, node_cap: int = NODE_CAP) -> np.ndarray:
    """Kmat[i, j] = K(z_i; z_j) on the scheme nodes."""
    n = quad.size
    if n > node_cap:
        raise NodeCapError(f"{n} quadrature nodes exceed the cap of {node_cap}")
    if not isinstance(kernel, KernelEvaluator):
        return kernel(quad.x[:, None], quad.y[:, None], quad.x[None, :], quad.y[None, :])

    def rows(idx):
        return kernel(quad.x[idx][:, None], quad.y[idx][:, None], quad.x[None, :], quad.y[None, :])

    chunks = np.array_split(np.arange(n), max(1, n // 64))
    nt = _threads()
    if nt > 1:
        with ThreadPoolExecutor(nt) as pool:
            parts = list(pool.map(rows, chunks))
    else:
        parts = [rows(c) for c in chunks]
    return np.vstack(parts)


def nystrom_matrix(kernel, quad: QuadratureScheme, node_cap: int = NODE_CAP,
                   kmat: np.ndarray | None = None) -> np.ndarray:
    """M[i, j] = w_j K(z_i; z_j)."""
    if kmat is None:
        kmat = kernel_matrix(kernel, quad, node_cap)
    return kmat * quad.w[None, :]


def trace_direct(kernel, quad: QuadratureScheme, node_cap: int = NODE_CAP,
                 kmat: np.ndarray | None = None) -> float:
    """sum_ij w_i w_j K(z_i; z_j) K(z_j; z_i); the p-p block is skipped (zero by causality)."""
    if kmat is None:
        kmat = kernel_matrix(kernel, quad, node_cap)
    P = kmat * kmat.T * np.outer(quad.w, quad.w)
    if isinstance(kernel, KernelEvaluator):
        p = quad.parabolic
        P[p, p] = 0.0
    return float(P.sum())


def eigen_estimate(M: np.ndarray) -> np.ndarray:
    """All eigenvalues of M sorted by descending modulus."""
    if not np.all(np.isfinite(M)):
        raise EigenSolverError("matrix has non-finite entries")
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"dense eigensolver failed: {exc}") from exc
    order = np.lexsort((-lam.imag, -lam.real, -np.abs(lam)))
    return lam[order]


def significant(lam: np.ndarray, threshold: float = EIG_THRESHOLD) -> np.ndarray:
    if len(lam) == 0 or np.abs(lam[0]) == 0:
        return lam[:0]
    return lam[np.abs(lam) > threshold * np.abs(lam[0])]


# ------------------------------------------------------------------ reduced trace

class _Antiderivatives:
    """phi, int_0^u phi and its second antiderivative on [0, 1] from a sqrt-graded table."""

    def __init__(self, phi, n: int = 2001):
        s = np.linspace(0.0, 1.0, n)
        u = s * s
        # d/ds int phi = 2 s phi(s^2)
        first = CubicSpline(s, 2 * s * phi(u)).antiderivative()
        v1 = first(s)
        self._p1 = first
        self._p2 = CubicSpline(s, 2 * s * v1).antiderivative()

    def integral(self, u):
        return self._p1(np.sqrt(np.clip(u, 0.0, 1.0)))

    def integral2(self, u):
        return self._p2(np.sqrt(np.clip(u, 0.0, 1.0)))


def _flux_convolution(L, y, phi, heat, levels: int = 16):
    """int_0^L Q(L - r, y) phi(r) dr for arrays L, y."""
    L, y = np.broadcast_arrays(np.asarray(L, float), np.asarray(y, float))
    r, w = batched_graded_rule(np.zeros(L.shape), L, True, True, levels)
    q = hk.cumulative_flux(np.clip(L[..., None] - r, 0.0, None), y[..., None], heat)
    return np.sum(q * phi(r) * w, axis=-1)


def _xy_rule(n_x: int = 32, levels: int = 12):
    tx, wx = gauss_legendre(n_x)
    ty, wy = graded_rule(0.0, 1.0, True, False, levels)
    X, Y = np.meshgrid(tx, ty, indexing="ij")
    return X, Y, np.outer(wx, wy)


def trace_decomposed(ev: KernelEvaluator, n: int = 48) -> dict:
    """Sp split as I1 (mixed sectors), I2 (indicator x H), I3 (H x H).

    With A(x, y) = int_0^x Q(x - r, y) H(r) dr and B(L, y) = int_0^L Q(L - r, y) E(r) dr,

        I1 = -(1/alpha) int_0^1 int_0^1 A(x, y) B(1 - x, y) dx dy
        I2 = 1/4 int_0^1 H(s) s^2 (1 - s) / 2 ds
        I3 = 1/4 int_0^1 d eta int_0^eta d xi1 H(eta - xi1)
                 [DD(1) - DD(1 - eta) - DD(xi1)],   DD'' = H, DD(0) = DD'(0) = 0.
    """
    X, Y, W = _xy_rule()
    A = _flux_convolution(X, Y, ev.H, ev.heat)
    B = _flux_convolution(1.0 - X, Y, ev.E, ev.heat)
    I1 = -float(np.sum(A * B * W)) / ev.params.alpha

    s, ws = gauss_legendre(n)
    I2 = 0.25 * float(np.sum(ev.H(s) * s * s * (1 - s) / 2 * ws))

    anti = _Antiderivatives(ev.H)
    eta, t = np.meshgrid(s, s, indexing="ij")
    xi1 = eta * t
    wt = np.outer(ws, ws) * eta
    J = anti.integral2(1.0) - anti.integral2(1.0 - eta) - anti.integral2(xi1)
    I3 = 0.25 * float(np.sum(ev.H(eta - xi1) * J * wt))
    return {"I1": I1, "I2": I2, "I3": I3, "total": I1 + I2 + I3}


def trace_decomposed_literal(ev: KernelEvaluator, n: int = 12) -> dict:
    """I1 and I2 + I3 from the alternative closed-form reduction (diagnostic).

    Uses G3 = G1 and G4(s, y) = int_0^s G0(s - r, y) D(r) dr.  This variant
    swaps the 1/alpha and beta/alpha^2 placements and carries a different
    hyperbolic measure factor, so it does not reproduce the trace.
    """
    ratio = ev.params.ratio
    X, Y, W = _xy_rule()
    intG1 = _flux_convolution(X, Y, ev.E, ev.heat)
    intG4 = _flux_convolution(1.0 - X, Y, ev.D, ev.heat)
    intG3 = _flux_convolution(1.0 - X, Y, ev.E, ev.heat)
    I1 = 2.0 / ev.params.alpha * float(np.sum(intG1 * (intG4 + ratio * intG3) * W))

    C = lambda u: ev.E(u) - 1.0
    t, wt = gauss_legendre(n)

    def seg(a, b):
        a, b = np.broadcast_arrays(a, b)
        L = np.clip(b - a, 0.0, None)
        return a[..., None] + L[..., None] * t, L[..., None] * wt

    total = 0.0
    # eta in (0, 1), xi in (0, eta), xi1 in (0, eta) split at xi, eta1 in (max(xi1, xi), 1) split at eta
    e, we = t, wt
    for ie in range(n):
        ev_eta = e[ie]
        xi, wx = ev_eta * t, ev_eta * wt
        for lo, hi in ((np.zeros(n), xi), (xi, np.full(n, ev_eta))):
            x1, w1 = seg(lo, hi)                    # (n_xi, n)
            start = np.maximum(x1, xi[:, None])
            for a, b in ((start, np.maximum(start, ev_eta)), (np.maximum(start, ev_eta), np.ones_like(start))):
                y1, w2 = seg(a, b)                  # (n_xi, n, n)
                XI = xi[:, None, None]
                X1 = x1[..., None]
                left = ev.E(y1 - XI) + ratio * C(ev_eta - X1)
                right = (ev.E(ev_eta - X1) + ratio * (C(y1 - XI) - C(y1 - ev_eta))
                         - ((X1 > XI) & (y1 > ev_eta)))
                val = left * right * w2
                total += we[ie] * np.sum(wx[:, None] * w1 * val.sum(axis=-1))
    return {"I1": I1, "I2_plus_I3": float(0.25 * total)}


# ------------------------------------------------------------------ report

def lidskii_gap(lam: np.ndarray, trace: float) -> float:
    """|sum lam^2 - trace| / |trace|, defined as 0 when both vanish."""
    s = float(np.sum(np.asarray(lam) ** 2).real)
    if trace == 0.0:
        return 0.0 if s == 0.0 else float("inf")
    return abs(s - trace) / abs(trace)


def positivity_audit(ev: KernelEvaluator, decomposed: dict | None, trace_gaal: float | None,
                     n_gamma: int = 100, n_flux: int = 50) -> dict:
    """Sampled positivity checks; entries are True, False or "skipped"."""
    a, b = ev.params.alpha, ev.params.beta
    flags: dict = {}
    s = np.linspace(0.0, 1.0, n_gamma)
    eta, xi1 = np.meshgrid(s, s, indexing="ij")
    gap = (eta - xi1)[eta >= xi1]
    flags["gamma1_ge_1"] = bool(np.min(ev.E(gap)) >= 1.0 - 1e-12)
    u = np.linspace(0.0, 1.0, 201)[1:]
    flags["gamma_positive"] = bool(np.min(ev.gamma(u)) > 0.0)
    xs = np.linspace(0.0, 1.0, n_flux + 1)[1:]
    ys = np.linspace(0.0, 1.0, n_flux)
    Xs, Ys = np.meshgrid(xs, ys, indexing="ij")
    q = hk.cumulative_flux(Xs, Ys, ev.heat)
    flags["cumulative_flux_nonneg"] = bool(np.min(q) >= -1e-10 and np.max(np.abs(q[:, -1])) <= 1e-10)
    gated = a > 0 and b > 0
    if not gated or decomposed is None:
        for k in ("I1_positive", "I2_plus_I3_positive", "trace_positive"):
            flags[k] = "skipped"
        return flags
    flags["I1_positive"] = bool(decomposed["I1"] > 0)
    flags["I2_plus_I3_positive"] = bool(decomposed["I2"] + decomposed["I3"] > 0)
    flags["trace_positive"] = bool(decomposed["total"] > 0 and (trace_gaal is None or trace_gaal > 0))
    return flags


@dataclass
class SpectralReport:
    m: int
    alpha: float | None
    beta: float | None
    trace_gaal: float
    I1: float | None
    I2: float | None
    I3: float | None
    eigenvalues: np.ndarray
    lidskii_gap: float
    lidskii_gap_reference: float | None
    positivity_flags: dict
    literal: dict | None = None
    threshold: float = EIG_THRESHOLD
    kernel: str = "problem"

    @property
    def trace_decomposed(self) -> float | None:
        if self.I1 is None:
            return None
        return self.I1 + self.I2 + self.I3

    @property
    def significant_eigenvalues(self) -> np.ndarray:
        return significant(self.eigenvalues, self.threshold)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "m": self.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "trace_gaal": self.trace_gaal,
            "I1": self.I1,
            "I2": self.I2,
            "I3": self.I3,
            "trace_decomposed": self.trace_decomposed,
            "lidskii_gap": self.lidskii_gap,
            "lidskii_gap_reference": self.lidskii_gap_reference,
            "eigenvalue_threshold": self.threshold,
            "n_significant": int(len(self.significant_eigenvalues)),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "positivity_flags": self.positivity_flags,
            "literal_formulas": self.literal,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def run_spectrum(kernel, m: int = 12, node_cap: int = NODE_CAP, triangle: str = "masked",
                 threshold: float = EIG_THRESHOLD, literal: bool = True) -> SpectralReport:
    """Trace, decomposition, Nystrom spectrum and audits for one scheme.

    ``lidskii_gap`` compares sum lam^2 with the double-sum trace on the same
    nodes (an algebraic identity for the matrix, so it measures round-off and
    the eigenvalue cut).  ``lidskii_gap_reference`` compares it with the
    converged reduced trace (or the exact surrogate trace) and so measures
    how well the discretised spectrum represents the operator.
    """
    quad = QuadratureScheme.build(m, triangle)
    kmat = kernel_matrix(kernel, quad, node_cap)
    tr = trace_direct(kernel, quad, kmat=kmat)
    lam = eigen_estimate(nystrom_matrix(kernel, quad, kmat=kmat))
    kept = significant(lam, threshold)
    gap = lidskii_gap(kept, tr)
    if isinstance(kernel, KernelEvaluator):
        dec = trace_decomposed(kernel)
        lit = trace_decomposed_literal(kernel) if literal else None
        flags = positivity_audit(kernel, dec, tr)
        return SpectralReport(m, kernel.params.alpha, kernel.params.beta, tr, dec["I1"], dec["I2"],
                              dec["I3"], lam, gap, lidskii_gap(kept, dec["total"]), flags, lit,
                              threshold)
    exact = kernel.exact_trace()
    return SpectralReport(m, None, None, tr, None, None, None, lam, gap, lidskii_gap(kept, exact),
                          {}, None, threshold, type(kernel).__name__)
