"""Problem B: assemble F, solve for the trace tau = u(x, 0), rebuild u.

Geometry.  The parabolic part is the unit square 0 < x, y < 1 where
``u_x - u_yy = f`` (x is time-like).  The hyperbolic part is the triangle
below y = 0 bounded by x + y = 0 and x - y = 1, where ``u_xx - u_yy = f``;
in characteristic coordinates xi = x + y, eta = x - y it is
{0 < xi < eta < 1} and the equation reads ``u_{xi eta} = f1``.

Gluing.  Eliminating nu1 = u_y(x, +0) and nu2 = u_y(x, -0) from the
transmitting condition nu1 = alpha nu2 - beta int_0^x nu2 gives

    tau'(x) - int_0^x k1(x - t) tau'(t) dt = F(x),   k1 = (k + beta) / alpha,

i.e. the Volterra equation with a minus sign; its resolvent is the
all-positive series Gamma = sum k_j and tau(x) = int_0^x Gamma1(x, t) F(t) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import heat_kernel as hk
from . import volterra as vt
from .quadrature import batched_graded_rule, gauss_legendre, panel_rule, triangle_rule
from .source import SourceField

VOLTERRA_SIGN = -1


class ProblemBError(ValueError):
    pass


class UnsupportedParameterError(ProblemBError):
    pass


class AccuracyError(RuntimeError):
    pass


class ProximityError(ValueError):
    pass


@dataclass(frozen=True)
class TransmissionParams:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha ** 2 + self.beta ** 2 <= 0:
            raise ProblemBError("transmission parameters need alpha^2 + beta^2 > 0")

    def require_solvable(self):
        if self.alpha == 0:
            raise UnsupportedParameterError("the solver requires alpha != 0")

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha


@dataclass(frozen=True)
class Grids:
    parabolic_nx: int = 32
    parabolic_ny: int = 32
    char_n: int = 32
    volterra_n: int = 512

    def refined(self) -> "Grids":
        return Grids(2 * self.parabolic_nx, 2 * self.parabolic_ny, 2 * self.char_n,
                     2 * self.volterra_n)


# ---------------------------------------------------------------- Phi0 and F

def _flux_inner(s, x1, f, heat, n_panels, n_gauss):
    """int_0^1 G0(s, y1) f(x1, y1) dy1 for arrays s, x1 of equal shape."""
    L = np.minimum(1.0, 14.0 * np.sqrt(s))
    t, w = panel_rule(np.linspace(0.0, 1.0, n_panels + 1), n_gauss)
    y1 = L[..., None] * t
    wy = L[..., None] * w
    vals = hk.flux_g0(s[..., None], y1, heat) * f.parabolic(x1[..., None], y1)
    return np.sum(vals * wy, axis=-1)


def _phi0_at(x, f, heat, n_w, n_panels, n_gauss):
    x = np.asarray(x, dtype=float)
    tw, ww = gauss_legendre(n_w)
    r = np.sqrt(x)[..., None]
    w = r * tw
    s = w * w
    inner = _flux_inner(s, x[..., None] - s, f, heat, n_panels, n_gauss)
    return np.sum(2.0 * w * inner * (r * ww), axis=-1)


def phi0(x, f: SourceField, heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS,
         tol: float = 1e-6, n_w: int = 48):
    """Phi0(x) = int_0^x dx1 int_0^1 G0(x - x1, y1) f(x1, y1) dy1.

    Uses x1 = x - w**2 (removes the inverse-square-root singularity at
    x1 = x) and a window of width ~14 sqrt(x - x1) in y1.  The result is
    compared with a twice-refined evaluation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise hk.HeatKernelDomainError("heat kernel requires positive time-like argument")
    out = np.zeros_like(x)
    if not f.has_parabolic:
        return out
    pos = x > 0
    xp = x[pos]
    coarse = np.concatenate([_phi0_at(c, f, heat, n_w, 6, 8) for c in np.array_split(xp, max(1, len(xp) // 64))]) if len(xp) else xp
    fine = np.concatenate([_phi0_at(c, f, heat, 2 * n_w, 6, 16) for c in np.array_split(xp, max(1, len(xp) // 64))]) if len(xp) else xp
    err = np.max(np.abs(fine - coarse)) if len(xp) else 0.0
    if err > tol:
        raise AccuracyError(f"Phi0 quadrature not converged: refinement changed result by {err:.3g}")
    out[pos] = fine
    return out


def hyperbolic_g(x, f: SourceField, n: int = 32):
    """g(x) = 2 int_x^1 f1(x, eta) d eta (nu2 = -tau' - g)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not f.has_hyperbolic:
        return np.zeros_like(x)
    t, w = gauss_legendre(n)
    L = (1.0 - x)[:, None]
    eta = x[:, None] + L * t
    return 2.0 * np.sum(f.f1(x[:, None], eta) * L * w, axis=-1)


def hyperbolic_g_integral(x, f: SourceField, n: int = 32):
    """int_0^x g(t) dt = 2 int_0^x dt int_t^1 f1(t, eta) d eta."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not f.has_hyperbolic:
        return np.zeros_like(x)
    t, w = gauss_legendre(n)
    tt = x[:, None] * t
    return np.sum(hyperbolic_g(tt.ravel(), f, n).reshape(tt.shape) * x[:, None] * w, axis=-1)


def rhs_F(x, f: SourceField, params: TransmissionParams,
          heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS, phi0_values=None):
    """F(x) = -Phi0/alpha - g(x) + (beta/alpha) int_0^x g(t) dt.

    The last term integrates f1(t, eta) over t < x, eta > t.
    """
    params.require_solvable()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p0 = phi0(x, f, heat) if phi0_values is None else phi0_values
    return (-p0 / params.alpha - hyperbolic_g(x, f)
            + params.ratio * hyperbolic_g_integral(x, f))


# ---------------------------------------------------------------- tau

@dataclass
class TraceSolution:
    F: vt.GridFunction1D
    phi0: vt.GridFunction1D
    g: vt.GridFunction1D
    tau_prime: vt.GridFunction1D
    tau: vt.GridFunction1D
    tau_via_gamma1: vt.GridFunction1D
    resolvent: vt.ResolventKernel

    @property
    def gamma1_consistency(self) -> float:
        return float(np.max(np.abs(self.tau.values - self.tau_via_gamma1.values)))


_RESOLVENTS: dict = {}


def problem_resolvent(params: TransmissionParams, nodes, heat=hk.DEFAULT_PARAMS,
                      J: int = 120) -> vt.ResolventKernel:
    """Resolvent of the problem kernel k1 = (k + beta)/alpha, cached per grid."""
    params.require_solvable()
    nodes = np.asarray(nodes, dtype=float)
    key = (params.alpha, params.beta, len(nodes), nodes[-2], heat)
    res = _RESOLVENTS.get(key)
    if res is None:
        k1 = vt.SingularConvolutionKernel.problem(params.alpha, params.beta, heat)
        res = vt.iterated_kernels(k1, J, nodes)
        if len(_RESOLVENTS) > 16:
            _RESOLVENTS.clear()
        _RESOLVENTS[key] = res
    return res


def solve_tau(f: SourceField, params: TransmissionParams, n: int = 512,
              heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS, sign: int = VOLTERRA_SIGN,
              phi0_tol: float = 1e-6) -> TraceSolution:
    """tau' from the Volterra equation, tau = int tau', and tau via Gamma1."""
    params.require_solvable()
    nodes = vt.graded_nodes(n)
    p0 = phi0(nodes, f, heat, tol=phi0_tol)
    g = hyperbolic_g(nodes, f)
    F = -p0 / params.alpha - g + params.ratio * hyperbolic_g_integral(nodes, f)
    Fg = vt.GridFunction1D(nodes, F)
    k1 = vt.SingularConvolutionKernel.problem(params.alpha, params.beta, heat)
    tp = vt.solve_collocation(k1, Fg, sign)
    tau = tp.integral()
    res = problem_resolvent(params, nodes, heat)
    W1 = vt.integrator_for(nodes).smooth_matrix(res.gamma1_of_gap)
    tau18 = vt.GridFunction1D(nodes, W1 @ F)
    return TraceSolution(Fg, vt.GridFunction1D(nodes, p0), vt.GridFunction1D(nodes, g),
                         tp, tau, tau18, res)


def resolve_sign(params: TransmissionParams, F: vt.GridFunction1D,
                 heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS) -> dict:
    """Which sign of the Volterra equation does phi = F + Gamma * F invert?

    Gamma is the all-positive series sum k_j.  Returns the discrete residual
    of phi + s (k1 * phi) - F for s = +1 and s = -1.
    """
    res = problem_resolvent(params, F.nodes, heat)
    phi = vt.apply_resolvent(res, F)
    k1 = vt.SingularConvolutionKernel.problem(params.alpha, params.beta, heat)
    scale = max(1.0, float(np.max(np.abs(F.values))))
    out = {s: vt.discrete_residual(k1, phi, F, s) / scale for s in (1, -1)}
    ok = [s for s, r in out.items() if r < 1e-6]
    return {"residual_plus": out[1], "residual_minus": out[-1],
            "sign": ok[0] if len(ok) == 1 else None}


# ---------------------------------------------------------------- u

@dataclass
class SolutionField:
    x: np.ndarray
    y: np.ndarray
    u_parabolic: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    u_hyperbolic: np.ndarray
    tau: vt.GridFunction1D
    tau_prime: vt.GridFunction1D
    nu1: vt.GridFunction1D
    nu2: vt.GridFunction1D
    trace: TraceSolution
    params: TransmissionParams

    def u_at(self, x, y, f: SourceField, heat=hk.DEFAULT_PARAMS):
        """Point evaluation of the representation (not interpolation)."""
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        return evaluate_u(x, y, f, self.trace, heat)

    def rows(self):
        """(region, x, y, xi, eta, u) records in a fixed order."""
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                yield ("parabolic", xv, yv, xv + yv, xv - yv, self.u_parabolic[i, j])
        n = len(self.xi)
        for i in range(n):
            for j in range(i, n):
                xv, yv = 0.5 * (self.xi[i] + self.eta[j]), 0.5 * (self.xi[i] - self.eta[j])
                yield ("hyperbolic", xv, yv, self.xi[i], self.eta[j], self.u_hyperbolic[i, j])


def volume_potential(x, y, f: SourceField, heat=hk.DEFAULT_PARAMS, n_w: int = 40,
                     n_panels: int = 4, n_gauss: int = 8):
    """int_0^x ds int_0^1 G(s, y, y1) f(x - s, y1) dy1 at points (x, y)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.zeros(x.shape)
    if not f.has_parabolic:
        return out
    mask = (x > 0) & (y > 0) & (y < 1)
    xs, ys = x[mask], y[mask]
    tw, ww = gauss_legendre(n_w)
    tp, wp = panel_rule(np.linspace(0.0, 1.0, n_panels + 1), n_gauss)
    vals = np.zeros(len(xs))
    for c in np.array_split(np.arange(len(xs)), max(1, len(xs) // 16)):
        r = np.sqrt(xs[c])[:, None]
        w = r * tw
        s = w * w
        L = np.minimum(1.0, 14.0 * np.sqrt(s))
        yc = ys[c][:, None]
        lo = np.maximum(0.0, yc - L)
        hi = np.minimum(1.0, yc + L)
        # two windows [lo, y] and [y, hi]
        y1 = np.concatenate([lo[..., None] + (yc - lo)[..., None] * tp,
                             yc[..., None] + (hi - yc)[..., None] * tp], axis=-1)
        wy = np.concatenate([(yc - lo)[..., None] * wp, (hi - yc)[..., None] * wp], axis=-1)
        G = hk.green_g(s[..., None], yc[..., None], y1, heat)
        inner = np.sum(G * f.parabolic((xs[c][:, None] - s)[..., None], y1) * wy, axis=-1)
        vals[c] = np.sum(2 * w * inner * r * ww, axis=-1)
    out[mask] = vals
    return out


def boundary_potential(x, y, tau_prime_fn, heat=hk.DEFAULT_PARAMS, levels: int = 20):
    """int_0^x G_{y1}(x - s, y, 0) tau(s) ds = int_0^x Q(x - s, y) tau'(s) ds."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.zeros(x.shape)
    mask = (x > 0) & (y > 0)
    s, ws = batched_graded_rule(np.zeros(mask.sum()), x[mask], True, True, levels)
    q = hk.cumulative_flux(x[mask][:, None] - s, y[mask][:, None], heat)
    out[mask] = np.sum(q * tau_prime_fn(s) * ws, axis=-1)
    return out


def hyperbolic_direct(xi, eta, f: SourceField, n: int = 24):
    """int_xi^eta d xi1 int_eta^1 f1(xi1, eta1) d eta1."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    if not f.has_hyperbolic:
        return np.zeros(xi.shape)
    t, w = gauss_legendre(n)
    a = xi[..., None, None] + (eta - xi)[..., None, None] * t[:, None]
    b = eta[..., None, None] + (1 - eta)[..., None, None] * t[None, :]
    W = (eta - xi)[..., None, None] * (1 - eta)[..., None, None] * w[:, None] * w[None, :]
    return np.sum(f.f1(a, b) * W, axis=(-1, -2))


def evaluate_u(x, y, f: SourceField, trace: TraceSolution, heat=hk.DEFAULT_PARAMS):
    """u at arbitrary points of the closed domain from the representation."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    u = np.zeros(x.shape)
    tp = trace.tau_prime.spline()
    tau = trace.tau.spline()
    par = y > 0
    if np.any(par):
        u[par] = (volume_potential(x[par], y[par], f, heat)
                  + boundary_potential(x[par], y[par], tp, heat))
    hyp = ~par
    if np.any(hyp):
        xi, eta = x[hyp] + y[hyp], x[hyp] - y[hyp]
        u[hyp] = hyperbolic_direct(xi, eta, f) + tau(eta)
    return u


def solve_u(f: SourceField, params: TransmissionParams, grids: Grids = Grids(),
            heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS, sign: int = VOLTERRA_SIGN,
            phi0_tol: float = 1e-6) -> SolutionField:
    params.require_solvable()
    tr = solve_tau(f, params, grids.volterra_n, heat, sign, phi0_tol)
    xg = np.linspace(0.0, 1.0, grids.parabolic_nx + 1)
    yg = np.linspace(0.0, 1.0, grids.parabolic_ny + 1)
    X, Y = np.meshgrid(xg, yg, indexing="ij")
    tp = tr.tau_prime.spline()
    up = volume_potential(X, Y, f, heat) + boundary_potential(X, Y, tp, heat)
    up[:, 0] = tr.tau.spline()(xg)
    up[0, 0] = 0.0
    n = grids.char_n
    c = np.linspace(0.0, 1.0, n + 1)
    XI, ETA = np.meshgrid(c, c, indexing="ij")
    uh = np.full(XI.shape, np.nan)
    tri = XI <= ETA
    uh[tri] = hyperbolic_direct(XI[tri], ETA[tri], f) + tr.tau.spline()(ETA[tri])
    nodes = tr.tau_prime.nodes
    Wk = vt.integrator_for(nodes).matrix(vt.SingularConvolutionKernel.problem(1.0, 0.0, heat))
    nu1 = tr.phi0.values - Wk @ tr.tau_prime.values
    nu2 = -tr.tau_prime.values - tr.g.values
    return SolutionField(xg, yg, up, c, c, uh, tr.tau, tr.tau_prime,
                         vt.GridFunction1D(nodes, nu1), vt.GridFunction1D(nodes, nu2), tr, params)


# ---------------------------------------------------------------- verification

def verify_solution(sol: SolutionField, f: SourceField, params: TransmissionParams) -> dict:
    """Max-norm residuals of the equation, boundary and gluing conditions."""
    u = sol.u_parabolic
    hx = sol.x[1] - sol.x[0]
    hy = sol.y[1] - sol.y[0]
    X, Y = np.meshgrid(sol.x, sol.y, indexing="ij")
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hx)
    uyy = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / hy ** 2
    r_par = ux - uyy - f.parabolic(X[1:-1, 1:-1], Y[1:-1, 1:-1])

    uh = sol.u_hyperbolic
    n = len(sol.xi) - 1
    h = sol.xi[1] - sol.xi[0]
    r_hyp = [0.0]
    for i in range(1, n):
        for j in range(i + 2, n):
            cross = (uh[i + 1, j + 1] - uh[i + 1, j - 1] - uh[i - 1, j + 1] + uh[i - 1, j - 1]) / (4 * h * h)
            r_hyp.append(abs(4 * cross - 4 * f.f1(sol.xi[i], sol.eta[j])))
    bc = np.abs(2 * (uh[2:, n] - uh[:-2, n]) / (2 * h))[: n - 1]

    # u_x on both sides of y = 0 (one-sided differences on the hyperbolic side)
    ux_plus = (u[2:, 0] - u[:-2, 0]) / (2 * hx)
    xs = sol.x[1:-1]
    k = np.arange(1, n)
    ux_minus = (uh[k, k] - uh[k - 1, k]) / h + (uh[k, k + 1] - uh[k, k]) / h
    ux_minus = np.interp(xs, sol.xi[1:n], ux_minus)

    nodes = sol.nu1.nodes
    W1 = vt.integrator_for(nodes).matrix(vt.SingularConvolutionKernel.constant(1.0))
    nu2_int = W1 @ sol.nu2.values
    r_nu = sol.nu1.values - params.alpha * sol.nu2.values + params.beta * nu2_int

    return {
        "parabolic_pde": float(np.max(np.abs(r_par))) if r_par.size else 0.0,
        "hyperbolic_pde": float(np.max(r_hyp)),
        "boundary_AA0": float(np.max(np.abs(u[0, :]))),
        "boundary_A0B0": float(np.max(np.abs(u[:, -1]))),
        "characteristic_BC": float(np.max(bc)) if bc.size else 0.0,
        "transmission_ux": float(np.max(np.abs(ux_plus - ux_minus))),
        "transmission_nu": float(np.max(np.abs(r_nu))),
        "tau_at_zero": float(abs(sol.tau.values[0])),
        "gamma1_consistency": sol.trace.gamma1_consistency,
    }


# ---------------------------------------------------------------- stability probe

def w21_norm(sol: SolutionField) -> float:
    """Discrete W_2^1 norm over both regions (trapezoid weights, one-sided edges)."""
    u = sol.u_parabolic
    ux, uy = np.gradient(u, sol.x, sol.y)
    wx = np.gradient(sol.x)
    wy = np.gradient(sol.y)
    wx[[0, -1]] *= 0.5
    wy[[0, -1]] *= 0.5
    par = np.sum((u * u + ux * ux + uy * uy) * np.outer(wx, wy))
    uh = sol.u_hyperbolic
    ue = np.where(np.isnan(uh), 0.0, uh)
    uxi, ueta = np.gradient(ue, sol.xi, sol.eta)
    tri = ~np.isnan(uh) & (np.subtract.outer(sol.xi, sol.eta) < 0)
    h = sol.xi[1] - sol.xi[0]
    # (u_x, u_y) = (u_xi + u_eta, u_xi - u_eta); dx dy = d xi d eta / 2
    dens = ue * ue + (uxi + ueta) ** 2 + (uxi - ueta) ** 2
    hyp = 0.5 * np.sum(dens[tri]) * h * h
    return float(np.sqrt(par + hyp))


def l2_norm(f: SourceField, n: int = 64) -> float:
    t, w = gauss_legendre(n)
    X, Y = np.meshgrid(t, t, indexing="ij")
    par = np.sum(f.parabolic(X, Y) ** 2 * np.outer(w, w))
    xi, eta, wt = triangle_rule(n)
    hyp = 0.5 * np.sum(f.hyperbolic(0.5 * (xi + eta), 0.5 * (xi - eta)) ** 2 * wt)
    return float(np.sqrt(par + hyp))


def random_smooth_sources(count: int = 20, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 2 == 0:
            c = (rng.uniform(0.5, 2.0), rng.uniform(0, 4), rng.uniform(0, np.pi),
                 rng.uniform(0, 4), rng.uniform(0, np.pi))
            out.append(SourceField("separable_product", c))
        else:
            c = (rng.uniform(0.5, 2.0), rng.uniform(0.2, 0.8), rng.uniform(-0.3, 0.7), rng.uniform(0.15, 0.3))
            out.append(SourceField("gaussian_bump", c))
    return out


def stability_probe(params: TransmissionParams, count: int = 20, grids: Grids = Grids(16, 16, 16, 256),
                    seed: int = 0, heat=hk.DEFAULT_PARAMS) -> dict:
    """Ratio ||u||_{W_2^1} / ||f||_{L_2} per random source at a grid and its refinement."""
    rows = []
    for f in random_smooth_sources(count, seed):
        nf = l2_norm(f)
        r0 = w21_norm(solve_u(f, params, grids, heat)) / nf
        r1 = w21_norm(solve_u(f, params, grids.refined(), heat)) / nf
        rows.append({"source": f.to_dict(), "ratio": r0, "ratio_refined": r1,
                     "relative_change": abs(r1 - r0) / r0})
    ratios = np.array([r["ratio_refined"] for r in rows])
    changes = np.array([r["relative_change"] for r in rows])
    return {"sources": rows, "max_ratio": float(ratios.max()), "min_ratio": float(ratios.min()),
            "max_relative_change": float(changes.max()), "stable": bool(changes.max() <= 0.2)}
