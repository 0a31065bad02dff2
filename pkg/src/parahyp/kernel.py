"""The solution kernel K(x, y; x1, y1) with u = int_Omega K f.

Written through one-dimensional functions of the resolvent,

    E(u) = Gamma1(x, x - u) = 1 + int_0^u Gamma,    D(u) = int_0^u E,
    H(u) = -E(u) + (beta/alpha) D(u),

and the cumulative boundary flux Q(u, y) = int_0^u G0(t, y) dt:

    G1(d, y)  = int_0^d G0(d - r, y) E(r) dr
    Kph(d, y) = int_0^d G0(d - r, y) H(r) dr
    Kpp2(d, y, y1) = int_0^d G0(d - r, y) G1(r, y1) dr

Sectors (theta(0) = 0; p = parabolic y > 0, h = hyperbolic y < 0):

    p <- p : theta(x - x1) [G(x - x1, y, y1) - Kpp2(x - x1, y, y1) / alpha]
    p <- h : theta(x - xi1) Kph(x - xi1, y)
    h <- p : -theta(eta - x1) G1(eta - x1, y1) / alpha
    h <- h : theta(xi1 - xi) theta(eta - xi1) theta(eta1 - eta) / 2
             + theta(eta - xi1) H(eta - xi1)

The beta-terms follow from the tau representation; with them int K f
reproduces the solver output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import heat_kernel as hk
from . import volterra as vt
from .problem_b import ProximityError, TransmissionParams, problem_resolvent
from .quadrature import batched_graded_rule, gauss_legendre, graded_breaks, graded_rule, panel_rule

DELTA_FLOOR = 1e-6

SECTOR_NAMES = {
    "pp": "parabolic-parabolic",
    "ph": "parabolic-hyperbolic",
    "hp": "hyperbolic-parabolic",
    "hh": "hyperbolic-hyperbolic",
}


@dataclass(frozen=True)
class ConstantResolvent:
    """Stand-in for the resolvent with Gamma == c (c = 0 gives Gamma1 == 1)."""

    c: float = 0.0
    singular_coefficient: float = 0.0

    def regular(self, x):
        return np.full(np.shape(x), self.c)

    def __call__(self, x):
        return self.regular(x)

    def gamma1_of_gap(self, u):
        return 1.0 + self.c * np.asarray(u, float)

    def gamma1_integral(self, u):
        u = np.asarray(u, float)
        return u + 0.5 * self.c * u * u


@dataclass
class KernelEvaluator:
    params: TransmissionParams
    resolvent: vt.ResolventKernel
    heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS
    table_size: int = 401
    levels: int = 24
    kpp2_levels: int = 16
    _tables: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, params: TransmissionParams, volterra_n: int = 512,
              heat: hk.SeriesEvalParams = hk.DEFAULT_PARAMS) -> "KernelEvaluator":
        params.require_solvable()
        res = problem_resolvent(params, vt.graded_nodes(volterra_n), heat)
        return cls(params, res, heat)

    # 1-D resolvent functions
    def E(self, u):
        return self.resolvent.gamma1_of_gap(u)

    def D(self, u):
        return self.resolvent.gamma1_integral(u)

    def H(self, u):
        return -self.E(u) + self.params.ratio * self.D(u)

    def gamma(self, u):
        return self.resolvent(u)

    def _conv_q(self, d, y, c0, sing, smooth):
        """c0 Q(d, y) + int_0^d Q(d - r, y) (sing / sqrt(pi r) + smooth(r)) dr."""
        d, y = np.broadcast_arrays(np.asarray(d, float), np.asarray(y, float))
        r, w = batched_graded_rule(np.zeros(d.shape), d, True, True, self.levels)
        q = hk.cumulative_flux(np.clip(d[..., None] - r, 0.0, None), y[..., None], self.heat)
        hp = smooth(r)
        if sing:
            hp = hp + sing / np.sqrt(np.pi * np.where(r > 0, r, 1.0))
        w = np.where(r > 0, w, 0.0)
        return c0 * hk.cumulative_flux(d, y, self.heat) + np.sum(q * hp * w, axis=-1)

    def _g1_direct(self, d, y):
        return self._conv_q(d, y, 1.0, self.resolvent.singular_coefficient, self.resolvent.regular)

    def _kph_direct(self, d, y):
        a = self.resolvent.singular_coefficient
        ratio = self.params.ratio
        return self._conv_q(d, y, -1.0, -a, lambda r: -self.resolvent.regular(r) + ratio * self.E(r))

    def _table(self, name, y):
        key = (name, float(y))
        tab = self._tables.get(key)
        if tab is None:
            sd = np.linspace(0.0, 1.0, self.table_size)
            d = sd * sd
            fn = self._g1_direct if name == "G1" else self._kph_direct
            c0 = 1.0 if name == "G1" else -1.0
            vals = fn(d, np.full_like(d, y)) - c0 * hk.cumulative_flux(d, y, self.heat)
            tab = (c0, CubicSpline(sd, vals))
            self._tables[key] = tab
        return tab

    def _tabulated(self, name, d, y):
        d, y = np.broadcast_arrays(np.asarray(d, float), np.asarray(y, float))
        out = np.zeros(d.shape)
        pos = d > 0
        for yv in np.unique(y[pos]):
            sel = pos & (y == yv)
            c0, spl = self._table(name, yv)
            dd = d[sel]
            out[sel] = c0 * hk.cumulative_flux(dd, yv, self.heat) + spl(np.sqrt(dd))
        return out

    def G1(self, d, y):
        """G1(d, y) = int_0^d G0(d - r, y) Gamma1 dr (zero for d <= 0)."""
        return self._tabulated("G1", d, y)

    def Kph(self, d, y):
        return self._tabulated("Kph", d, y)

    def Kpp2(self, d, y, y1):
        d, y, y1 = np.broadcast_arrays(np.asarray(d, float), np.asarray(y, float), np.asarray(y1, float))
        out = np.zeros(d.shape)
        pos = d > 0
        if not np.any(pos):
            return out
        dd, yy, yy1 = d[pos], y[pos], y1[pos]
        vals = np.zeros(dd.shape)
        for c in np.array_split(np.arange(len(dd)), max(1, len(dd) // 512)):
            r, w = batched_graded_rule(np.zeros(len(c)), dd[c], True, True, self.kpp2_levels)
            g0 = hk.flux_g0(np.maximum(dd[c][:, None] - r, 1e-300), yy[c][:, None], self.heat)
            g1 = np.zeros(r.shape)
            for yv in np.unique(yy1[c]):
                rows = yy1[c] == yv
                g1[rows] = self.G1(r[rows], yv)
            vals[c] = np.sum(g0 * g1 * w, axis=-1)
        out[pos] = vals
        return out

    # sectors ---------------------------------------------------------------
    def K_pp(self, x, y, x1, y1, check_floor: bool = True):
        x, y, x1, y1 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, x1, y1)))
        d = x - x1
        # d == 0 is the theta(0) = 0 convention; only 0 < d < floor is unresolvable
        if check_floor and np.any((d > 0) & (d < DELTA_FLOOR)):
            raise ProximityError(f"0 < x - x1 < {DELTA_FLOOR:g}: below the regularisation floor")
        out = np.zeros(d.shape)
        pos = d > 0
        if np.any(pos):
            out[pos] = (hk.green_g(d[pos], y[pos], y1[pos], self.heat)
                        - self.Kpp2(d[pos], y[pos], y1[pos]) / self.params.alpha)
        return out

    def K_ph(self, x, y, xi1):
        d = np.asarray(x, float) - np.asarray(xi1, float)
        return np.where(d > 0, self.Kph(np.maximum(d, 0.0), y), 0.0)

    def K_hp(self, eta, x1, y1):
        d = np.asarray(eta, float) - np.asarray(x1, float)
        return np.where(d > 0, -self.G1(np.maximum(d, 0.0), y1) / self.params.alpha, 0.0)

    def K_hh(self, xi, eta, xi1, eta1):
        xi, eta, xi1, eta1 = np.broadcast_arrays(*(np.asarray(v, float) for v in (xi, eta, xi1, eta1)))
        direct = 0.5 * ((xi1 > xi) & (eta > xi1) & (eta1 > eta))
        d = eta - xi1
        return direct + np.where(d > 0, self.H(np.maximum(d, 0.0)), 0.0)

    def __call__(self, x, y, x1, y1):
        """K(x, y; x1, y1) for broadcastable arrays of points."""
        x, y, x1, y1 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, x1, y1)))
        out = np.zeros(x.shape)
        tp, sp = y > 0, y1 > 0
        xi, eta = x + y, x - y
        xi1, eta1 = x1 + y1, x1 - y1
        m = tp & sp
        if np.any(m):
            out[m] = self.K_pp(x[m], y[m], x1[m], y1[m])
        m = tp & ~sp
        if np.any(m):
            out[m] = self.K_ph(x[m], y[m], xi1[m])
        m = ~tp & sp
        if np.any(m):
            out[m] = self.K_hp(eta[m], x1[m], y1[m])
        m = ~tp & ~sp
        if np.any(m):
            out[m] = self.K_hh(xi[m], eta[m], xi1[m], eta1[m])
        return out


def sector(x, y, x1, y1) -> str:
    key = ("p" if y > 0 else "h") + ("p" if y1 > 0 else "h")
    name = SECTOR_NAMES[key]
    causal_zero = (key == "pp" and x <= x1) or (key == "ph" and x <= x1 + y1) \
        or (key == "hp" and x - y <= x1) or (key == "hh" and x - y <= x1 + y1)
    return name + (" (causal zero)" if causal_zero else "")


def kernel_K(x, y, x1, y1, evaluator: KernelEvaluator) -> float:
    return float(evaluator(np.array([x]), np.array([y]), np.array([x1]), np.array([y1]))[0])


def _tensor(r1, r2):
    (a, wa), (b, wb) = r1, r2
    A, B = np.meshgrid(a, b, indexing="ij")
    return A.ravel(), B.ravel(), np.outer(wa, wb).ravel()


def _char_f(f, xi1, eta1):
    x1, y1 = 0.5 * (xi1 + eta1), 0.5 * (xi1 - eta1)
    return f.hyperbolic(x1, y1)


def apply_kernel(ev: KernelEvaluator, f, x: float, y: float, levels: int = 12,
                 n: int = 8) -> dict:
    """u(x, y) = int_Omega K(x, y; .) f by quadrature split along the kernel sectors.

    Each sector gets its own tensor rule, graded toward the lines where K or
    its derivatives jump.  Returns the per-sector contributions and ``total``.
    """
    out = {}
    if y > 0:
        if f.has_parabolic and x > 0:
            # s = x - x1 = w^2 removes the 1/sqrt(s) of G
            w, yy1, wt = _tensor(graded_rule(0.0, np.sqrt(x), True, False, levels, n=n),
                                 panel_rule(np.concatenate([graded_breaks(0.0, y, False, True, levels),
                                                            graded_breaks(y, 1.0, True, False, levels)[1:]]), n))
            s = w * w
            fv = f.parabolic(x - s, yy1)
            green = np.sum(hk.green_g(s, y, yy1, ev.heat) * fv * 2 * w * wt)
            w2, y2, wt2 = _tensor(graded_rule(0.0, np.sqrt(x), True, False, levels // 2, n=n),
                                  graded_rule(0.0, 1.0, True, False, levels, n=n))
            s2 = w2 * w2
            corr = np.sum(ev.Kpp2(s2, y, y2) * f.parabolic(x - s2, y2) * 2 * w2 * wt2) / ev.params.alpha
            out["parabolic-parabolic"] = float(green - corr)
        else:
            out["parabolic-parabolic"] = 0.0
        if f.has_hyperbolic and x > 0:
            top = min(x, 1.0)
            xi1, t, wt = _tensor(graded_rule(0.0, top, False, True, levels, n=n), gauss_legendre(16))
            eta1 = xi1 + (1.0 - xi1) * t
            val = ev.Kph(top - xi1 if top < x else x - xi1, y) * _char_f(f, xi1, eta1) * (1.0 - xi1)
            out["parabolic-hyperbolic"] = float(0.5 * np.sum(val * wt))
        else:
            out["parabolic-hyperbolic"] = 0.0
    else:
        xi, eta = x + y, x - y
        if f.has_parabolic and eta > 0:
            x1, yy1, wt = _tensor(graded_rule(0.0, eta, False, True, levels, n=n),
                                  graded_rule(0.0, 1.0, True, False, levels, n=n))
            val = ev.G1(eta - x1, yy1) * f.parabolic(x1, yy1)
            out["hyperbolic-parabolic"] = float(-np.sum(val * wt) / ev.params.alpha)
        else:
            out["hyperbolic-parabolic"] = 0.0
        hh = 0.0
        if f.has_hyperbolic:
            t, wg = gauss_legendre(24)
            A, B, W = _tensor((xi + (eta - xi) * t, (eta - xi) * wg), (eta + (1 - eta) * t, (1 - eta) * wg))
            hh += 0.25 * np.sum(_char_f(f, A, B) * W)
            if eta > 0:
                xi1, s, wt = _tensor(graded_rule(0.0, eta, False, True, 4, n=n), (t, wg))
                eta1 = xi1 + (1.0 - xi1) * s
                hh += 0.5 * np.sum(ev.H(eta - xi1) * _char_f(f, xi1, eta1) * (1.0 - xi1) * wt)
        out["hyperbolic-hyperbolic"] = float(hh)
    out["total"] = float(sum(out.values()))
    return out
