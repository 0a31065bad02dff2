"""Right-hand sides f(x, y) on the mixed domain and the domain geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("zero", "constant", "gaussian_bump", "polynomial", "separable_product")
SUPPORTS = ("whole", "parabolic_only", "hyperbolic_only")


def to_characteristic(x, y):
    """(x, y) -> (xi, eta) = (x + y, x - y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x + y, x - y


def from_characteristic(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 0.5 * (xi + eta), 0.5 * (xi - eta)


def in_parabolic(x, y):
    return (np.asarray(x) > 0) & (np.asarray(x) < 1) & (np.asarray(y) > 0) & (np.asarray(y) < 1)


def in_hyperbolic(x, y):
    xi, eta = to_characteristic(x, y)
    return (xi > 0) & (xi < eta) & (eta < 1)


@dataclass(frozen=True)
class SourceField:
    """Source term of Lu = f.

    kinds and their ``coefficients``:

    * ``zero`` -- none
    * ``constant`` -- ``[c]``
    * ``gaussian_bump`` -- ``[amplitude, x0, y0, width]``
    * ``polynomial`` -- list of ``[i, j, c]`` giving ``sum c x**i y**j``
    * ``separable_product`` -- ``[A, kx, px, ky, py]`` giving
      ``A cos(kx x + px) cos(ky y + py)``
    """

    kind: str = "zero"
    coefficients: tuple = ()
    support: str = "whole"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}; expected one of {KINDS}")
        if self.support not in SUPPORTS:
            raise ValueError(f"unknown support {self.support!r}; expected one of {SUPPORTS}")
        coeffs = tuple(tuple(c) if isinstance(c, (list, tuple)) else float(c)
                       for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        need = {"constant": 1, "gaussian_bump": 4, "separable_product": 5}
        if self.kind in need and len(coeffs) != need[self.kind]:
            raise ValueError(f"{self.kind} source needs {need[self.kind]} coefficients")

    def _raw(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        c = self.coefficients
        if self.kind == "zero":
            return np.zeros(x.shape)
        if self.kind == "constant":
            return np.full(x.shape, c[0])
        if self.kind == "gaussian_bump":
            a, x0, y0, w = c
            return a * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * w * w))
        if self.kind == "polynomial":
            out = np.zeros(x.shape)
            for i, j, cij in c:
                out = out + cij * x ** int(i) * y ** int(j)
            return out
        a, kx, px, ky, py = c
        return a * np.cos(kx * x + px) * np.cos(ky * y + py)

    @property
    def has_parabolic(self) -> bool:
        return self.kind != "zero" and self.support != "hyperbolic_only"

    @property
    def has_hyperbolic(self) -> bool:
        return self.kind != "zero" and self.support != "parabolic_only"

    def parabolic(self, x, y):
        """f restricted to the parabolic part (formula evaluated for any (x, y))."""
        v = self._raw(x, y)
        return v if self.has_parabolic else np.zeros_like(v)

    def hyperbolic(self, x, y):
        v = self._raw(x, y)
        return v if self.has_hyperbolic else np.zeros_like(v)

    def __call__(self, x, y):
        y = np.asarray(y, dtype=float)
        return np.where(y > 0, self.parabolic(x, y), self.hyperbolic(x, y))

    def f1(self, xi, eta):
        """Characteristic form f1(xi, eta) = f((xi+eta)/2, (xi-eta)/2) / 4."""
        x, y = from_characteristic(xi, eta)
        return 0.25 * self.hyperbolic(x, y)

    def scaled(self, factor: float) -> "SourceField":
        if self.kind == "zero":
            return self
        c = self.coefficients
        if self.kind == "constant":
            c = (c[0] * factor,)
        elif self.kind == "gaussian_bump" or self.kind == "separable_product":
            c = (c[0] * factor,) + c[1:]
        else:
            c = tuple((i, j, v * factor) for i, j, v in c)
        return SourceField(self.kind, c, self.support)

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "coefficients": [list(c) if isinstance(c, tuple) else c for c in self.coefficients],
                "support": self.support}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceField":
        return cls(d.get("kind", "zero"), tuple(d.get("coefficients", ())), d.get("support", "whole"))


@dataclass(frozen=True)
class SumSource:
    """Linear combination of sources; evaluates like a :class:`SourceField`."""

    terms: tuple = field(default_factory=tuple)

    @property
    def has_parabolic(self):
        return any(t.has_parabolic for t in self.terms)

    @property
    def has_hyperbolic(self):
        return any(t.has_hyperbolic for t in self.terms)

    def parabolic(self, x, y):
        return sum(t.parabolic(x, y) for t in self.terms)

    def hyperbolic(self, x, y):
        return sum(t.hyperbolic(x, y) for t in self.terms)

    def __call__(self, x, y):
        return sum(t(x, y) for t in self.terms)

    def f1(self, xi, eta):
        return sum(t.f1(xi, eta) for t in self.terms)


PRESETS = {
    "zero": SourceField("zero"),
    "hyperbolic-constant": SourceField("constant", (4.0,), "hyperbolic_only"),
    "smooth-bump": SourceField("gaussian_bump", (1.0, 0.6, 0.15, 0.1), "whole"),
}
