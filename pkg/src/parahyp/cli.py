"""Command-line front end.

Commands
--------
solve        u on both grids, trace data and residuals
spectrum     trace of the squared operator, I1/I2/I3 and the Nystrom spectrum
verify       oracle suite (Volterra, heat kernel, sign resolution, manufactured solution)
kernel-eval  K(x, y; x1, y1) at one point pair, with its sector name

Output files (all under ``--out``)
----------------------------------
solution.csv   region,x,y,xi,eta,u
trace.csv      x,tau,tau_prime,nu1,nu2
residuals.json parabolic_pde, hyperbolic_pde, boundary_AA0, boundary_A0B0,
               characteristic_BC, transmission_ux, transmission_nu, tau_at_zero,
               gamma1_consistency, plus a ``thresholds`` block and ``passed``
spectrum.json  trace_gaal, I1, I2, I3, trace_decomposed, lidskii_gap,
               lidskii_gap_reference, eigenvalues ([re, im] pairs), positivity_flags
eigenvalues.csv re,im
verify.json    one entry per oracle with value, tolerance and pass flag
manifest.json  config echo, version, stage timings, residual summary, file checksums

Floats are written with 17 significant digits.  Every file except
manifest.json (which records wall-clock timings) is byte-identical across
runs with the same configuration.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import __version__
from . import heat_kernel as hk
from . import problem_b as pb
from . import spectral as sp
from . import volterra as vt
from .kernel import KernelEvaluator, ProximityError, sector
from .output import dumps, fmt, sha256, write_csv, write_json
from .quadrature import panel_rule
from .source import PRESETS, SourceField

DEFAULTS = {
    "alpha": 1.0,
    "beta": 1.0,
    "source": "smooth-bump",
    "grids": {"parabolic_nx": 32, "parabolic_ny": 32, "char_n": 32, "volterra_n": 512},
    "tolerances": {"series_eps": 1e-14, "quad_refine_tol": 1e-6},
    "spectral": {"quad_m": 12, "node_cap": sp.NODE_CAP, "sign_mode": "auto", "kernel": "problem",
                 "triangle": "masked"},
    "thresholds": {
        "boundary_AA0": 1e-8,
        "boundary_A0B0": 1e-8,
        "characteristic_BC": 1e-8,
        "transmission_nu": 1e-5,
        "tau_at_zero": 1e-12,
        "gamma1_consistency": 1e-4,
        "parabolic_pde": None,
        "hyperbolic_pde": None,
        "transmission_ux": None,
    },
    "output": {"directory": "out", "formats": ["csv", "json"]},
}

SIGN_MODES = ("auto", "minus", "plus")
SPECTRAL_KERNELS = ("problem", "separable", "zero")


class ConfigError(ValueError):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.payload = {"error": kind, "message": message, **extra}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    alpha: float
    beta: float
    source: SourceField
    source_name: str | None
    grids: pb.Grids
    tolerances: dict
    spectral: dict
    thresholds: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config_validation", "config must be a JSON object")
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ConfigError("config_validation", f"unknown config keys: {sorted(unknown)}")
        c = _merge(DEFAULTS, d)
        try:
            alpha, beta = float(c["alpha"]), float(c["beta"])
        except (TypeError, ValueError):
            raise ConfigError("config_validation", "alpha and beta must be numbers")
        if alpha ** 2 + beta ** 2 <= 0:
            raise ConfigError("config_validation", "alpha^2 + beta^2 > 0 is required", field="alpha")
        src = c["source"]
        try:
            if isinstance(src, str):
                if src not in PRESETS:
                    raise ConfigError("config_validation", f"unknown source preset {src!r}; "
                                      f"choose from {sorted(PRESETS)}", field="source")
                source, name = PRESETS[src], src
            else:
                source, name = SourceField.from_dict(src), None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("config_validation", str(exc), field="source")
        g = c["grids"]
        for k, v in g.items():
            if not isinstance(v, int) or v < 8:
                raise ConfigError("config_validation", f"grids.{k} must be an integer >= 8", field=f"grids.{k}")
        grids = pb.Grids(g["parabolic_nx"], g["parabolic_ny"], g["char_n"], g["volterra_n"])
        for k, v in c["tolerances"].items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError("config_validation", f"tolerances.{k} must be > 0", field=f"tolerances.{k}")
        s = c["spectral"]
        if s["sign_mode"] not in SIGN_MODES:
            raise ConfigError("config_validation", f"spectral.sign_mode must be one of {SIGN_MODES}")
        if s["kernel"] not in SPECTRAL_KERNELS:
            raise ConfigError("config_validation", f"spectral.kernel must be one of {SPECTRAL_KERNELS}")
        if not isinstance(s["quad_m"], int) or s["quad_m"] < 2:
            raise ConfigError("config_validation", "spectral.quad_m must be an integer >= 2")
        return cls(alpha, beta, source, name, grids, c["tolerances"], s, c["thresholds"], c["output"], c)

    def to_dict(self) -> dict:
        d = copy.deepcopy(self.raw)
        d["alpha"], d["beta"] = self.alpha, self.beta
        d["source"] = self.source_name if self.source_name else self.source.to_dict()
        d["grids"] = {"parabolic_nx": self.grids.parabolic_nx, "parabolic_ny": self.grids.parabolic_ny,
                      "char_n": self.grids.char_n, "volterra_n": self.grids.volterra_n}
        d["spectral"] = dict(self.spectral)
        return d

    def refined(self) -> "RunConfig":
        d = self.to_dict()
        d["grids"] = {k: 2 * v for k, v in d["grids"].items()}
        d["spectral"]["quad_m"] *= 2
        return RunConfig.from_dict(d)

    @property
    def params(self) -> pb.TransmissionParams:
        return pb.TransmissionParams(self.alpha, self.beta)

    @property
    def heat(self) -> hk.SeriesEvalParams:
        return hk.SeriesEvalParams(eps=float(self.tolerances["series_eps"]))

    def require_alpha(self):
        if self.alpha == 0:
            raise ConfigError("config_validation",
                              "alpha = 0 is not supported: the solver requires alpha != 0", field="alpha")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config_parse", f"{path}: {exc.msg} at line {exc.lineno} column {exc.colno}",
                          line=exc.lineno, column=exc.colno)


class Manifest:
    def __init__(self, cfg: RunConfig, out: Path, command: str):
        self.cfg, self.out, self.command = cfg, out, command
        self.timings: dict = {}
        self.files: list = []
        self.summary: dict = {}

    def stage(self, name):
        manifest = self

        class _T:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                manifest.timings[name] = time.perf_counter() - self.t
        return _T()

    def add(self, path: Path):
        self.files.append(path)

    def write(self) -> Path:
        data = {
            "command": self.command,
            "version": __version__,
            "config": self.cfg.to_dict(),
            "timings_seconds": self.timings,
            "summary": self.summary,
            "files": [{"name": p.name, "sha256": sha256(p)} for p in self.files],
        }
        return write_json(self.out / "manifest.json", data)


SIGNS = {"auto": pb.VOLTERRA_SIGN, "minus": -1, "plus": 1}


# ------------------------------------------------------------------ commands

def cmd_solve(cfg: RunConfig, out: Path) -> int:
    cfg.require_alpha()
    man = Manifest(cfg, out, "solve")
    sign = SIGNS[cfg.spectral["sign_mode"]]
    with man.stage("solve"):
        sol = pb.solve_u(cfg.source, cfg.params, cfg.grids, cfg.heat, sign,
                         float(cfg.tolerances["quad_refine_tol"]))
    with man.stage("verify"):
        res = pb.verify_solution(sol, cfg.source, cfg.params)
        sign_info = pb.resolve_sign(cfg.params, sol.trace.F, cfg.heat)
    with man.stage("write"):
        man.add(write_csv(out / "solution.csv", ("region", "x", "y", "xi", "eta", "u"), sol.rows()))
        nodes = sol.tau.nodes
        man.add(write_csv(out / "trace.csv", ("x", "tau", "tau_prime", "nu1", "nu2"),
                          zip(nodes, sol.tau.values, sol.tau_prime.values, sol.nu1.values, sol.nu2.values)))
        checks = {k: (None if t is None else bool(res[k] <= t)) for k, t in cfg.thresholds.items() if k in res}
        passed = all(v is not False for v in checks.values())
        man.add(write_json(out / "residuals.json", {**res, "sign": sign,
                                                    "sign_resolution": sign_info, "thresholds": cfg.thresholds,
                                                    "checks": checks, "passed": passed}))
    man.summary = {"passed": passed, "residuals": res}
    man.write()
    return 0 if passed else 1


def _spectral_kernel(cfg: RunConfig):
    kind = cfg.spectral["kernel"]
    if kind == "separable":
        return sp.SeparableKernel()
    if kind == "zero":
        return sp.ZeroKernel()
    cfg.require_alpha()
    return KernelEvaluator.build(cfg.params, cfg.grids.volterra_n, cfg.heat)


def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    man = Manifest(cfg, out, "spectrum")
    with man.stage("kernel"):
        kernel = _spectral_kernel(cfg)
    with man.stage("spectrum"):
        rep = sp.run_spectrum(kernel, cfg.spectral["quad_m"], int(cfg.spectral["node_cap"]),
                              cfg.spectral["triangle"])
    with man.stage("write"):
        man.add(write_json(out / "spectrum.json", rep.to_dict()))
        man.add(write_csv(out / "eigenvalues.csv", ("re", "im"),
                          ((z.real, z.imag) for z in rep.eigenvalues)))
    ok = True
    if cfg.spectral["kernel"] == "problem" and cfg.alpha > 0 and cfg.beta > 0:
        ok = rep.trace_gaal > 0 and len(rep.significant_eigenvalues) > 0
    elif cfg.spectral["kernel"] == "separable":
        ok = rep.lidskii_gap < 1e-10
    man.summary = {"passed": ok, "trace_gaal": rep.trace_gaal, "lidskii_gap": rep.lidskii_gap,
                   "lidskii_gap_reference": rep.lidskii_gap_reference}
    man.write()
    return 0 if ok else 1


def _check(name, value, tol, passed=None, **extra):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": value, "tolerance": tol, "passed": ok, **extra}


def verify_suite(cfg: RunConfig) -> list:
    """Oracle checks at the configured resolutions."""
    out = []
    n = cfg.grids.volterra_n
    nodes = vt.graded_nodes(n)
    one = vt.GridFunction1D(nodes, np.ones(n))
    abel = vt.solve_collocation(vt.SingularConvolutionKernel.abel(1.0), one, 1)
    err = float(np.max(np.abs(abel.values - np.exp(nodes) * erfc(np.sqrt(nodes)))))
    out.append(_check("volterra_abel", err, 1e-6))
    const = vt.solve_collocation(vt.SingularConvolutionKernel.constant(1.0), one, 1)
    out.append(_check("volterra_constant", float(np.max(np.abs(const.values - np.exp(-nodes)))), 1e-8))

    heat = cfg.heat
    rng = np.random.default_rng(7)
    x = rng.uniform(0.01, 1.0, 100)
    y1 = rng.uniform(0.05, 0.95, 100)
    h = 1e-6
    fd = (hk.green_g(x, h, y1, heat) - hk.green_g(x, -h, y1, heat)) / (2 * h)
    rel = float(np.max(np.abs(fd - hk.flux_g0(x, y1, heat)) / np.maximum(1e-300, np.abs(hk.flux_g0(x, y1, heat)))))
    out.append(_check("heat_flux_vs_fd", rel, 1e-4))
    xi = np.linspace(0.0, 1.0, 51)
    out.append(_check("heat_flux_zero_at_wall", float(np.max(np.abs(hk.cumulative_flux(xi, 1.0, heat)))), 1e-10))
    Xs, Ys = np.meshgrid(xi[1:], np.linspace(0, 1, 50), indexing="ij")
    qmin = float(np.min(hk.cumulative_flux(Xs, Ys, heat)))
    out.append(_check("heat_flux_nonnegative", qmin, None, passed=qmin >= -1e-10))
    py, pw = panel_rule(np.linspace(0.0, 1.0, 41), 16)
    mass = float(np.sum(hk.green_g(1e-3, 0.5, py, heat) * pw))
    out.append(_check("heat_mass", mass, None, passed=mass >= 0.999))

    params = cfg.params
    if params.alpha != 0:
        hc = PRESETS["hyperbolic-constant"]
        p10 = pb.TransmissionParams(1.0, 0.0)
        tr = pb.solve_tau(hc, p10, n, heat)
        sgn = pb.resolve_sign(p10, tr.F, heat)
        out.append(_check("sign_resolution", min(sgn["residual_minus"], sgn["residual_plus"]), 1e-6,
                          passed=sgn["sign"] is not None and min(sgn["residual_minus"], sgn["residual_plus"]) < 1e-6,
                          sign=sgn["sign"], residual_plus=sgn["residual_plus"],
                          residual_minus=sgn["residual_minus"]))
        k1 = vt.SingularConvolutionKernel.problem(1.0, 0.0, heat)
        pic = vt.picard_oracle(k1, tr.F, pb.VOLTERRA_SIGN)
        perr = float(np.max(np.abs(tr.tau_prime.values - pic.spline()(nodes))))
        out.append(_check("tau_prime_vs_picard", perr, 1e-5))
        g = pb.Grids(cfg.grids.parabolic_nx, cfg.grids.parabolic_ny, cfg.grids.char_n, n)
        sol = pb.solve_u(hc, p10, g, heat)
        res = pb.verify_solution(sol, hc, p10)
        out.append(_check("manufactured_hyperbolic_pde", res["hyperbolic_pde"], 1e-10))
        XI, ETA = np.meshgrid(sol.xi, sol.eta, indexing="ij")
        tri = XI <= ETA
        exact = (ETA - XI) * (1 - ETA) + sol.tau.spline()(ETA)
        out.append(_check("manufactured_hyperbolic_exact",
                          float(np.max(np.abs((sol.u_hyperbolic - exact)[tri]))), 1e-10))
        out.append(_check("manufactured_transmission", res["transmission_nu"], 1e-5))

        bump = PRESETS["smooth-bump"]
        r1 = pb.verify_solution(pb.solve_u(bump, params, g, heat), bump, params)
        r2 = pb.verify_solution(pb.solve_u(bump, params, g.refined(), heat), bump, params)
        order = float(np.log2(r1["parabolic_pde"] / r2["parabolic_pde"]))
        out.append(_check("parabolic_convergence_order", order, None, passed=order >= 0.8,
                          coarse=r1["parabolic_pde"], fine=r2["parabolic_pde"]))
        out.append(_check("boundary_AA0", r2["boundary_AA0"], 1e-8))
        out.append(_check("boundary_A0B0", r2["boundary_A0B0"], 1e-8))
    return out


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    man = Manifest(cfg, out, "verify")
    with man.stage("oracles"):
        checks = verify_suite(cfg)
    failed = [c["name"] for c in checks if not c["passed"]]
    man.add(write_json(out / "verify.json", {"checks": checks, "failed": failed, "passed": not failed}))
    man.summary = {"passed": not failed, "failed": failed}
    man.write()
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {fmt(c['value'])}")
    return 0 if not failed else 1


def cmd_kernel_eval(cfg: RunConfig, point) -> int:
    cfg.require_alpha()
    x, y, x1, y1 = point
    for px, py in ((x, y), (x1, y1)):
        inside = (0 <= px <= 1 and 0 <= py <= 1) or (py < 0 and px + py >= 0 and px - py <= 1)
        if not inside:
            raise ConfigError("domain", f"point ({px}, {py}) lies outside the closed domain")
    ev = KernelEvaluator.build(cfg.params, cfg.grids.volterra_n, cfg.heat)
    try:
        val = float(ev(np.array([x]), np.array([y]), np.array([x1]), np.array([y1]))[0])
    except ProximityError as exc:
        print(dumps({"error": "proximity", "message": str(exc)}), end="")
        return 3
    print(dumps({"K": val, "sector": sector(x, y, x1, y1)}), end="")
    return 0


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parahyp", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--refine", action="store_true", help="double every resolution")
    common.add_argument("--preset", choices=sorted(PRESETS), help="source preset (overrides config)")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve problem B and write solution files")
    sub.add_parser("spectrum", parents=[common], help="trace and Nystrom spectrum")
    sub.add_parser("verify", parents=[common], help="run the oracle suite")
    ke = sub.add_parser("kernel-eval", parents=[common], help="evaluate K at one point pair")
    for name in ("x", "y", "x1", "y1"):
        ke.add_argument(name, type=float)
    sub.add_parser("defaults", help="print the default configuration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        print(dumps(DEFAULTS), end="")
        return 0
    if os.environ.get(sp.THREADS_ENV):
        os.environ.setdefault("OMP_NUM_THREADS", os.environ[sp.THREADS_ENV])
    try:
        raw = load_config(args.config)
        if args.preset:
            raw = {**raw, "source": args.preset}
        cfg = RunConfig.from_dict(raw)
        if args.refine:
            cfg = cfg.refined()
        if args.command == "kernel-eval":
            return cmd_kernel_eval(cfg, (args.x, args.y, args.x1, args.y1))
        out = Path(args.out or cfg.output["directory"])
        out.mkdir(parents=True, exist_ok=True)
        return {"solve": cmd_solve, "spectrum": cmd_spectrum, "verify": cmd_verify}[args.command](cfg, out)
    except ConfigError as exc:
        print(dumps(exc.payload), end="")
        return 2
    except (pb.ProblemBError, sp.NodeCapError, sp.EigenSolverError, vt.VolterraError) as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), end="")
        return 2


if __name__ == "__main__":
    sys.exit(main())
