"""Command-line front end: `ell-lab <command> [--config FILE] [--out DIR] [--set key=value ...]`.

Exit codes: 0 every verdict passes, 1 a verdict fails, 2 usage or config error.
Outputs go to --out (default ./ell_lab_out); the ELL_LAB_OUT environment
variable overrides both.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import reports
from ._grids import radial_laplacian
from .config import ConfigError, load_config, parse_value
from .dirichlet_solver import (GridField, compute_lambda1, continuation_solve, field_from_function,
                               newton_solve, scalar_reduction_init)
from .inequality_lab import (BarrierSpec, MixedPairSpec, discrete_harmonicity_check, ko_barrier_check,
                             mixed_pair_check, pohozaev_leading_coefficient, pohozaev_scan, pointwise_ZW_bounds,
                             radial_pair_from_profile, lap_w, minus_lap_z, w_ansatz, z_ansatz)
from .proportionality import SampleSpec, certificate_ok, check_condition_19, compute_K
from .radial_shooting import (Inconclusive, counterexample_nonlinearity, counterexample_profile,
                              integrate_ivp, spow)
from .spherical_means import (PolynomialField, catalogue, half_space_samples, linear_lower_bound_check,
                              mean_derivative_identity_check, monotonicity_scan)
from .system_model import (CONFIG_KEYS, Coefficients, Domain, Exponents, ProblemInstance, instance_from_config,
                           validate_hypotheses)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
INSTANCE_KEYS = set(CONFIG_KEYS)

Artifact = Tuple[str, str, list]  # (file name, CSV schema kind, rows)
Outcome = Tuple[bool, dict, List[Artifact]]


class UsageError(Exception):
    pass


def _need(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise UsageError(f"missing config key(s): {', '.join(missing)}")
    return [cfg[k] for k in keys]


def _instance(cfg) -> ProblemInstance:
    try:
        return instance_from_config({k: v for k, v in cfg.items() if k in INSTANCE_KEYS})
    except KeyError as exc:
        raise UsageError(str(exc).strip("'\"")) from exc


def _exps_coeffs(cfg):
    p, q, r, a, b = (float(x) for x in _need(cfg, "p", "q", "r", "a", "b"))
    return Exponents(p, q, r), Coefficients(a, b, float(cfg.get("c", 0.0)), float(cfg.get("d", 0.0)))


# ---------------------------------------------------------------- commands

def cmd_compute_k(cfg) -> Outcome:
    exps, coeffs = _exps_coeffs(cfg)
    cert = compute_K(coeffs, exps)
    ok = certificate_ok(cert, coeffs, exps) and cert.unique
    res = {"certificate": {k: getattr(cert, k) for k in ("K", "residual", "margin_a", "margin_b", "unique", "source")},
           "sign_changes": cert.sign_changes}
    return ok, res, []


def cmd_check_hypotheses(cfg) -> Outcome:
    rep = validate_hypotheses(_instance(cfg), lambda1=cfg.get("lambda1"))
    rows = [(g.name, g.value, g.threshold, g.relation, "none" if g.verdict is None else g.verdict)
            for g in rep.gates]
    failed = [g.name for g in rep.failed()]
    return not failed, {"gates": rep.as_dict(), "failed": failed}, [("gates.csv", "gates", rows)]


def cmd_check_ineq(cfg) -> Outcome:
    exps, coeffs = _exps_coeffs(cfg)
    spec = SampleSpec(float(cfg.get("samples.U_max", 10.0)), int(cfg.get("samples.per_axis", 100)))
    K = compute_K(coeffs, exps).K
    c19 = check_condition_19(K, coeffs, exps, spec)
    a, b, c, d = coeffs.at()
    res = {"K": K, "condition": {"max_signed_product": c19.max_signed_product, "scale": c19.scale,
                                 "strict_min_off_diagonal": c19.strict_min_off_diagonal, "passed": c19.passed}}
    ok = c19.passed
    if a * b >= c * d:
        zw = pointwise_ZW_bounds(K, coeffs, exps, spec, box=cfg.get("samples.box"),
                                 seed=int(cfg.get("seed", 0)))
        res["zw_bounds"] = zw
        ok = ok and zw.holds
    return ok, res, []


def _scalar_f(cfg) -> Callable:
    kind = str(cfg.get("f", "power"))
    if kind == "zero":
        return lambda u: 0.0 * u
    if kind == "linear":
        return lambda u: u
    if kind == "power":
        sigma = float(cfg.get("sigma", 3.0))
        return lambda u: spow(u, sigma)
    if kind == "counterexample":
        return counterexample_nonlinearity(float(_need(cfg, "p")[0]), float(cfg.get("q", 1.0)))
    raise UsageError(f"unknown nonlinearity f = {kind!r} (zero, linear, power, counterexample)")


def cmd_shoot(cfg) -> Outcome:
    n = int(_need(cfg, "n")[0])
    prof = integrate_ivp(n, _scalar_f(cfg), float(cfg.get("eps", 1.0)), float(cfg.get("t_max", 100.0)),
                         tol=float(cfg.get("tol", 1e-10)))
    ok = not isinstance(prof.event, Inconclusive)
    return ok, {"event": prof.event_dict()}, [("profile.csv", "profile", prof.rows())]


def cmd_counterexample(cfg) -> Outcome:
    n, p = _need(cfg, "n", "p")
    q = float(cfg.get("q", 1.0))
    eps = float(cfg.get("eps", 0.01))
    try:
        pair = counterexample_profile(int(n), float(p), q, eps, float(cfg.get("t_max", 1e3)),
                                      tol=float(cfg.get("tol", 1e-10)))
    except ValueError as exc:
        return False, {"error": str(exc)}, []
    prof = pair.u
    rows = [(t, u, v, u / v) for t, u, v in zip(prof.t_grid, prof.u_values, pair.v_values)]
    scan = pohozaev_scan(counterexample_nonlinearity(float(p), q), int(n), eps)
    res = {"event": prof.event_dict(), "v0": float(1 - eps), "ratio_spread": pair.ratio_spread,
           "ratio_spread_abs": pair.ratio_spread_abs, "pohozaev_min_h": scan.min_h}
    ok = pair.ratio_spread > 1e-6 and scan.nonnegative
    return ok, res, [("pair.csv", "pair", rows)]


def _field_rows(fld: GridField):
    return ("field_radial" if fld.radial else "field_box"), fld.rows()


def _initial_field(inst: ProblemInstance, cfg) -> GridField:
    h = inst.h
    if h is None:
        raise UsageError("missing config key(s): grid.h")
    amp = float(cfg.get("init.amplitude", 0.0))
    if inst.domain.kind == "ball" and amp == 0.0:
        return scalar_reduction_init(inst, h=h)
    amp = amp or 1.0
    ratio = float(cfg.get("init.ratio", 1.0))
    if inst.domain.kind == "ball":
        R = inst.domain.radius
        shape = lambda X: amp * np.cos(0.5 * np.pi * X[..., 0] / R)
    else:
        Lx, Ly = inst.domain.sides
        shape = lambda X: amp * np.sin(np.pi * X[..., 0] / Lx) * np.sin(np.pi * X[..., 1] / Ly)
    return field_from_function(inst.domain, h, inst.n, lambda X: ratio * shape(X), shape)


def cmd_solve_dirichlet(cfg) -> Outcome:
    inst = _instance(cfg)
    if not inst.domain.bounded:
        raise UsageError("solve-dirichlet needs domain.kind = ball or box")
    fld, rep = newton_solve(_initial_field(inst, cfg), inst, tol=float(cfg.get("newton.tol", 1e-10)))
    kind, rows = _field_rows(fld)
    return rep.converged, {"report": rep.as_dict()}, [("field.csv", kind, rows)]


def cmd_continue(cfg) -> Outcome:
    inst = _instance(cfg)
    key, values = _need(cfg, "path.key", "path.values")
    if key not in "abcd" or len(key) != 1:
        raise UsageError("path.key must be one of a, b, c, d")
    values = values if isinstance(values, list) else [values]

    def family(s):
        coeffs = Coefficients(**{k: (s if k == key else getattr(inst.coeffs, k)) for k in "abcd"})
        return ProblemInstance(inst.n, inst.exps, coeffs, inst.lot, inst.domain, inst.h)

    init = None
    if "init.amplitude" in cfg or inst.domain.kind != "ball":
        init = _initial_field(family(float(values[0])), cfg)
    nodes = int(round(inst.domain.radius / inst.h)) + 1 if inst.domain.kind == "ball" and inst.h else 257
    res = continuation_solve(family, [float(v) for v in values], init=init, nodes=nodes)
    rows = [(s.param, s.report.converged, s.report.sup_u, s.report.sup_v, s.report.min_interior_u,
             s.report.min_interior_v, s.report.residual_inf) for s in res.steps]
    ok = res.completed and all(s.report.min_interior_u > 0 and s.report.min_interior_v > 0 for s in res.steps)
    return ok, {"failure_index": res.failure_index, "bound": res.bound, "collapse": res.collapse,
                "steps": [dict(param=s.param, **s.report.as_dict()) for s in res.steps]}, \
        [("continuation.csv", "continuation", rows)]


def _domain_from(cfg) -> Domain:
    kind = _need(cfg, "domain.kind")[0]
    sides = cfg.get("domain.sides")
    if sides is not None and not isinstance(sides, list):
        sides = [sides]
    return Domain(kind, radius=cfg.get("domain.radius"), sides=tuple(sides) if sides else None)


def cmd_lambda1(cfg) -> Outcome:
    dom = _domain_from(cfg)
    if not dom.bounded:
        raise UsageError("lambda1 needs domain.kind = ball or box")
    h = float(_need(cfg, "grid.h")[0])
    n = int(cfg.get("n", 2))
    res = compute_lambda1(dom, h, n, tol=float(cfg.get("tol", 1e-10)))
    if dom.kind == "ball":
        r = np.arange(res.eigenfield.shape[0]) * h
        rows, kind = list(zip(r, res.eigenfield)), "eigen_radial"
    else:
        nx, ny = res.eigenfield.shape
        X, Y = np.meshgrid(np.arange(nx) * h, np.arange(ny) * h, indexing="ij")
        rows, kind = list(zip(X.ravel(), Y.ravel(), res.eigenfield.ravel())), "eigen_box"
    out = {"lambda1": res.value, "lambda1_coarse": res.coarse, "richardson": res.richardson,
           "iterations": res.iterations, "h": h}
    return True, out, [("eigenfield.csv", kind, rows)]


def _parse_terms(text, n):
    """'0,2:1.5; 1,1:-0.5' -> {(0, 2): 1.5, (1, 1): -0.5}."""
    terms = {}
    for part in str(text).split(";"):
        if not part.strip():
            continue
        exps, coef = part.split(":")
        key = tuple(int(e) for e in exps.replace(" ", "").split(","))
        if len(key) != n:
            raise UsageError(f"polynomial term {part.strip()!r} needs {n} exponents")
        terms[key] = float(coef)
    return terms


def cmd_means(cfg) -> Outcome:
    n = int(cfg.get("n", 2))
    name = str(cfg.get("field", "superharmonic"))
    if name == "polynomial":
        w = PolynomialField(_parse_terms(_need(cfg, "field.terms")[0], n))
    else:
        try:
            w = catalogue(name)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    radii = cfg.get("radii", [1, 2, 4, 8, 16, 32, 64])
    radii = radii if isinstance(radii, list) else [radii]
    y = cfg.get("center")
    y = None if y is None else (y if isinstance(y, list) else [y]) + [0.0]
    y2 = cfg.get("center2")
    y2 = None if y2 is None else (y2 if isinstance(y2, list) else [y2]) + [0.0]
    seed = int(cfg.get("seed", 0))
    scan = monotonicity_scan(w, y, radii, n, y2=y2, seed=seed)
    res = {"scan": {k: getattr(scan, k) for k in ("monotone", "nonnegative", "consistent", "violations",
                                                 "limit_estimate", "limit_slack", "second_center_mean",
                                                 "centers_agree")}}
    ok = scan.consistent and scan.centers_agree is not False
    if ok:
        pts = half_space_samples(n, int(cfg.get("samples", 1000)), seed=seed)
        lb = linear_lower_bound_check(w, scan.limit_estimate - scan.limit_slack, pts, n)
        res["lower_bound"] = lb
        ok = lb.passed
    if w.lap is not None and n in (2, 3):
        chk = mean_derivative_identity_check(w, y, float(radii[0]), n)
        res["identity"] = chk
    return ok, res, [("means.csv", "means", scan.rows())]


def cmd_pohozaev(cfg) -> Outcome:
    n, p = _need(cfg, "n", "p")
    q = float(cfg.get("q", 1.0))
    f = counterexample_nonlinearity(float(p), q)
    scan = pohozaev_scan(f, int(n), float(cfg.get("eps", 0.01)))
    lead = pohozaev_leading_coefficient(f, int(n), float(p))
    res = {"min_h": scan.min_h, "floor": scan.floor, "scale": scan.scale, "nonnegative": scan.nonnegative,
           "leading_coefficient": lead, "expected_leading": float(p) - (n + 2) / (n - 2)}
    return scan.nonnegative, res, [("pohozaev.csv", "pohozaev", scan.rows())]


def cmd_barrier(cfg) -> Outcome:
    n, p = _need(cfg, "n", "p")
    spec = BarrierSpec(int(n), float(p), float(cfg.get("A", 1.0)), float(_need(cfg, "C")[0]),
                       float(cfg.get("R", 1.0)))
    v = ko_barrier_check(spec, samples=int(cfg.get("samples", 1000)))
    r = spec.R * np.arange(int(cfg.get("samples", 1000))) / int(cfg.get("samples", 1000))
    rows = list(zip(r, spec.lap_W(r), spec.A / (1 + r ** 2) * spec.W(r) ** spec.p))
    res = {"verdict": v, "threshold": spec.threshold, "alpha": spec.alpha}
    return v.verdict == "pass" and v.fd_gap <= 1e-6, res, [("barrier.csv", "barrier", rows)]


def cmd_mixed_pair(cfg) -> Outcome:
    n, p, r = _need(cfg, "n", "p", "r")
    spec = MixedPairSpec(int(n), float(p), float(r), q=float(cfg.get("q", 1.0)),
                         alpha_z=float(cfg.get("alpha_z", 1.25)), beta_w=float(cfg.get("beta_w", 0.5)))
    C = float(cfg.get("C", 1.0))
    v = mixed_pair_check(spec, C=C, samples=int(cfg.get("samples", 1000)))
    rho = np.linspace(0.0, 1e3, int(cfg.get("samples", 1000)))
    rows = []
    if v.C > 0:
        Z = z_ansatz(rho, v.C_z, spec.alpha_z)
        W = w_ansatz(rho, v.B, v.A_w, spec.beta_w)
        rows = list(zip(rho, minus_lap_z(rho, v.C_z, spec.alpha_z, spec.n), C * W ** spec.beta_sys * Z ** spec.r,
                        lap_w(rho, v.A_w, spec.beta_w, spec.n), C * Z ** spec.p * W ** spec.gamma_sys))
    ok = v.passed and v.fd_gap_z <= 1e-6 and v.fd_gap_w <= 1e-6
    return ok, {"verdict": v, "beta_sys": spec.beta_sys, "gamma_sys": spec.gamma_sys}, \
        [("mixed_pair.csv", "mixed_pair", rows)]


def cmd_zw_check(cfg) -> Outcome:
    n, p = _need(cfg, "n", "p")
    q = float(cfg.get("q", 1.0))
    try:
        pair = counterexample_profile(int(n), float(p), q, float(cfg.get("eps", 0.01)),
                                      float(cfg.get("t_max", 1e3)))
    except ValueError as exc:
        return False, {"error": str(exc)}, []
    rp = radial_pair_from_profile(pair.u, nodes=int(cfg.get("nodes", 1001)))
    inst = ProblemInstance(int(n), Exponents(float(p), q, float(p)), Coefficients(1.0, 1.0, 1.0, 1.0))
    rep = discrete_harmonicity_check(rp, inst, K=1.0, tol_factor=float(cfg.get("tol_factor", 10.0)))
    W = np.abs(rp.u - rp.v)
    Z = np.minimum(rp.u, rp.v)
    rows = list(zip(rp.r[:-1], radial_laplacian(W, rp.h, rp.n), -radial_laplacian(Z, rp.h, rp.n)))
    return rep.passed, {"report": rep}, [("harmonicity.csv", "harmonicity", rows)]


COMMANDS: Dict[str, Tuple[Callable, set]] = {
    "compute-k": (cmd_compute_k, INSTANCE_KEYS),
    "check-hypotheses": (cmd_check_hypotheses, INSTANCE_KEYS | {"lambda1"}),
    "check-ineq": (cmd_check_ineq, INSTANCE_KEYS | {"samples.U_max", "samples.per_axis", "samples.box"}),
    "shoot": (cmd_shoot, {"n", "f", "sigma", "p", "q", "eps", "t_max", "tol"}),
    "counterexample": (cmd_counterexample, {"n", "p", "q", "eps", "t_max", "tol"}),
    "solve-dirichlet": (cmd_solve_dirichlet, INSTANCE_KEYS | {"init.amplitude", "init.ratio", "newton.tol"}),
    "continue": (cmd_continue, INSTANCE_KEYS | {"path.key", "path.values", "init.amplitude", "init.ratio"}),
    "lambda1": (cmd_lambda1, {"n", "domain.kind", "domain.radius", "domain.sides", "grid.h", "tol"}),
    "means": (cmd_means, {"n", "field", "field.terms", "radii", "center", "center2", "samples"}),
    "pohozaev": (cmd_pohozaev, {"n", "p", "q", "eps"}),
    "barrier": (cmd_barrier, {"n", "p", "A", "C", "R", "samples"}),
    "mixed-pair": (cmd_mixed_pair, {"n", "p", "q", "r", "alpha_z", "beta_w", "C", "samples"}),
    "zw-check": (cmd_zw_check, {"n", "p", "q", "eps", "t_max", "nodes", "tol_factor"}),
}

FLAG_KEYS = {"domain": "domain.kind", "sides": "domain.sides", "radius": "domain.radius", "h": "grid.h",
             "n": "n", "seed": "seed"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ell-lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value scenario file")
    ap.add_argument("--out", help="output directory (ELL_LAB_OUT overrides)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    ap.add_argument("--domain", choices=["ball", "box"])
    ap.add_argument("--sides", nargs="+", type=float)
    ap.add_argument("--radius", type=float)
    ap.add_argument("--h", type=float)
    ap.add_argument("--n", type=int)
    ap.add_argument("--seed", type=int)
    return ap


def _gather_config(args) -> dict:
    cfg = {}
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except ConfigError as exc:
            raise UsageError(f"config error: {exc}") from exc
        if not cfg:
            raise UsageError("config file is empty")
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = parse_value(v)
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag)
        if val is not None:
            cfg[key] = list(val) if isinstance(val, list) else val
    return cfg


def _out_dir(args) -> Path:
    return Path(os.environ.get("ELL_LAB_OUT") or args.out or "ell_lab_out")


def run(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    func, allowed = COMMANDS[args.command]
    try:
        cfg = _gather_config(args)
        if not cfg:
            raise UsageError("no configuration given (use --config, --set or flags)")
        unknown = sorted(set(cfg) - allowed - {"seed"})
        if unknown:
            raise UsageError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        cfg.setdefault("seed", 0)
        out = _out_dir(args)
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise UsageError(f"output directory not writable: {exc}") from exc
        try:
            ok, results, artifacts = func(cfg)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(str(exc)) from exc
    except UsageError as exc:
        print(f"ell-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    results = dict(results)
    results["artifacts"] = [{"file": name, "columns": list(reports.CSV_SCHEMAS[kind])} for name, kind, _ in artifacts]
    reports.write_json(out / "report.json", reports.report_payload(args.command, ok, results, cfg))
    for name, kind, rows in artifacts:
        reports.write_csv(out / name, kind, rows)
    print(f"{args.command}: {'pass' if ok else 'fail'} -> {out}")
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
