"""Parameters, nonlinearities and hypothesis gates for the two-component system

    -Δu = u^r v^p [a v^q - c u^q] + h1(x, u, v)
    -Δv = v^r u^p [b u^q - d v^q] + h2(x, u, v)

Powers follow the convention 0**0 == 1, so the p = 0 (Lotka-Volterra,
Bose-Einstein) and r = 0 specializations are exact.  Other conventions
(e.g. treating u^0 as the indicator of u > 0) would change f on the axes;
they are not offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

Coef = Union[float, np.ndarray, Callable]


class DomainError(ValueError):
    """Raised when a nonlinearity is evaluated at a negative density."""


class NonDifferentiableError(ValueError):
    """Raised when the Jacobian is requested at a non-differentiable corner."""


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float
    r: float

    @property
    def sigma(self) -> float:
        return self.p + self.q + self.r

    @property
    def m(self) -> float:
        return abs(self.r - self.p)

    def admissible(self) -> bool:
        return self.p >= 0 and self.r >= 0 and self.q > 0 and self.q >= abs(self.p - self.r)


@dataclass(frozen=True)
class Coefficients:
    """a, b, c, d as constants, per-node arrays or callables of the node coordinates."""

    a: Coef
    b: Coef
    c: Coef = 0.0
    d: Coef = 0.0

    def at(self, x=None) -> tuple:
        return tuple(coefficient_values(getattr(self, k), x) for k in "abcd")

    @property
    def D(self):
        a, b, c, d = self.at()
        return a * b - c * d

    def is_constant(self) -> bool:
        return all(np.ndim(getattr(self, k)) == 0 and not callable(getattr(self, k)) for k in "abcd")

    def swapped(self) -> "Coefficients":
        return Coefficients(a=self.b, b=self.a, c=self.d, d=self.c)


@dataclass(frozen=True)
class LowerOrderTerms:
    """Either linear terms mu*u, nu*v or general callables h1(x,u,v), h2(x,u,v).

    ``growth`` is the declared growth exponent of the callables; it is only
    used in reports.
    """

    mu: Coef = 0.0
    nu: Coef = 0.0
    h1: Optional[Callable] = None
    h2: Optional[Callable] = None
    growth: Optional[float] = None

    @property
    def is_linear(self) -> bool:
        return self.h1 is None and self.h2 is None

    def eval(self, x, u, v):
        if self.is_linear:
            return coefficient_values(self.mu, x) * u, coefficient_values(self.nu, x) * v
        h1 = self.h1(x, u, v) if self.h1 is not None else 0.0 * u
        h2 = self.h2(x, u, v) if self.h2 is not None else 0.0 * v
        return h1, h2

    def is_zero(self) -> bool:
        if not self.is_linear:
            return False
        return all(not callable(t) and np.all(np.asarray(t) == 0) for t in (self.mu, self.nu))


@dataclass(frozen=True)
class Domain:
    kind: str  # "whole", "half", "ball", "box"
    radius: Optional[float] = None
    sides: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("whole", "half", "ball", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "ball" and not (self.radius is not None and self.radius > 0):
            raise ValueError("ball radius must be positive")
        if self.kind == "box":
            if not self.sides or any(s <= 0 for s in self.sides):
                raise ValueError("box side lengths must be positive")
            object.__setattr__(self, "sides", tuple(float(s) for s in self.sides))

    @property
    def bounded(self) -> bool:
        return self.kind in ("ball", "box")


@dataclass(frozen=True)
class ProblemInstance:
    n: int
    exps: Exponents
    coeffs: Coefficients
    lot: LowerOrderTerms = field(default_factory=LowerOrderTerms)
    domain: Domain = field(default_factory=lambda: Domain("whole"))
    h: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be an integer >= 1")

    def swapped(self) -> "ProblemInstance":
        lot = LowerOrderTerms(mu=self.lot.nu, nu=self.lot.mu,
                              h1=_swap_h(self.lot.h2), h2=_swap_h(self.lot.h1),
                              growth=self.lot.growth)
        return ProblemInstance(self.n, self.exps, self.coeffs.swapped(), lot, self.domain, self.h)


def _swap_h(h):
    if h is None:
        return None
    return lambda x, u, v: h(x, v, u)


def coefficient_values(val, x=None):
    if callable(val):
        if x is None:
            raise ValueError("spatial coefficient requires a point x")
        return np.asarray(val(x), dtype=float)
    if np.ndim(val) == 0:
        return float(val)
    return np.asarray(val, dtype=float)


def critical_bound(numerator: float, n: int, power: int = 1) -> Optional[float]:
    """numerator / (n-2)_+ ; None stands for +infinity (n <= 2)."""
    if n <= 2:
        return None
    return numerator / (n - 2) ** power


def sobolev_exponent(n: int) -> Optional[float]:
    return critical_bound(n + 2, n)


def _check_nonneg(u, v):
    if np.any(np.asarray(u) < 0) or np.any(np.asarray(v) < 0):
        raise DomainError("u and v must be nonnegative")


def eval_f(u, v, inst: ProblemInstance, x=None, t: float = 0.0, A: float = 0.0):
    """u^r v^p [(a + tA) v^q - c u^q], plus the lower-order term when x is given."""
    _check_nonneg(u, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    a, _, c, _ = inst.coeffs.at(x)
    out = u ** r * v ** p * ((a + t * A) * v ** q - c * u ** q)
    if x is not None:
        out = out + inst.lot.eval(x, u, v)[0]
    return out[()] if out.ndim == 0 else out


def eval_g(u, v, inst: ProblemInstance, x=None, t: float = 0.0, A: float = 0.0):
    """v^r u^p [(b + tA) u^q - d v^q], plus the lower-order term when x is given."""
    _check_nonneg(u, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    _, b, _, d = inst.coeffs.at(x)
    out = v ** r * u ** p * ((b + t * A) * u ** q - d * v ** q)
    if x is not None:
        out = out + inst.lot.eval(x, u, v)[1]
    return out[()] if out.ndim == 0 else out


def _mono(coef, base_u, ku, base_v, kv):
    """coef * base_u**ku * base_v**kv, skipping terms with zero coefficient."""
    if np.all(np.asarray(coef) == 0):
        return 0.0
    return coef * base_u ** ku * base_v ** kv


def _dmono(coef, k, base, other):
    """coef * k * base**(k-1) * other; zero when k == 0 (no 0 * inf)."""
    if k == 0 or np.all(np.asarray(coef) == 0):
        return 0.0
    return coef * k * base ** (k - 1) * other


def eval_jacobian(u, v, inst: ProblemInstance, x=None, t: float = 0.0, A: float = 0.0):
    """Analytic ∂(f, g)/∂(u, v), shape (2, 2) + shape(u).

    Raises NonDifferentiableError where a power with exponent in (0, 1) is
    differentiated at a zero base.
    """
    _check_nonneg(u, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    a, b, c, d = inst.coeffs.at(x)
    a = a + t * A
    b = b + t * A
    with np.errstate(divide="ignore", invalid="ignore"):
        # f = a u^r v^(p+q) - c u^(r+q) v^p
        fu = _dmono(a, r, u, v ** (p + q)) - _dmono(c, r + q, u, v ** p)
        fv = _dmono(a, p + q, v, u ** r) - _dmono(c, p, v, u ** (r + q))
        # g = b v^r u^(p+q) - d v^(r+q) u^p
        gu = _dmono(b, p + q, u, v ** r) - _dmono(d, p, u, v ** (r + q))
        gv = _dmono(b, r, v, u ** (p + q)) - _dmono(d, r + q, v, u ** p)
    jac = np.array(np.broadcast_arrays(fu, fv, gu, gv), dtype=float).reshape((2, 2) + np.broadcast(u, v).shape)
    if not np.all(np.isfinite(jac)):
        raise NonDifferentiableError(
            "Jacobian undefined: a power with exponent below 1 is differentiated at u = 0 or v = 0")
    if x is not None:
        jac = jac + _lower_order_jacobian(u, v, inst, x)
    return jac


def _lower_order_jacobian(u, v, inst, x, step=1e-7):
    lot = inst.lot
    shape = (2, 2) + np.broadcast(u, v).shape
    out = np.zeros(shape)
    if lot.is_linear:
        out[0, 0] = coefficient_values(lot.mu, x)
        out[1, 1] = coefficient_values(lot.nu, x)
        return out
    # general callables: centered differences, one-sided at zero densities
    for j, (du, dv) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        base = np.where(du, u, v)
        hstep = step * np.maximum(1.0, np.abs(base))
        lo_shift = np.minimum(hstep, base)
        hp = lot.eval(x, u + du * hstep, v + dv * hstep)
        hm = lot.eval(x, u - du * lo_shift, v - dv * lo_shift)
        for i in range(2):
            out[i, j] = (np.asarray(hp[i]) - np.asarray(hm[i])) / (hstep + lo_shift)
    return out


@dataclass
class Gate:
    name: str
    value: Optional[float]
    threshold: Optional[float]
    relation: str
    verdict: Optional[bool]
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "relation": self.relation, "verdict": self.verdict, "note": self.note}


@dataclass
class HypothesisReport:
    gates: list

    def __getitem__(self, name) -> Gate:
        for g in self.gates:
            if g.name == name:
                return g
        raise KeyError(name)

    def failed(self) -> list:
        return [g for g in self.gates if g.verdict is False]

    def as_dict(self) -> dict:
        return {"gates": [g.as_dict() for g in self.gates]}


def _lt(value, bound):
    return True if bound is None else value < bound


def _le(value, bound):
    return True if bound is None else value <= bound


def _coef_samples(val, inst):
    """Samples of a coefficient for infima/suprema: grid points when spatial."""
    if callable(val):
        pts = sample_points(inst)
        return np.atleast_1d(np.asarray(val(pts), dtype=float))
    return np.atleast_1d(np.asarray(val, dtype=float))


def sample_points(inst: ProblemInstance, count: int = 33):
    """Deterministic sample of node coordinates used for infima of spatial coefficients."""
    dom = inst.domain
    if dom.kind == "ball":
        return np.linspace(0.0, dom.radius, count)
    if dom.kind == "box":
        lx, ly = dom.sides[:2]
        xs, ys = np.meshgrid(np.linspace(0, lx, count), np.linspace(0, ly, count), indexing="ij")
        return np.stack([xs.ravel(), ys.ravel()], axis=-1)
    raise ValueError("spatial coefficients need a bounded domain to be sampled")


def validate_hypotheses(inst: ProblemInstance, lambda1: Optional[float] = None) -> HypothesisReport:
    """Evaluate every structural gate; failures are verdicts, never exceptions.

    Thresholds of the form k/(n-2)_+ are reported as None (unbounded) when
    n <= 2.  The eigenvalue gate needs ``lambda1``; without it the verdict
    is None.
    """
    n = inst.n
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    sigma = inst.exps.sigma
    a, b, c, d = (_coef_samples(getattr(inst.coeffs, k), inst) for k in "abcd")
    try:
        D = float(np.min(a * b - c * d))
    except ValueError:
        # incompatible sample sets: worst case over independent samples
        D = float(np.min(a) * np.min(b) - np.max(c) * np.max(d))
    gates = []

    gates.append(Gate("exponents_admissible", q - abs(p - r), 0.0, "q - |p-r| >= 0 with p,r >= 0, q > 0",
                      bool(inst.exps.admissible())))
    gates.append(Gate("coefficients_admissible", float(min(a.min(), b.min())), 0.0,
                      "a, b > 0 and c, d >= 0",
                      bool(a.min() > 0 and b.min() > 0 and c.min() >= 0 and d.min() >= 0)))
    gates.append(Gate("model_q_ge_abs_1_minus_p", q, abs(1 - p), "q >= |1-p|", bool(p >= 0 and q >= abs(1 - p)),
                      note="applies to the r = 1 model form"))
    gates.append(Gate("reaction_dominates", D, 0.0, "inf(ab - cd) >= 0", bool(D >= 0)))
    gates.append(Gate("reaction_dominates_strict", D, 0.0, "inf(ab - cd) > 0", bool(D > 0)))

    bound = critical_bound(4, n)
    gates.append(Gate("p_plus_q_subcritical", p + q, bound, "p + q < 4/(n-2)_+", _lt(p + q, bound)))

    if lambda1 is None:
        gates.append(Gate("mu_nu_below_lambda1", None, None, "sup(mu, nu) < lambda1", None,
                          note="lambda1 not supplied"))
    elif not inst.lot.is_linear:
        gates.append(Gate("mu_nu_below_lambda1", None, lambda1, "sup(mu, nu) < lambda1", None,
                          note="nonlinear lower-order terms"))
    else:
        mu = _coef_samples(inst.lot.mu, inst)
        nu = _coef_samples(inst.lot.nu, inst)
        top = float(max(mu.max(), nu.max()))
        gates.append(Gate("mu_nu_below_lambda1", top, float(lambda1), "sup(mu, nu) < lambda1",
                          bool(top < lambda1)))

    bound = critical_bound(n, n)
    gates.append(Gate("r_le_n_over_n_minus_2", r, bound, "r <= n/(n-2)_+", _le(r, bound)))
    bound = critical_bound(2, n)
    cd_pos = bool(c.min() > 0 and d.min() > 0)
    gates.append(Gate("p_le_2_over_n_minus_2_and_cd_positive", p, bound, "p <= 2/(n-2)_+ and c, d > 0",
                      bool(_le(p, bound) and cd_pos)))
    ps = sobolev_exponent(n)
    gates.append(Gate("sigma_subcritical", sigma, ps, "p + q + r < (n+2)/(n-2)_+", _lt(sigma, ps)))
    gates.append(Gate("q_plus_r_ge_1_and_superlinear", q + r, 1.0, "q + r >= 1 and 1 < sigma < (n+2)/(n-2)_+",
                      bool(q + r >= 1 and sigma > 1 and _lt(sigma, ps))))

    m_bar = float(min(a.min(), b.min()))
    liminf = _absorption_liminf(inst)
    gates.append(Gate("cross_reaction_lower_order", m_bar, liminf, "r <= 1, min(inf a, inf b) > 0, "
                      "liminf h1/(u^r v^(p+q)) > -m_bar",
                      bool(r <= 1 and m_bar > 0 and liminf is not None and liminf > -m_bar)
                      if liminf is not None else None,
                      note="" if liminf is not None else "lower-order limit not evaluable"))
    m_abs = float(min(c.min(), d.min()))
    limsup = _absorption_limsup(inst)
    gates.append(Gate("self_absorption_lower_order", m_abs, limsup, "min(inf c, inf d) > 0, "
                      "limsup h1/(u^(r+q) v^p) < m",
                      bool(m_abs > 0 and limsup < m_abs) if limsup is not None else None,
                      note="" if limsup is not None else "lower-order limit not evaluable"))
    return HypothesisReport(gates)


def _absorption_liminf(inst: ProblemInstance) -> Optional[float]:
    """liminf of h1/(u^r v^(p+q)) as v -> oo, u/v -> 0 (and mirrored for h2).

    Closed form for linear terms mu*u: the ratio is mu * u^(1-r) v^-(p+q),
    which tends to 0 when r <= 1 and sigma > 1; for r > 1 the gate fails
    anyway so the value only matters for r <= 1.
    """
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    if inst.lot.is_linear:
        if r <= 1 and p + q + r > 1:
            return 0.0
        if r == 1 and p + q == 0:
            mu = _coef_samples(inst.lot.mu, inst)
            nu = _coef_samples(inst.lot.nu, inst)
            return float(min(mu.min(), nu.min()))
        return None
    return _sampled_ratio(inst, worst=min)


def _absorption_limsup(inst: ProblemInstance) -> Optional[float]:
    """limsup of h1/(u^(r+q) v^p) as u -> oo, v/u -> 0 (mirrored for h2)."""
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    if inst.lot.is_linear:
        mu = _coef_samples(inst.lot.mu, inst)
        nu = _coef_samples(inst.lot.nu, inst)
        top = float(max(mu.max(), nu.max()))
        # ratio = mu u^(1-r-q) v^-p; v may tend to 0 along the limit
        if p > 0:
            return math.inf if top > 0 else 0.0
        if q + r > 1:
            return 0.0
        if q + r == 1:
            return top
        return math.inf if top > 0 else 0.0
    return _sampled_ratio(inst, worst=max, absorption=True)


def _sampled_ratio(inst, worst, absorption=False):
    """Crude sampled limit for callable lower-order terms along u/v -> 0."""
    p, q, r = inst.exps.p, inst.exps.q, inst.exps.r
    try:
        x = sample_points(inst) if inst.domain.bounded else np.zeros(1)
    except ValueError:
        x = np.zeros(1)
    vals = []
    for big in (1e4, 1e6, 1e8):
        small = big ** 0.5
        for xi in np.atleast_1d(x)[:5]:
            if absorption:
                u, v = big, small
                h1 = inst.lot.eval(xi, u, v)[0]
                vals.append(float(h1) / (u ** (r + q) * v ** p))
                h2 = inst.lot.eval(xi, v, u)[1]
                vals.append(float(h2) / (u ** (r + q) * v ** p))
            else:
                u, v = small, big
                h1 = inst.lot.eval(xi, u, v)[0]
                vals.append(float(h1) / (u ** r * v ** (p + q)))
                h2 = inst.lot.eval(xi, v, u)[1]
                vals.append(float(h2) / (u ** r * v ** (p + q)))
    return worst(vals[-10:])


CONFIG_KEYS = ("n", "p", "q", "r", "a", "b", "c", "d", "mu", "nu",
               "domain.kind", "domain.radius", "domain.sides", "grid.h")


def instance_to_config(inst: ProblemInstance) -> dict:
    """Flat key-value mapping; spatial (callable/array) entries are not serializable."""
    cfg = {"n": inst.n, "p": inst.exps.p, "q": inst.exps.q, "r": inst.exps.r}
    for k in "abcd":
        val = getattr(inst.coeffs, k)
        if callable(val) or np.ndim(val) != 0:
            raise ValueError(f"coefficient {k} is spatial and cannot be written to a flat config")
        cfg[k] = float(val)
    if not inst.lot.is_linear or callable(inst.lot.mu) or callable(inst.lot.nu) \
            or np.ndim(inst.lot.mu) or np.ndim(inst.lot.nu):
        raise ValueError("only constant mu, nu can be written to a flat config")
    cfg["mu"] = float(inst.lot.mu)
    cfg["nu"] = float(inst.lot.nu)
    cfg["domain.kind"] = inst.domain.kind
    if inst.domain.radius is not None:
        cfg["domain.radius"] = float(inst.domain.radius)
    if inst.domain.sides is not None:
        cfg["domain.sides"] = list(inst.domain.sides)
    if inst.h is not None:
        cfg["grid.h"] = float(inst.h)
    return cfg


def instance_from_config(cfg: dict) -> ProblemInstance:
    """Build an instance from parsed flat config values (see ell_lab.config)."""
    missing = [k for k in ("n", "p", "q", "r", "a", "b") if k not in cfg]
    if missing:
        raise KeyError(f"missing config key(s): {', '.join(missing)}")
    kind = cfg.get("domain.kind", "whole")
    sides = cfg.get("domain.sides")
    dom = Domain(kind, radius=cfg.get("domain.radius"), sides=tuple(sides) if sides is not None else None)
    return ProblemInstance(
        n=int(cfg["n"]),
        exps=Exponents(float(cfg["p"]), float(cfg["q"]), float(cfg["r"])),
        coeffs=Coefficients(float(cfg["a"]), float(cfg["b"]), float(cfg.get("c", 0.0)), float(cfg.get("d", 0.0))),
        lot=LowerOrderTerms(mu=float(cfg.get("mu", 0.0)), nu=float(cfg.get("nu", 0.0))),
        domain=dom,
        h=float(cfg["grid.h"]) if "grid.h" in cfg else None,
    )
