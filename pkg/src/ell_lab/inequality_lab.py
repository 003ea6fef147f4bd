"""Checks of explicit inequalities: Pohozaev sign function, barrier and mixed-pair
comparison functions, pointwise bounds for Z = min(u, Kv) and W = |u - Kv|,
cone-weight and half-space exponent gates, and discrete sub/superharmonicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from ._grids import radial_laplacian
from .proportionality import SampleSpec, compute_K
from .system_model import Coefficients, Exponents, ProblemInstance, eval_f, eval_g, sobolev_exponent


# ---------------------------------------------------------------- Pohozaev

@dataclass
class PohozaevScan:
    X: np.ndarray
    h: np.ndarray
    min_h: float
    scale: float
    floor: float

    @property
    def nonnegative(self) -> bool:
        return self.min_h >= self.floor

    def rows(self):
        return list(zip(self.X.tolist(), self.h.tolist()))


def _antiderivative(f, X):
    F = np.empty_like(X)
    prev, acc = 0.0, 0.0
    for k, x in enumerate(X):
        val, _ = quad(f, prev, x, epsabs=0.0, epsrel=1e-13, limit=200)
        acc += val
        F[k] = acc
        prev = x
    return F


def pohozaev_function(f: Callable, n: int, X) -> np.ndarray:
    """h(X) = X f(X) - (p_S + 1) F(X), F(X) = integral of f from 0."""
    ps = sobolev_exponent(n)
    if ps is None:
        raise ValueError("the critical exponent (n+2)/(n-2) needs n >= 3")
    X = np.atleast_1d(np.asarray(X, dtype=float))
    order = np.argsort(X)
    F = np.empty_like(X)
    F[order] = _antiderivative(f, X[order])
    return X * np.asarray(f(X), dtype=float) - (ps + 1) * F


def pohozaev_scan(f: Callable, n: int, eps: float, points: int = 400, lo: float = 1e-8) -> PohozaevScan:
    ps = sobolev_exponent(n)
    if ps is None:
        raise ValueError("the critical exponent (n+2)/(n-2) needs n >= 3")
    if not eps > lo:
        raise ValueError(f"eps must exceed {lo}")
    X = np.logspace(math.log10(lo), math.log10(eps), points)
    F = _antiderivative(f, X)
    xf = X * np.asarray(f(X), dtype=float)
    h = xf - (ps + 1) * F
    scale = float(max(np.max(np.abs(xf)), (ps + 1) * np.max(np.abs(F))))
    return PohozaevScan(X=X, h=h, min_h=float(np.min(h)), scale=scale, floor=-1e-15 * scale)


def pohozaev_leading_coefficient(f: Callable, n: int, power: float, X: float = 1e-4,
                                 rel_step: float = 1e-3) -> float:
    """Central-difference h'(X) divided by X^power."""
    d = rel_step * X
    hp, hm = pohozaev_function(f, n, [X + d, X - d])
    return float((hp - hm) / (2 * d) / X ** power)


# ---------------------------------------------------------------- radial FD

def radial_fd_laplacian(func: Callable, r, n: int, rel_step: float = 1e-3, ref: Optional[float] = None):
    """Fourth-order 5-point difference of w'' + (n-1)/r w' for an even radial profile.

    The step is rel_step * ref (ref defaults to max(r, 1)); at r = 0 the value n w''(0) is used.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    for k, x in enumerate(r):
        d = rel_step * (ref if ref is not None else max(abs(x), 1.0))
        w = [float(func(x + j * d)) for j in (-2, -1, 0, 1, 2)]
        d2 = (-w[0] + 16 * w[1] - 30 * w[2] + 16 * w[3] - w[4]) / (12 * d * d)
        if x == 0:
            out[k] = n * d2
        else:
            d1 = (w[0] - 8 * w[1] + 8 * w[3] - w[4]) / (12 * d)
            out[k] = d2 + (n - 1) / x * d1
    return out


# ---------------------------------------------------------------- barrier

@dataclass
class BarrierSpec:
    n: int
    p: float
    A: float
    C: float
    R: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("barrier needs p > 1")
        if not (self.A > 0 and self.C > 0):
            raise ValueError("A and C must be positive")
        if not self.R >= 1:
            raise ValueError("barrier radius must satisfy R >= 1")

    @property
    def alpha(self) -> float:
        return 2.0 / (self.p - 1.0)

    @property
    def threshold(self) -> float:
        """Right side of C^(p-1) >= 4 alpha [n + 2(alpha+1)] / A."""
        a = self.alpha
        return 4 * a * (self.n + 2 * (a + 1)) / self.A

    @property
    def admissible(self) -> bool:
        return self.C ** (self.p - 1) >= self.threshold

    def W(self, r):
        r = np.asarray(r, dtype=float)
        return self.C * self.R ** (2 * self.alpha) / (self.R ** 2 - r ** 2) ** self.alpha

    def lap_W(self, r):
        r = np.asarray(r, dtype=float)
        a, R, n = self.alpha, self.R, self.n
        s = R ** 2 - r ** 2
        return 2 * a * self.C * R ** (2 * a) * (n * s + 2 * (a + 1) * r ** 2) / s ** (a + 2)


@dataclass
class BarrierVerdict:
    admissible: bool
    inequality_holds: bool
    worst_ratio: float
    fd_gap: float
    radii: int
    verdict: str


def ko_barrier_check(spec: BarrierSpec, radii: Optional[np.ndarray] = None, samples: int = 1000,
                     fd_cutoff: float = 0.95) -> BarrierVerdict:
    """ΔW_R <= A (1+r^2)^-1 W_R^p on [0, R), plus the closed form against finite differences."""
    if radii is None:
        radii = spec.R * np.arange(samples) / samples
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0) or np.any(radii >= spec.R):
        raise ValueError("radii must lie in [0, R)")
    lhs = spec.lap_W(radii)
    rhs = spec.A / (1 + radii ** 2) * spec.W(radii) ** spec.p
    ratio = lhs / rhs
    holds = bool(np.all(ratio <= 1 + 1e-12))
    inner = radii[radii <= fd_cutoff * spec.R]
    fd = np.array([radial_fd_laplacian(spec.W, [x], spec.n, ref=spec.R - x)[0] for x in inner])
    fd_gap = _rel_gap(fd, spec.lap_W(inner)) if len(inner) else 0.0
    if not spec.admissible:
        verdict = "condition not met"
    else:
        verdict = "pass" if holds else "fail"
    return BarrierVerdict(spec.admissible, holds, float(np.max(ratio)), fd_gap, int(len(radii)), verdict)


# ---------------------------------------------------------------- mixed pair

@dataclass
class MixedPairSpec:
    """Z = C_z (1+rho^2)^-alpha_z, W = B - A_w (1+rho^2)^-beta_w for the system exponents (p, q, r).

    beta_w is the decay of the W ansatz, unrelated to beta_sys = max(p+q, 1).
    """

    n: int
    p: float
    r: float
    q: float = 1.0
    alpha_z: float = 1.25
    beta_w: float = 0.5

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("the mixed pair needs n >= 3")
        lo = 2.0 / (self.n - 2)
        if not (self.p > lo and self.r - 1 > lo):
            raise ValueError(f"empty exponent window: need p > 2/(n-2) = {lo} and r - 1 > 2/(n-2)")
        inv = 1.0 / self.alpha_z
        if not (lo < inv < min(self.p, self.r - 1)):
            raise ValueError(f"1/alpha_z = {inv} outside ({lo}, {min(self.p, self.r - 1)})")
        if not (0 < self.beta_w < self.p * self.alpha_z - 1):
            raise ValueError(f"beta_w = {self.beta_w} outside (0, {self.p * self.alpha_z - 1})")

    @property
    def beta_sys(self) -> float:
        return max(self.p + self.q, 1.0)

    @property
    def gamma_sys(self) -> float:
        return max(self.q + self.r, 1.0)


def z_ansatz(rho, Cz, a):
    return Cz * (1 + rho ** 2) ** (-a)


def w_ansatz(rho, B, Aw, b):
    return B - Aw * (1 + rho ** 2) ** (-b)


def minus_lap_z(rho, Cz, a, n):
    return 2 * a * Cz * (1 + rho ** 2) ** (-a - 2) * (n + (n - 2 - 2 * a) * rho ** 2)


def lap_w(rho, Aw, b, n):
    return 2 * b * Aw * (1 + rho ** 2) ** (-b - 2) * (n + (n - 2 - 2 * b) * rho ** 2)


@dataclass
class MixedPairVerdict:
    C_z: float
    A_w: float
    B: float
    C: float
    z_holds: bool
    w_holds: bool
    w_bounds_hold: bool
    fd_gap_z: float
    fd_gap_w: float
    radii: int

    @property
    def passed(self) -> bool:
        return self.z_holds and self.w_holds and self.w_bounds_hold and self.C > 0


def _log_grid(decades=7, per_decade=8, lo=-3):
    return 10.0 ** (lo + np.arange(decades * per_decade + 1) / per_decade)


def mixed_pair_check(spec: MixedPairSpec, C: float = 1.0, radii: Optional[np.ndarray] = None,
                     samples: int = 1000, rho_max: float = 1e3) -> MixedPairVerdict:
    """Find C_z, A_w and B = A_w (1 + s) on log grids such that, at every sampled radius,

        -ΔZ >= C W^beta_sys Z^r   and   ΔW >= C Z^p W^gamma_sys.

    The scan runs over C_z and A_w from large to small and s from small to
    large; the first witness is returned.  C = 0 in the verdict means none was found.
    """
    if not C > 0:
        raise ValueError("the inequality constant must be positive")
    if radii is None:
        radii = np.linspace(0.0, rho_max, samples)
    rho = np.asarray(radii, dtype=float)
    n, a, b = spec.n, spec.alpha_z, spec.beta_w
    grid = _log_grid()
    desc = grid[::-1]
    unit = 1 + rho ** 2
    Aw = desc[:, None, None]
    s = grid[None, :, None]
    W = Aw * (1 + s) - Aw * unit ** (-b)
    Wb, Wg = W ** spec.beta_sys, W ** spec.gamma_sys
    lapW = 2 * b * Aw * unit ** (-b - 2) * (n + (n - 2 - 2 * b) * rho ** 2)
    witness = None
    for Cz in desc:
        Z = z_ansatz(rho, Cz, a)
        ok = (np.all(minus_lap_z(rho, Cz, a, n) >= C * Wb * Z ** spec.r, axis=-1)
              & np.all(lapW >= C * Z ** spec.p * Wg, axis=-1))
        if ok.any():
            i, j = np.argwhere(ok)[0]
            witness = (float(Cz), float(desc[i]), float(desc[i] * (1 + grid[j])))
            break
    if witness is None:
        return MixedPairVerdict(0.0, 0.0, 0.0, 0.0, False, False, False, math.nan, math.nan, int(len(rho)))
    Cz, Aw_, B_ = witness
    Z = z_ansatz(rho, Cz, a)
    Wv = w_ansatz(rho, B_, Aw_, b)
    z_holds = bool(np.all(minus_lap_z(rho, Cz, a, n) >= C * Wv ** spec.beta_sys * Z ** spec.r))
    w_holds = bool(np.all(lap_w(rho, Aw_, b, n) >= C * Z ** spec.p * Wv ** spec.gamma_sys))
    w_bounds = bool(np.all((Wv >= B_ - Aw_) & (Wv < B_)))
    probe = np.linspace(0.0, 10.0, 101)
    gz = _rel_gap(radial_fd_laplacian(lambda x: z_ansatz(x, Cz, a), probe, n), -minus_lap_z(probe, Cz, a, n))
    gw = _rel_gap(radial_fd_laplacian(lambda x: w_ansatz(x, B_, Aw_, b), probe, n), lap_w(probe, Aw_, b, n))
    return MixedPairVerdict(Cz, Aw_, B_, C, z_holds, w_holds, w_bounds, gz, gw, int(len(rho)))


def _rel_gap(fd, exact):
    return float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1e-300)))


# ---------------------------------------------------------------- Z/W pointwise bounds

def C_q(q: float) -> float:
    return 1.0 if q >= 1 else q


@dataclass
class ZWBoundsReport:
    min_slack_f: float
    min_slack_g: float
    scale: float
    holds: bool
    identity_gap: float
    identity_nonnegative: Optional[bool]
    samples: int


def _minorant_factor(exps, box, beta_form):
    p, q = exps.p, exps.q
    if not beta_form:
        return p + q - 1, 1.0
    beta = max(p + q, 1.0)
    if p + q >= 1:
        return beta - 1, 1.0
    if box is None:
        raise ValueError("the beta-form minorant with p + q < 1 needs a boundedness box")
    # v^(p+q-1) >= box^(p+q-1) for v <= box
    return beta - 1, box ** (p + q - 1)


def pointwise_ZW_bounds(K: float, coeffs: Coefficients, exps: Exponents,
                        sample_spec: SampleSpec = SampleSpec(), box: Optional[float] = None,
                        beta_form: bool = False, seed: int = 0, identity_samples: int = 1000) -> ZWBoundsReport:
    """f >= a C_q K^-1 u^r v^(p+q-1)(Kv - u) on {u <= Kv} and g >= b C_q v^r u^(p+q-1)(u - Kv) on {u >= Kv}.

    With beta_form the power p+q-1 is replaced by beta_sys - 1 (times the box
    constant when p + q < 1, valid for samples inside the box).
    """
    a, b, c, d = coeffs.at()
    if a * b < c * d:
        raise ValueError("needs ab >= cd")
    p, q, r = exps.p, exps.q, exps.r
    u, v = sample_spec.grid()
    if box is not None:
        keep = (u <= box) & (v <= box)
        u, v = u[keep], v[keep]
    f = u ** r * v ** p * (a * v ** q - c * u ** q)
    g = v ** r * u ** p * (b * u ** q - d * v ** q)
    k, factor = _minorant_factor(exps, box, beta_form)
    cq = C_q(q)
    lower = u <= K * v
    mf = factor * a * cq / K * u ** r * v ** k * (K * v - u)
    mg = factor * b * cq * v ** r * u ** k * (u - K * v)
    sf = np.where(lower, f - mf, np.inf)
    sg = np.where(~lower | (u == K * v), g - mg, np.inf)
    scale = float(max(np.max(np.abs(f)), np.max(np.abs(g)), np.max(np.abs(mf)), np.max(np.abs(mg)), 1e-300))
    msf, msg = float(np.min(sf)), float(np.min(sg))
    gap, nonneg = factorization_identity(p, q, r, seed=seed, samples=identity_samples)
    return ZWBoundsReport(msf, msg, scale, msf >= -1e-12 * scale and msg >= -1e-12 * scale,
                          gap, nonneg, int(np.size(u)))


def factorization_identity(p, q, r, seed: int = 0, samples: int = 1000):
    """max relative gap of X^r + X^(p+q+1) - X^(q+r) - X^(p+1) = X^r (1-X^q)(1-X^(p+1-r)),
    and (for r <= 1) whether the left side is nonnegative."""
    rng = np.random.default_rng(seed)
    X = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), samples))
    terms = (X ** r, X ** (p + q + 1), X ** (q + r), X ** (p + 1))
    lhs = terms[0] + terms[1] - terms[2] - terms[3]
    rhs = X ** r * (1 - X ** q) * (1 - X ** (p + 1 - r))
    scale = np.maximum.reduce([np.abs(t) for t in terms])
    gap = float(np.max(np.abs(lhs - rhs) / scale))
    nonneg = bool(np.all(rhs >= 0)) if r <= 1 else None
    return gap, nonneg


# ---------------------------------------------------------------- exponent gates

@dataclass
class Condition:
    name: str
    holds: bool
    margin: float


def cone_weight_admissibility(r_ineq: float, kappa: float, n: int, tol: float = 1e-12):
    """kappa > -2, kappa + r >= -1 and 0 <= r <= (n+1+kappa)/(n-1)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    bound = (n + 1 + kappa) / (n - 1)
    conds = [
        Condition("kappa_gt_minus_2", kappa > -2, kappa + 2),
        Condition("kappa_plus_r_ge_minus_1", kappa + r_ineq >= -1 - tol, kappa + r_ineq + 1),
        Condition("r_in_range", -tol <= r_ineq <= bound + tol, min(r_ineq, bound - r_ineq)),
    ]
    return all(c.holds for c in conds), conds


def theorem_weight(q: float, s: float, n: int) -> float:
    """kappa = s - (n-1) q, the weight used with r = 0."""
    return s - (n - 1) * q


@dataclass
class HalfspaceGateReport:
    disjuncts: dict
    gate_r: bool
    gate_s: bool
    semitrivial_gate: bool

    @property
    def classification(self) -> bool:
        return self.gate_r and self.gate_s

    @property
    def semitrivial(self) -> bool:
        return self.classification and self.semitrivial_gate

    @property
    def scope(self) -> str:
        return "within theorem scope" if self.classification else "outside theorem scope"

    def as_dict(self) -> dict:
        return {"disjuncts": self.disjuncts, "gate_r": self.gate_r, "gate_s": self.gate_s,
                "semitrivial_gate": self.semitrivial_gate, "classification": self.classification,
                "semitrivial": self.semitrivial, "scope": self.scope}


def halfspace_gate_check(p: float, q: float, r: float, s: float, n: int) -> HalfspaceGateReport:
    if min(p, q, r, s) < 0:
        raise ValueError("exponents must be nonnegative")
    if n < 2:
        raise ValueError("n must be >= 2")
    m = n - 1
    dis = {
        "r_le_(n+1+p)/(n-1)": (r, (n + 1 + p) / m),
        "q_le_(1+s)/(n-1)": (q, (1 + s) / m),
        "s_le_(n+1+q)/(n-1)": (s, (n + 1 + q) / m),
        "p_le_(1+r)/(n-1)": (p, (1 + r) / m),
        "min(p+r,q+s)_le_(n+1)/(n-1)": (min(p + r, q + s), (n + 1) / m),
    }
    out = {k: {"value": v, "bound": bd, "holds": v <= bd} for k, (v, bd) in dis.items()}
    gate_r = out["r_le_(n+1+p)/(n-1)"]["holds"] or out["q_le_(1+s)/(n-1)"]["holds"]
    gate_s = out["s_le_(n+1+q)/(n-1)"]["holds"] or out["p_le_(1+r)/(n-1)"]["holds"]
    return HalfspaceGateReport(out, gate_r, gate_s, out["min(p+r,q+s)_le_(n+1)/(n-1)"]["holds"])


# ---------------------------------------------------------------- discrete harmonicity

@dataclass
class RadialPair:
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    n: int

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])


def radial_pair_from_profile(profile, nodes: int = 1001, t_end: Optional[float] = None) -> RadialPair:
    """Sample a shot profile u and v = 1 - u on a uniform radial grid."""
    t_end = float(profile.t_grid[-1]) if t_end is None else t_end
    r = np.linspace(0.0, t_end, nodes)
    u = profile.u(r)
    return RadialPair(r, u, 1.0 - u, profile.n)


@dataclass
class HarmonicityReport:
    min_lap_W: float
    min_minus_lap_Z: float
    tau: float
    W_subharmonic: bool
    Z_superharmonic: bool
    residual: float

    @property
    def passed(self) -> bool:
        return self.W_subharmonic and self.Z_superharmonic


def discrete_harmonicity_check(fld, inst: ProblemInstance, K: Optional[float] = None, tol_factor: float = 10.0,
                               residual_tol: float = 1e-6) -> HarmonicityReport:
    """Δ_h W >= -tau and -Δ_h Z >= -tau at interior nodes, tau = tol_factor h^2 max|Δ_h(u, v)|.

    The field must solve the constant-coefficient system to residual_tol
    (relative to max(1, |Δ_h u|, |f|)).
    """
    a, b, c, d = inst.coeffs.at()
    if a * b < c * d:
        raise ValueError("needs ab >= cd")
    if K is None:
        K = compute_K(inst.coeffs, inst.exps).K
    if isinstance(fld, RadialPair):
        h = fld.h
        u, v = fld.u, fld.v

        def lap(w):
            return radial_laplacian(w, h, fld.n)

        ui, vi = u[:-1], v[:-1]
    else:
        h = fld.h
        u, v = fld.u, fld.v
        lap = fld.laplacian
        mask = fld.interior()
        ui, vi = u[mask], v[mask]
    lu, lv = lap(u), lap(v)
    F = eval_f(np.maximum(ui, 0), np.maximum(vi, 0), inst)
    G = eval_g(np.maximum(ui, 0), np.maximum(vi, 0), inst)
    scale = max(1.0, float(np.max(np.abs(lu))), float(np.max(np.abs(lv))),
                float(np.max(np.abs(F))), float(np.max(np.abs(G))))
    res = max(float(np.max(np.abs(lu + F))), float(np.max(np.abs(lv + G)))) / scale
    if res > residual_tol:
        raise ValueError(f"field does not solve the system: scaled residual {res:.3g} > {residual_tol:g}")
    W = np.abs(u - K * v)
    Z = np.minimum(u, K * v)
    tau = tol_factor * h ** 2 * max(float(np.max(np.abs(lu))), float(np.max(np.abs(lv))))
    lw = lap(W)
    mz = -lap(Z)
    return HarmonicityReport(float(np.min(lw)), float(np.min(mz)), tau,
                             bool(np.min(lw) >= -tau), bool(np.min(mz) >= -tau), res)
