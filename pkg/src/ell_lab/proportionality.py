"""The proportionality constant K and the sign structure it certifies.

For f = u^r v^p (a v^q - c u^q), g = v^r u^p (b u^q - d v^q) there is a
K > 0 with (Kg - f)(u - Kv) > 0 off the diagonal u = Kv.  K is the root of

    J(K) = c K^(q+m) + b K^(q+1) - a K^m - d K        (r >= p)
    J(K) = b K^(q+m+1) + c K^q - d K^(m+1) - a         (r <  p)

with m = |r - p|.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .system_model import Coefficients, Exponents

ROOT_RTOL = 1e-13
SCAN_POINTS = 10_000
MAX_DOUBLINGS = 200


@dataclass
class ProportionalityCertificate:
    K: float
    residual: float
    margin_a: float
    margin_b: float
    unique: bool
    source: str  # "closed-form" or "root-find"
    sign_changes: int = 1

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("sign_changes")
        return json.dumps(d, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ProportionalityCertificate":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class HKCoefficients:
    A: float
    B: float
    C: float
    D: float
    m: float
    q: float

    @property
    def ell(self) -> float:
        if self.m == 0:
            raise ValueError("ell = q/m is undefined when r == p")
        return self.q / self.m


def hk_coefficients(K: float, coeffs: Coefficients, exps: Exponents) -> HKCoefficients:
    a, b, c, d = coeffs.at()
    if exps.r >= exps.p:
        return HKCoefficients(A=c, B=K * b, C=a, D=K * d, m=exps.m, q=exps.q)
    return HKCoefficients(A=K * b, B=c, C=K * d, D=a, m=exps.m, q=exps.q)


def eval_HK(K, X, coeffs: Coefficients, exps: Exponents):
    """H_K(X) = A X^(q+m) + B X^q - C X^m - D."""
    X = np.asarray(X, dtype=float)
    if np.any(X <= 0) or K <= 0:
        raise ValueError("H_K needs X > 0 and K > 0")
    hk = hk_coefficients(K, coeffs, exps)
    q, m = exps.q, exps.m
    return hk.A * X ** (q + m) + hk.B * X ** q - hk.C * X ** m - hk.D


def eval_hK(K, t, coeffs: Coefficients, exps: Exponents):
    """h_K(t) = A t^(l+1) + B t^l - C t - D with l = q/m, so H_K(X) = h_K(X^m)."""
    if exps.m == 0:
        raise ValueError("h_K is undefined for r == p (m = 0)")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or K <= 0:
        raise ValueError("h_K needs t > 0 and K > 0")
    hk = hk_coefficients(K, coeffs, exps)
    ell = exps.q / exps.m
    return hk.A * t ** (ell + 1) + hk.B * t ** ell - hk.C * t - hk.D


def _J_terms(K, coeffs: Coefficients, exps: Exponents):
    a, b, c, d = coeffs.at()
    q, m = exps.q, exps.m
    K = np.asarray(K, dtype=float)
    if exps.r >= exps.p:
        return c * K ** (q + m), b * K ** (q + 1), -a * K ** m, -d * K
    return b * K ** (q + m + 1), c * K ** q, -d * K ** (m + 1), -a + 0 * K


def eval_J(K, coeffs: Coefficients, exps: Exponents):
    t = _J_terms(K, coeffs, exps)
    return t[0] + t[1] + t[2] + t[3]


def _dJ(K, coeffs, exps):
    a, b, c, d = coeffs.at()
    q, m = exps.q, exps.m
    if exps.r >= exps.p:
        dm = 0.0 if m == 0 else a * m * K ** (m - 1)
        return c * (q + m) * K ** (q + m - 1) + b * (q + 1) * K ** q - dm - d
    return b * (q + m + 1) * K ** (q + m) + c * q * K ** (q - 1) - d * (m + 1) * K ** m


def J_scale(K, coeffs, exps) -> float:
    return float(max(1.0, max(abs(float(t)) for t in _J_terms(K, coeffs, exps))))


def sign_changes(coeffs: Coefficients, exps: Exponents, lo: float = 1e-6, hi: float = 1e6,
                 points: int = SCAN_POINTS) -> tuple:
    """Count sign changes of J on a logarithmic grid; returns (count, brackets)."""
    grid = np.logspace(math.log10(lo), math.log10(hi), points)
    s = np.sign(eval_J(grid, coeffs, exps))
    nz = s != 0
    gs, ss = grid[nz], s[nz]
    idx = np.nonzero(ss[1:] != ss[:-1])[0]
    return len(idx), [(gs[i], gs[i + 1]) for i in idx]


def _bisect_newton(lo, hi, coeffs, exps):
    flo = float(eval_J(lo, coeffs, exps))
    for _ in range(400):
        if hi - lo <= 1e-14 * hi:
            break
        mid = 0.5 * (lo + hi)
        fm = float(eval_J(mid, coeffs, exps))
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    K = 0.5 * (lo + hi)
    # Newton polish, kept inside the final bracket
    for _ in range(3):
        dj = _dJ(K, coeffs, exps)
        if dj == 0 or not np.isfinite(dj):
            break
        step = float(eval_J(K, coeffs, exps)) / dj
        new = K - step
        if not (lo <= new <= hi):
            break
        if abs(float(eval_J(new, coeffs, exps))) > abs(float(eval_J(K, coeffs, exps))):
            break
        K = new
    return K


def _bracket(coeffs, exps):
    lo = hi = 1.0
    j1 = float(eval_J(1.0, coeffs, exps))
    if j1 == 0:
        return 1.0, 1.0
    if j1 < 0:
        for _ in range(MAX_DOUBLINGS):
            lo, hi = hi, hi * 2.0
            if float(eval_J(hi, coeffs, exps)) > 0:
                return lo, hi
    else:
        for _ in range(MAX_DOUBLINGS):
            hi, lo = lo, lo / 2.0
            if float(eval_J(lo, coeffs, exps)) < 0:
                return lo, hi
    raise RuntimeError("no sign change of J found within 200 doublings")


def compute_K(coeffs: Coefficients, exps: Exponents) -> ProportionalityCertificate:
    """Root K of J with a residual certificate, sign margins and a uniqueness scan."""
    if not coeffs.is_constant():
        raise ValueError("compute_K needs constant coefficients")
    a, b, c, d = coeffs.at()
    p, q, r = exps.p, exps.q, exps.r
    if c == 0 and d == 0 and q == r - p:
        # Kg - f = (Kb - a) u^r v^r: only K = a/b works, and then Kg - f == 0
        K, source = a / b, "closed-form"
    elif p == 0 and r == 1:
        K, source = ((a + d) / (b + c)) ** (1.0 / q), "closed-form"
    else:
        lo, hi = _bracket(coeffs, exps)
        K = lo if lo == hi else _bisect_newton(lo, hi, coeffs, exps)
        source = "root-find"

    count, brackets = sign_changes(coeffs, exps, lo=min(1e-6, K / 10), hi=max(1e6, K * 10))
    unique = count == 1
    if count > 1:
        K = _bisect_newton(*brackets[0], coeffs, exps)
        source = "root-find"
    residual = abs(float(eval_J(K, coeffs, exps)))
    return ProportionalityCertificate(
        K=float(K), residual=residual, margin_a=float(a - c * K ** q), margin_b=float(b * K ** q - d),
        unique=unique, source=source, sign_changes=count)


def certificate_ok(cert: ProportionalityCertificate, coeffs: Coefficients, exps: Exponents,
                   rtol: float = ROOT_RTOL) -> bool:
    return cert.residual <= rtol * J_scale(cert.K, coeffs, exps)


@dataclass(frozen=True)
class SampleSpec:
    """Deterministic tensor grid over (0, U_max]^2 with `per_axis` points per axis."""

    U_max: float = 10.0
    per_axis: int = 100

    def grid(self):
        s = self.U_max * np.arange(1, self.per_axis + 1) / self.per_axis
        return np.meshgrid(s, s, indexing="ij")


def _fg(u, v, coeffs, exps):
    a, b, c, d = coeffs.at()
    p, q, r = exps.p, exps.q, exps.r
    f = u ** r * v ** p * (a * v ** q - c * u ** q)
    g = v ** r * u ** p * (b * u ** q - d * v ** q)
    return f, g


@dataclass
class Condition19Report:
    max_signed_product: float
    scale: float
    strict_min_off_diagonal: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_signed_product <= 1e-12 * self.scale and self.strict_min_off_diagonal > 0


def check_condition_19(K: float, coeffs: Coefficients, exps: Exponents,
                       sample_spec: SampleSpec = SampleSpec()) -> Condition19Report:
    """max of (f - Kg)(u - Kv) and min of (Kg - f)(u - Kv) off the diagonal strip."""
    u, v = sample_spec.grid()
    f, g = _fg(u, v, coeffs, exps)
    w = u - K * v
    prod = (f - K * g) * w
    scale = float(np.max((np.abs(f) + K * np.abs(g)) * np.abs(w)))
    off = np.abs(w) > 1e-8 * sample_spec.U_max
    strict = float(np.min(-prod[off])) if np.any(off) else math.inf
    return Condition19Report(float(np.max(prod)), scale, strict, int(u.size))


def lemma72_ratio_inf(case: str, coeffs: Coefficients, exps: Exponents, K: Optional[float] = None,
                      sample_spec: SampleSpec = SampleSpec()) -> float:
    """Infimum over the sample grid of (Kg - f)(u - Kv) divided by its power-law minorant.

    case "i":  minorant u^p v^p (u + Kv)^(q+r-p-1) (u - Kv)^2, needs r > p and c, d > 0
    case "ii": minorant u^r v^min(p,r) (u + Kv)^(q-1+(p-r)_+) (u - Kv)^2, needs d = 0, c > 0
    """
    a, b, c, d = coeffs.at()
    p, q, r = exps.p, exps.q, exps.r
    if case == "i":
        if not r > p:
            raise ValueError("case i requires r > p")
        if not (c > 0 and d > 0):
            raise ValueError("case i requires c > 0 and d > 0")
    elif case == "ii":
        if d != 0:
            raise ValueError("case ii requires d = 0")
        if not c > 0:
            raise ValueError("case ii requires c > 0")
    else:
        raise ValueError(f"unknown case {case!r}")
    if K is None:
        K = compute_K(coeffs, exps).K
    u, v = sample_spec.grid()
    f, g = _fg(u, v, coeffs, exps)
    w = u - K * v
    keep = np.abs(w) >= 1e-8
    if case == "i":
        minorant = u ** p * v ** p * (u + K * v) ** (q + r - p - 1) * w ** 2
    else:
        minorant = u ** r * v ** min(p, r) * (u + K * v) ** (q - 1 + max(p - r, 0.0)) * w ** 2
    ratio = (K * g - f)[keep] * w[keep] / minorant[keep]
    return float(np.min(ratio))
