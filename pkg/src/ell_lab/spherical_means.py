"""Half-spherical means on the upper half-space {x_n > 0}.

For a center y on the boundary hyperplane,

    [w]_y(R) = 1/(R^2 |S_R^+|) * integral over S_R^+(y) of w(x) x_n dσ
             = 1/(R |S_1^+|) * integral over S_1^+ of w(y + R z) z_n dσ(z).

Deterministic product rules are used for n = 2, 3 and seeded Monte Carlo
for n >= 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma

GL_POINTS = 10
DEFAULT_PANELS = 32
MC_SAMPLES = 200_000


@dataclass
class FieldWithLaplacian:
    """w(x) and optionally Δw(x); points carry coordinates in the last axis."""

    w: Callable
    lap: Optional[Callable] = None
    name: str = "field"

    def __call__(self, x):
        return np.asarray(self.w(x), dtype=float) + 0.0 * x[..., -1]

    def laplacian(self, x):
        if self.lap is None:
            raise ValueError(f"field {self.name!r} has no Laplacian")
        return np.asarray(self.lap(x), dtype=float) + 0.0 * x[..., -1]

    def scaled(self, alpha: float) -> "FieldWithLaplacian":
        lap = None if self.lap is None else (lambda x: alpha * self.laplacian(x))
        return FieldWithLaplacian(lambda x: alpha * self(x), lap, f"{alpha}*{self.name}")


def linear_combination(alpha, w1: FieldWithLaplacian, beta, w2: FieldWithLaplacian) -> FieldWithLaplacian:
    lap = None
    if w1.lap is not None and w2.lap is not None:
        lap = lambda x: alpha * w1.laplacian(x) + beta * w2.laplacian(x)
    return FieldWithLaplacian(lambda x: alpha * w1(x) + beta * w2(x), lap, "combination")


class PolynomialField(FieldWithLaplacian):
    """Sum of coef * prod x_i^e_i over {exponent tuple: coef}, with exact Laplacian."""

    def __init__(self, terms: Dict[Tuple[int, ...], float], name: str = "polynomial"):
        self.terms = {tuple(int(e) for e in k): float(c) for k, c in terms.items()}
        super().__init__(self._eval, self._lap, name)

    def _eval(self, x):
        out = np.zeros(x.shape[:-1])
        for exps, c in self.terms.items():
            out = out + c * np.prod([x[..., i] ** e for i, e in enumerate(exps)], axis=0)
        return out

    def _lap(self, x):
        out = np.zeros(x.shape[:-1])
        for exps, c in self.terms.items():
            for i, e in enumerate(exps):
                if e < 2:
                    continue
                d = list(exps)
                d[i] = e - 2
                out = out + c * e * (e - 1) * np.prod([x[..., j] ** k for j, k in enumerate(d)], axis=0)
        return out

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)


def catalogue(name: str, coefficients: Optional[Dict] = None) -> FieldWithLaplacian:
    """Built-in fields: x_n, x_n^2, superharmonic (x_n + 1 - exp(-x_n)), polynomial."""
    if name == "x_n":
        return FieldWithLaplacian(lambda x: x[..., -1], lambda x: 0.0 * x[..., -1], name)
    if name == "x_n^2":
        return FieldWithLaplacian(lambda x: x[..., -1] ** 2, lambda x: 2.0 + 0.0 * x[..., -1], name)
    if name == "superharmonic":
        return FieldWithLaplacian(lambda x: x[..., -1] + 1.0 - np.exp(-x[..., -1]),
                                  lambda x: -np.exp(-x[..., -1]), name)
    if name == "polynomial":
        if not coefficients:
            raise ValueError("polynomial field needs coefficients")
        return PolynomialField(coefficients)
    raise ValueError(f"unknown field {name!r}")


def half_sphere_area(n: int) -> float:
    return math.pi ** (n / 2) / gamma(n / 2)


def half_sphere_moment(exponents: Sequence[int]) -> float:
    """Integral of prod |z_i|^a_i over the unit half-sphere {z_n > 0}."""
    a = np.asarray(exponents, dtype=float)
    return float(np.prod(gamma((a + 1) / 2)) / gamma(np.sum(a + 1) / 2))


def _gauss_panels(lo, hi, panels, points=GL_POINTS):
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def half_sphere_rule(n: int, panels: int = DEFAULT_PANELS):
    """Nodes z (M, n) on the unit half-sphere and weights summing to |S_1^+|."""
    if n == 2:
        th, w = _gauss_panels(0.0, math.pi, panels)
        return np.stack([np.cos(th), np.sin(th)], axis=-1), w
    if n == 3:
        mu, wm = _gauss_panels(0.0, 1.0, panels)
        m = 4 * panels
        psi = 2 * math.pi * np.arange(m) / m
        MU, PSI = np.meshgrid(mu, psi, indexing="ij")
        s = np.sqrt(1.0 - MU ** 2)
        z = np.stack([s * np.cos(PSI), s * np.sin(PSI), MU], axis=-1).reshape(-1, 3)
        w = (wm[:, None] * np.full(m, 2 * math.pi / m)[None, :]).ravel()
        return z, w
    raise ValueError("deterministic half-sphere rules exist for n = 2, 3 only")


@dataclass
class HalfMeanSample:
    y: np.ndarray
    R: float
    n: int
    value: float
    error: float
    method: str
    seed: Optional[int] = None

    def as_row(self):
        return (self.R, self.value, self.error)


def _center(y, n):
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    if y.shape != (n,):
        raise ValueError(f"center must have {n} coordinates")
    if y[-1] != 0:
        raise ValueError("center must lie on the boundary hyperplane x_n = 0")
    return y


def _mean_det(w, y, R, n, panels):
    z, wt = half_sphere_rule(n, panels)
    vals = w(y + R * z)
    return float(np.dot(wt, vals * z[:, -1]) / (R * half_sphere_area(n)))


def half_sphere_mean(w: FieldWithLaplacian, y=None, R: float = 1.0, n: int = 2, panels: int = DEFAULT_PANELS,
                     seed: int = 0, samples: int = MC_SAMPLES) -> HalfMeanSample:
    if not R > 0:
        raise ValueError("R must be positive")
    y = _center(y, n)
    if n in (2, 3):
        coarse = _mean_det(w, y, R, n, panels)
        fine = _mean_det(w, y, R, n, 2 * panels)
        return HalfMeanSample(y, R, n, fine, abs(fine - coarse), "deterministic")
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z[:, -1] = np.abs(z[:, -1])
    vals = w(y + R * z) * z[:, -1] / R
    return HalfMeanSample(y, R, n, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)),
                          "monte-carlo", seed)


def _half_ball_integral(g, y, R, n, panels):
    """Integral of g(x) x_n over the half-ball B_R^+(y)."""
    z, wt = half_sphere_rule(n, panels)
    rho, wr = _gauss_panels(0.0, R, max(4, panels // 4))
    pts = y + rho[:, None, None] * z[None, :, :]
    vals = g(pts) * pts[..., -1]
    return float(np.einsum("i,j,ij->", wr * rho ** (n - 1), wt, vals))


def _disk_integral(w, y, R, n, panels):
    """Integral of w over the flat disk D_R(y) in the boundary hyperplane."""
    if n == 2:
        s, ws = _gauss_panels(-R, R, panels)
        pts = np.stack([y[0] + s, np.zeros_like(s)], axis=-1)
        return float(np.dot(ws, w(pts)))
    rho, wr = _gauss_panels(0.0, R, panels)
    m = 4 * panels
    psi = 2 * math.pi * np.arange(m) / m
    P, S = np.meshgrid(rho, psi, indexing="ij")
    pts = np.stack([y[0] + P * np.cos(S), y[1] + P * np.sin(S), np.zeros_like(P)], axis=-1)
    return float(np.einsum("i,ij->", wr * rho, w(pts)) * 2 * math.pi / m)


@dataclass
class IdentityCheck:
    lhs: float
    rhs: float
    abs_gap: float
    rel_gap: float
    interior_term: float
    disk_term: float


def mean_derivative_identity_check(w: FieldWithLaplacian, y=None, R: float = 1.0, n: int = 2,
                                   panels: int = DEFAULT_PANELS) -> IdentityCheck:
    """d/dR [w](R) by a 5-point difference against the half-ball/disk representation."""
    if w.lap is None:
        raise ValueError("the derivative identity needs the Laplacian of w")
    if n not in (2, 3):
        raise ValueError("the identity check is available for n = 2, 3")
    y = _center(y, n)
    d = 1e-3 * R
    m = {k: _mean_det(w, y, R + k * d, n, panels) for k in (-2, -1, 1, 2)}
    lhs = (-m[2] + 8 * m[1] - 8 * m[-1] + m[-2]) / (12 * d)
    norm = R ** 2 * R ** (n - 1) * half_sphere_area(n)
    interior = _half_ball_integral(w.laplacian, y, R, n, panels) / norm
    disk = _disk_integral(w, y, R, n, panels) / norm
    rhs = interior - disk
    gap = abs(lhs - rhs)
    scale = max(abs(lhs), abs(interior), abs(disk), 1e-300)
    return IdentityCheck(lhs, rhs, gap, gap / scale, interior, disk)


@dataclass
class MonotonicityVerdict:
    radii: list
    means: list
    errors: list
    monotone: bool
    nonnegative: bool
    violations: list
    consistent: bool
    limit_estimate: float
    limit_slack: float
    second_center_mean: Optional[float] = None
    centers_agree: Optional[bool] = None

    def rows(self):
        return list(zip(self.radii, self.means, self.errors))


def monotonicity_scan(w: FieldWithLaplacian, y=None, radii: Sequence[float] = (1, 2, 4, 8, 16, 32, 64),
                      n: int = 2, y2=None, panels: int = DEFAULT_PANELS, seed: int = 0,
                      floor: float = 1e-12) -> MonotonicityVerdict:
    """Nonincreasing means within quadrature slack, sign of the means, and cross-center agreement.

    A positive superharmonic field has nonnegative, nonincreasing means; a
    violation of either is reported as inconsistency.  floor is an absolute
    slack added to each comparison to absorb round-off.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    samples = [half_sphere_mean(w, y, R, n, panels, seed=seed + k) for k, R in enumerate(radii)]
    means = [s.value for s in samples]
    errs = [s.error for s in samples]
    violations = [k for k in range(len(radii) - 1)
                  if means[k + 1] > means[k] + errs[k] + errs[k + 1] + floor]
    nonneg = all(m >= -e - floor for m, e in zip(means, errs))
    if len(means) >= 2:
        extrap = 2 * means[-1] - means[-2] if radii[-1] == 2 * radii[-2] else means[-1]
        L = min(means[-1], extrap)
        slack = errs[-1] + errs[-2]
    else:
        L, slack = means[-1], errs[-1]
    verdict = MonotonicityVerdict(radii, means, errs, not violations, nonneg, violations,
                                  (not violations) and nonneg, L, slack)
    if y2 is not None:
        s2 = half_sphere_mean(w, y2, radii[-1], n, panels, seed=seed + len(radii))
        verdict.second_center_mean = s2.value
        # both means approach their limits from above; the last decrement brackets the distance
        tol = errs[-1] + s2.error + abs(means[-2] - means[-1]) + floor
        verdict.centers_agree = abs(s2.value - means[-1]) <= tol
    return verdict


@dataclass
class LowerBoundVerdict:
    passed: bool
    min_slack: float
    samples: int
    worst_point: list


def linear_lower_bound_check(w: FieldWithLaplacian, L: float, points: np.ndarray, n: int,
                             tol: float = 1e-12) -> LowerBoundVerdict:
    """w(x) >= (L / [x_n]) x_n - tol at each sample, with [x_n] = 1/n."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != n or np.any(points[..., -1] < 0):
        raise ValueError("sample points must lie in the closed upper half-space")
    slack = w(points) - L * n * points[..., -1]
    k = int(np.argmin(slack))
    return LowerBoundVerdict(bool(slack[k] >= -tol), float(slack[k]), int(len(points)), points[k].tolist())


def half_space_samples(n: int, count: int = 1000, extent: float = 10.0, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-extent, extent, size=(count, n))
    pts[:, -1] = np.abs(pts[:, -1])
    return pts
