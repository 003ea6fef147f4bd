"""Shooting for radial solutions of -(t^(n-1) u')' = t^(n-1) f(u), u(0) = eps, u'(0) = 0.

The integration runs on the deviation d = eps - u so that the relative
tolerance of the Runge-Kutta pair applies to the (possibly tiny) change of u
rather than to u itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import RK45, OdeSolution, quad

from ._grids import radial_laplacian, radial_nodes
from .system_model import sobolev_exponent

T0 = 1e-4
BLOWUP = 1e8
MAX_STEPS = 2_000_000


@dataclass(frozen=True)
class FirstZero:
    R: float
    name = "FirstZero"


@dataclass(frozen=True)
class PositiveDecreasing:
    t_max: float
    name = "PositiveDecreasing"


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    name = "Inconclusive"


Event = Union[FirstZero, PositiveDecreasing, Inconclusive]


def spow(x, k):
    """Sign-preserving power, so trial stages slightly below zero stay finite."""
    return np.sign(x) * np.abs(x) ** k


@dataclass
class RadialProfile:
    n: int
    eps: float
    t_grid: np.ndarray
    u_values: np.ndarray
    du_values: np.ndarray
    event: Event
    f: Callable = field(repr=False)
    t0: float = T0
    dense: Optional[OdeSolution] = field(default=None, repr=False)

    def u(self, t):
        """u at arbitrary t in [0, t_end], Taylor expansion below t0."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        small = t < self.t0
        f0 = float(self.f(self.eps))
        out[small] = self.eps - f0 * t[small] ** 2 / (2 * self.n)
        if np.any(~small):
            out[~small] = self.eps - self.dense(t[~small])[0]
        return out

    def du(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        small = t < self.t0
        out[small] = -float(self.f(self.eps)) * t[small] / self.n
        if np.any(~small):
            out[~small] = self.dense(t[~small])[1]
        return out

    def rows(self):
        return [(float(t), float(u), float(du)) for t, u, du in
                zip(self.t_grid, self.u_values, self.du_values)]

    def event_dict(self) -> dict:
        ev = self.event
        d = {"event": ev.name, "n": self.n, "eps": self.eps}
        if isinstance(ev, FirstZero):
            d["R"] = ev.R
        elif isinstance(ev, PositiveDecreasing):
            d["t_max"] = ev.t_max
        else:
            d["reason"] = ev.reason
        return d


def _rhs(n, f, eps):
    def rhs(t, y):
        u = eps - y[0]
        return np.array([-y[1], -f(u) - (n - 1) / t * y[1]])
    return rhs


def _bisect_zero(dense, eps, lo, hi, width):
    u_lo = eps - dense(lo)[0]
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        um = eps - dense(mid)[0]
        if um == 0:
            return mid
        if (um > 0) == (u_lo > 0):
            lo, u_lo = mid, um
        else:
            hi = mid
    return 0.5 * (lo + hi)


def integrate_ivp(n: int, f_scalar: Callable, eps: float, t_max: float, tol: float = 1e-10,
                  t0: float = T0, tol_mono: Optional[float] = None) -> RadialProfile:
    """Shoot from u(0) = eps and classify the outcome.

    Returns FirstZero(R) when u changes sign, PositiveDecreasing(t_max) when u
    stays positive with u' <= tol_mono up to t_max, and Inconclusive otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not t_max > t0:
        raise ValueError("t_max must exceed the start offset t0")
    tol_mono = tol if tol_mono is None else tol_mono
    f0 = float(f_scalar(eps))
    y0 = np.array([f0 * t0 ** 2 / (2 * n), -f0 * t0 / n])
    solver = RK45(_rhs(n, f_scalar, eps), t0, y0, t_max, rtol=tol, atol=tol * 1e-10)

    ts, ys, interps = [t0], [y0.copy()], []
    event: Optional[Event] = None
    for _ in range(MAX_STEPS):
        if solver.status != "running":
            break
        t_old = solver.t
        solver.step()
        if solver.status == "failed":
            event = Inconclusive("stiffness")
            break
        interp = solver.dense_output()
        u_new = eps - solver.y[0]
        if not np.all(np.isfinite(solver.y)) or abs(u_new) > BLOWUP:
            event = Inconclusive("blow-up")
            break
        if u_new <= 0:
            dense_step = OdeSolution([t_old, solver.t], [interp])
            R = _bisect_zero(dense_step, eps, t_old, solver.t, 1e-12 * solver.t)
            interps.append(interp)
            ts.append(solver.t)
            ys.append(solver.y.copy())
            event = FirstZero(R)
            break
        interps.append(interp)
        ts.append(solver.t)
        ys.append(solver.y.copy())
    else:
        event = Inconclusive("step budget exhausted")

    dense = OdeSolution(ts, interps) if interps else None
    t_grid = np.array(ts)
    Y = np.array(ys)
    u_vals, du_vals = eps - Y[:, 0], Y[:, 1]
    if isinstance(event, FirstZero):
        keep = t_grid < event.R
        t_grid, u_vals, du_vals = t_grid[keep], u_vals[keep], du_vals[keep]
    if event is None:
        if np.all(u_vals > 0) and np.all(du_vals <= tol_mono):
            event = PositiveDecreasing(float(t_grid[-1]))
        else:
            event = Inconclusive("positive but not monotone")
    return RadialProfile(n=n, eps=eps, t_grid=t_grid, u_values=u_vals, du_values=du_vals,
                         event=event, f=f_scalar, t0=t0, dense=dense)


def counterexample_nonlinearity(p: float, q: float) -> Callable:
    """u^p (1-u)^p [(1-u)^q - u^q], the reduced nonlinearity for v = 1 - u."""
    def f(u):
        w = 1.0 - u
        return spow(u, p) * spow(w, p) * (spow(w, q) - spow(u, q))
    return f


@dataclass
class CounterexamplePair:
    u: RadialProfile
    v_values: np.ndarray
    K: float = 1.0

    @property
    def ratio(self) -> np.ndarray:
        return self.u.u_values / self.v_values

    @property
    def ratio_spread(self) -> float:
        """Relative spread (max - min) / value at the origin of u/v over the grid."""
        r = self.ratio
        r0 = self.u.eps / (1.0 - self.u.eps)
        return float((r.max() - r.min()) / r0)

    @property
    def ratio_spread_abs(self) -> float:
        r = self.ratio
        return float(r.max() - r.min())


def counterexample_profile(n: int, p: float, q: float, eps: float, t_max: float,
                           tol: float = 1e-10) -> CounterexamplePair:
    """Shoot the reduced scalar problem and return the pair (u, 1 - u)."""
    if n < 3:
        raise ValueError("needs n >= 3")
    ps = sobolev_exponent(n)
    if not p > ps:
        raise ValueError(f"needs p = r > (n+2)/(n-2) = {ps}")
    if not q > 0:
        raise ValueError("needs q > 0")
    if not 0 < eps < 0.5:
        raise ValueError("needs 0 < eps < 1/2")
    prof = integrate_ivp(n, counterexample_nonlinearity(p, q), eps, t_max, tol=tol)
    if isinstance(prof.event, FirstZero):
        raise ValueError(f"epsilon too large for counterexample: u vanishes at R = {prof.event.R:.6g}; "
                         "shrink eps so that h(X) = X f(X) - (p_S+1) F(X) stays nonnegative on (0, eps]")
    if not isinstance(prof.event, PositiveDecreasing):
        raise ValueError(f"integration inconclusive: {prof.event.reason}")
    v = 1.0 - prof.u_values
    if not (np.all(prof.u_values > 0) and np.all(prof.u_values < 1)):
        raise AssertionError("profile left (0, 1)")
    return CounterexamplePair(u=prof, v_values=v)


def integrated_identity_residual(profile: RadialProfile, checkpoints: int = 20) -> float:
    """max over checkpoints of |t^(n-1) u'(t) + int_0^t s^(n-1) f(u(s)) ds|, scaled.

    The scale is the size of the integral term, floored at the tiniest positive float.
    """
    n, f = profile.n, profile.f
    t_end = float(profile.t_grid[-1])
    ts = np.linspace(t_end / checkpoints, t_end, checkpoints)
    worst = 0.0
    knots = profile.t_grid

    def integrand(s):
        return s ** (n - 1) * float(f(profile.u(np.array([s]))[0]))

    for t in ts:
        pts = knots[(knots > 0) & (knots < t)]
        pts = pts[:: max(1, len(pts) // 40)]
        integral = 0.0
        prev = 0.0
        for b in list(pts) + [t]:
            val, _ = quad(integrand, prev, b, epsabs=0.0, epsrel=1e-12, limit=200)
            integral += val
            prev = b
        lhs = t ** (n - 1) * float(profile.du(np.array([t]))[0])
        scale = max(abs(integral), abs(lhs), np.finfo(float).tiny)
        worst = max(worst, abs(lhs + integral) / scale)
    return worst


@dataclass
class ScalarBVPSolution:
    n: int
    R_dom: float
    sigma: float
    c1: float
    r: np.ndarray
    V: np.ndarray
    unit_zero: float
    amplitude: float

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def residual(self) -> np.ndarray:
        """-Δ_h V - c1 V^sigma at the interior nodes."""
        lap = radial_laplacian(self.V, self.h, self.n)
        return -lap - self.c1 * spow(self.V[:-1], self.sigma)

    def truncation_scale(self) -> float:
        """max |Δ_h(c1 V^sigma)|, i.e. |Δ²V|, which drives the O(h²) truncation error."""
        return float(np.max(np.abs(radial_laplacian(self.c1 * spow(self.V, self.sigma), self.h, self.n))))

    def residual_ok(self, factor: float = 10.0) -> bool:
        return float(np.max(np.abs(self.residual()))) <= factor * self.h ** 2 * self.truncation_scale()


def scalar_ground_state_on_ball(n: int, sigma: float, c1: float, R_dom: float = 1.0,
                                tol: float = 1e-10, nodes: int = 257) -> ScalarBVPSolution:
    """Positive radial solution of -ΔV = c1 V^sigma on the ball of radius R_dom, V = 0 on the sphere.

    A unit shoot W(0) = 1 with first zero R0 is mapped by V(x) = k W(lam x),
    lam = R0 / R_dom, k = (lam^2 / c1)^(1 / (sigma - 1)).
    """
    ps = sobolev_exponent(n)
    upper = math.inf if ps is None else ps
    if not (1 < sigma < upper):
        raise ValueError(f"sigma = {sigma} outside the subcritical window (1, {upper}) "
                         "required by the sigma-subcritical gate")
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    prof = integrate_ivp(n, lambda u: spow(u, sigma), 1.0, 1e4, tol=min(tol, 1e-10))
    if not isinstance(prof.event, FirstZero):
        raise RuntimeError(f"unit shoot did not reach a zero: {prof.event}")
    R0 = prof.event.R
    lam = R0 / R_dom
    k = (lam ** 2 / c1) ** (1.0 / (sigma - 1.0))
    r = radial_nodes(R_dom, nodes)
    V = k * prof.u(np.minimum(lam * r, R0))
    if abs(V[-1]) > max(tol, 1e-9 * k):
        raise RuntimeError(f"boundary value {V[-1]} above tolerance")
    V[-1] = 0.0
    return ScalarBVPSolution(n=n, R_dom=R_dom, sigma=sigma, c1=c1, r=r, V=V, unit_zero=R0, amplitude=k)
