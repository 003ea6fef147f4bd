"""Finite-difference Newton and continuation for the Dirichlet system on balls and boxes.

Balls use the radial reduction in any dimension (nodes r_i = i h, the last
one on the sphere); boxes are two-dimensional tensor grids with the 5-point
stencil.  Coefficient callables and lower-order callables receive node
coordinates with the spatial components in the last axis; radial nodes are
embedded as (r, 0, ..., 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve, splu

from . import _grids
from .proportionality import compute_K
from .radial_shooting import scalar_ground_state_on_ball
from .system_model import Domain, NonDifferentiableError, ProblemInstance, eval_f, eval_g, eval_jacobian

NEWTON_TOL = 1e-10
MAX_ITER = 100
MAX_BACKTRACKS = 30
TAU_NEG = 1e-12


@dataclass
class GridField:
    domain: Domain
    h: float
    u: np.ndarray
    v: np.ndarray
    n: int = 2

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have the same shape")
        if self.u.shape != grid_shape(self.domain, self.h):
            raise ValueError(f"field shape {self.u.shape} does not match the grid "
                             f"{grid_shape(self.domain, self.h)}")

    @property
    def radial(self) -> bool:
        return self.domain.kind == "ball"

    def interior(self) -> np.ndarray:
        mask = np.zeros(self.u.shape, dtype=bool)
        if self.radial:
            mask[:-1] = True
        else:
            mask[1:-1, 1:-1] = True
        return mask

    def coords(self) -> np.ndarray:
        return node_coords(self.domain, self.h, self.n)

    def copy(self, u=None, v=None) -> "GridField":
        return GridField(self.domain, self.h, self.u.copy() if u is None else u,
                         self.v.copy() if v is None else v, self.n)

    def laplacian(self, w: np.ndarray) -> np.ndarray:
        """Δ_h w on the interior nodes (flattened order matches interior())."""
        if self.radial:
            return _grids.radial_laplacian(w, self.h, self.n)
        return _grids.box_laplacian(w, self.h).ravel()

    def rows(self):
        """(coordinates..., u, v) per node."""
        X = self.coords()
        if self.radial:
            return [(float(x[0]), float(a), float(b)) for x, a, b in zip(X, self.u, self.v)]
        return [(float(x[0]), float(x[1]), float(a), float(b))
                for x, a, b in zip(X.reshape(-1, 2), self.u.ravel(), self.v.ravel())]


def _count(length, h):
    k = length / h
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise ValueError(f"spacing h = {h} does not divide the length {length}")
    return int(round(k)) + 1


def grid_shape(domain: Domain, h: float) -> tuple:
    if domain.kind == "ball":
        return (_count(domain.radius, h),)
    if domain.kind == "box":
        if len(domain.sides) != 2:
            raise ValueError("box grids are two-dimensional")
        return tuple(_count(s, h) for s in domain.sides)
    raise ValueError(f"no grid for an unbounded {domain.kind!r} domain")


def node_coords(domain: Domain, h: float, n: int = 2) -> np.ndarray:
    shape = grid_shape(domain, h)
    if domain.kind == "ball":
        X = np.zeros(shape + (n,))
        X[:, 0] = np.arange(shape[0]) * h
        return X
    xs = np.arange(shape[0]) * h
    ys = np.arange(shape[1]) * h
    return np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)


def zero_field(domain: Domain, h: float, n: int = 2) -> GridField:
    shape = grid_shape(domain, h)
    return GridField(domain, h, np.zeros(shape), np.zeros(shape), n)


def field_from_function(domain: Domain, h: float, n: int, fu: Callable, fv: Callable) -> GridField:
    """Sample fu, fv at the nodes (they receive coordinates) and zero the boundary."""
    X = node_coords(domain, h, n)
    fld = GridField(domain, h, np.asarray(fu(X), dtype=float), np.asarray(fv(X), dtype=float), n)
    fld.u[~fld.interior()] = 0.0
    fld.v[~fld.interior()] = 0.0
    return fld


@dataclass
class HomotopyConfig:
    """Deformation parameter t and the shift constant A of the homotopy family."""

    t: float
    A: float
    C1: float = 0.0
    omega: Optional[Domain] = None
    lambda1_omega: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        if not self.A > 0:
            raise ValueError("A must be positive")

    def required_A(self, inst: ProblemInstance, n: int = 2, h: float = 1.0 / 64) -> float:
        lam = self.lambda1_omega
        if lam is None and self.omega is not None:
            lam = compute_lambda1(self.omega, h, n).value
        if lam is None:
            raise ValueError("lambda1 of the subdomain is needed (give omega or lambda1_omega)")
        _, _, c, d = inst.coeffs.at(_coef_probe(inst, n))
        return float(max(self.C1 + lam, np.max(c), np.max(d)))

    def admissible(self, inst: ProblemInstance, n: int = 2, h: float = 1.0 / 64) -> bool:
        return self.A >= self.required_A(inst, n, h)


def _coef_probe(inst, n):
    if inst.coeffs.is_constant():
        return None
    if inst.domain.bounded:
        h = (inst.domain.radius if inst.domain.kind == "ball" else min(inst.domain.sides)) / 32
        return node_coords(inst.domain, h, n)
    raise ValueError("spatial coefficients need a bounded domain to sample")


def _nonlinearity(fld: GridField, inst: ProblemInstance, hcfg: Optional[HomotopyConfig]):
    mask = fld.interior()
    X = fld.coords()[mask]
    u = np.maximum(fld.u[mask], 0.0)
    v = np.maximum(fld.v[mask], 0.0)
    t, A = (hcfg.t, hcfg.A) if hcfg is not None else (0.0, 0.0)
    F = eval_f(u, v, inst, x=X, t=t, A=A)
    G = eval_g(u, v, inst, x=X, t=t, A=A)
    if t:
        F = F + A * t * (1.0 + u)
        G = G + A * t * (1.0 + v)
    return np.broadcast_to(F, u.shape), np.broadcast_to(G, u.shape)


def assemble_residual(fld: GridField, inst: ProblemInstance, hcfg: Optional[HomotopyConfig] = None):
    """(Δ_h u + F, Δ_h v + G) on interior nodes, flattened; F, G evaluated at max(u, 0)."""
    if inst.domain != fld.domain:
        raise ValueError("field domain does not match the instance domain")
    if fld.radial and fld.n != inst.n:
        raise ValueError("field dimension does not match the instance dimension")
    F, G = _nonlinearity(fld, inst, hcfg)
    return fld.laplacian(fld.u) + F, fld.laplacian(fld.v) + G


def residual_location(fld: GridField, inst: ProblemInstance, hcfg=None):
    """(max |residual|, node index tuple, distance to the boundary in nodes)."""
    ru, rv = assemble_residual(fld, inst, hcfg)
    r = np.maximum(np.abs(ru), np.abs(rv))
    k = int(np.argmax(r))
    idx = np.argwhere(fld.interior())[k]
    shape = fld.u.shape
    dist = min(min(i, s - 1 - i) for i, s in zip(idx, shape)) if not fld.radial else shape[0] - 1 - idx[0]
    return float(r[k]), tuple(int(i) for i in idx), int(dist)


def _lap_matrix(fld: GridField):
    if fld.radial:
        return _grids.radial_laplacian_matrix(fld.u.shape[0], fld.h, fld.n)
    return _grids.box_laplacian_matrix(fld.u.shape[0], fld.u.shape[1], fld.h)


def _jacobian(fld: GridField, inst: ProblemInstance, hcfg, L):
    mask = fld.interior()
    X = fld.coords()[mask]
    u = np.maximum(fld.u[mask], 0.0)
    v = np.maximum(fld.v[mask], 0.0)
    t, A = (hcfg.t, hcfg.A) if hcfg is not None else (0.0, 0.0)
    J = eval_jacobian(u, v, inst, x=X, t=t, A=A)
    m = u.size
    J = np.broadcast_to(J, (2, 2, m))
    fu, fv, gu, gv = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    if t:
        fu = fu + A * t
        gv = gv + A * t
    return sp.bmat([[L + sp.diags(fu), sp.diags(fv)], [sp.diags(gu), L + sp.diags(gv)]], format="csc")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_inf: float
    residual_abs: float
    sup_u: float
    sup_v: float
    min_interior_u: float
    min_interior_v: float
    proportionality_defect: Optional[float]
    h: float
    K: Optional[float] = None
    nonnegative: bool = True
    message: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _scaled_norm(ru, rv, F, G):
    scale = max(1.0, float(np.max(np.abs(F), initial=0.0)), float(np.max(np.abs(G), initial=0.0)))
    return max(float(np.max(np.abs(ru), initial=0.0)), float(np.max(np.abs(rv), initial=0.0))) / scale


def _K_for(inst):
    if not inst.coeffs.is_constant():
        return None
    a, b, c, d = inst.coeffs.at()
    if not (a > 0 and b > 0 and c >= 0 and d >= 0 and a * b >= c * d):
        return None
    return compute_K(inst.coeffs, inst.exps).K


def _report(fld, inst, hcfg, converged, iters, message, K=None):
    ru, rv = assemble_residual(fld, inst, hcfg)
    F, G = _nonlinearity(fld, inst, hcfg)
    mask = fld.interior()
    K = _K_for(inst) if K is None else K
    defect = None if K is None else float(np.max(np.abs(fld.u - K * fld.v)))
    nonneg = bool(np.all(fld.u >= -TAU_NEG) and np.all(fld.v >= -TAU_NEG))
    return SolveReport(
        converged=converged, iterations=iters, residual_inf=_scaled_norm(ru, rv, F, G),
        residual_abs=max(float(np.max(np.abs(ru))), float(np.max(np.abs(rv)))),
        sup_u=float(np.max(fld.u)), sup_v=float(np.max(fld.v)),
        min_interior_u=float(np.min(fld.u[mask])), min_interior_v=float(np.min(fld.v[mask])),
        proportionality_defect=defect, h=fld.h, K=K, nonnegative=nonneg, message=message)


def newton_solve(init: GridField, inst: ProblemInstance, hcfg: Optional[HomotopyConfig] = None,
                 tol: float = NEWTON_TOL, max_iter: int = MAX_ITER, step_tol: Optional[float] = None):
    """Damped Newton on the interior unknowns.

    Converged means the scaled residual (absolute residual over max(1, |F|, |G|))
    is below tol and the last update is below step_tol (default tol times
    max(1, sup)).  Nonnegativity and exact boundary zeros are checked after
    convergence, never enforced.
    """
    fld = init.copy()
    mask = fld.interior()
    fld.u[~mask] = 0.0
    fld.v[~mask] = 0.0
    L = _lap_matrix(fld)
    m = int(mask.sum())

    def unpack(x):
        return fld.copy(u=_place(x[:m], mask, fld.u), v=_place(x[m:], mask, fld.v))

    def norm_of(f):
        ru, rv = assemble_residual(f, inst, hcfg)
        F, G = _nonlinearity(f, inst, hcfg)
        return _scaled_norm(ru, rv, F, G), np.concatenate([ru, rv])

    res, rvec = norm_of(fld)
    last_step = None
    for it in range(max_iter + 1):
        sup = max(1.0, float(np.max(np.abs(fld.u))), float(np.max(np.abs(fld.v))))
        stol = tol * sup if step_tol is None else step_tol
        if res <= tol and (last_step is None or last_step <= stol):
            rep = _report(fld, inst, hcfg, True, it, "converged")
            if not rep.nonnegative:
                rep.converged = False
                rep.message = "converged to a sign-changing state"
            return fld, rep
        if it == max_iter:
            break
        try:
            J = _jacobian(fld, inst, hcfg, L)
        except NonDifferentiableError as exc:
            return fld, _report(fld, inst, hcfg, False, it, f"jacobian: {exc}")
        dx = spsolve(J, -rvec)
        if not np.all(np.isfinite(dx)):
            return fld, _report(fld, inst, hcfg, False, it, "singular Jacobian")
        x0 = np.concatenate([fld.u[mask], fld.v[mask]])
        s = 1.0
        for _ in range(MAX_BACKTRACKS + 1):
            trial = unpack(x0 + s * dx)
            new_res, new_vec = norm_of(trial)
            if new_res < res or new_res <= tol:
                break
            s *= 0.5
        else:
            return fld, _report(fld, inst, hcfg, False, it, "line search stalled")
        fld, res, rvec = trial, new_res, new_vec
        last_step = s * float(np.max(np.abs(dx)))
    return fld, _report(fld, inst, hcfg, False, max_iter, "iteration limit")


def _place(vals, mask, like):
    out = np.zeros_like(like)
    out[mask] = vals
    return out


def scalar_reduction_init(inst: ProblemInstance, nodes: Optional[int] = None, h: Optional[float] = None,
                          scale: float = 1.0) -> GridField:
    """(K V, V) from the radial ground state of -ΔV = c1 V^sigma, c1 = K^p (b K^q - d)."""
    if inst.domain.kind != "ball":
        raise ValueError("the scalar-reduction initializer needs a ball")
    if not inst.coeffs.is_constant():
        raise ValueError("the scalar-reduction initializer needs constant coefficients")
    R = inst.domain.radius
    if h is None:
        h = inst.h if inst.h is not None else R / ((nodes or 257) - 1)
    N = grid_shape(inst.domain, h)[0]
    K = compute_K(inst.coeffs, inst.exps).K
    a, b, c, d = inst.coeffs.at()
    c1 = K ** inst.exps.p * (b * K ** inst.exps.q - d)
    sol = scalar_ground_state_on_ball(inst.n, inst.exps.sigma, c1, R, nodes=N)
    return GridField(inst.domain, h, scale * K * sol.V, scale * sol.V, inst.n)


# ---------------------------------------------------------------- continuation

@dataclass
class ContinuationStep:
    param: float
    field: GridField
    report: SolveReport


@dataclass
class ContinuationResult:
    steps: List[ContinuationStep]
    failure_index: Optional[int]
    bound: float
    collapse: bool

    @property
    def completed(self) -> bool:
        return self.failure_index is None


def continuation_solve(family: Callable[[float], ProblemInstance], path: Sequence[float],
                       init: Optional[GridField] = None, nodes: int = 257, floor: float = 1e-4,
                       tol: float = NEWTON_TOL) -> ContinuationResult:
    """Secant predictor, Newton corrector along family(path[0]) ... family(path[-1]).

    A failed step is retried with half the parameter increment until the
    increment falls below floor * |path[-1] - path[0]|.  Only the listed path
    values are recorded.
    """
    path = [float(s) for s in path]
    span = abs(path[-1] - path[0]) if len(path) > 1 else 1.0
    min_step = floor * (span if span > 0 else 1.0)
    anchor = family(path[0])
    fld0 = init if init is not None else scalar_reduction_init(anchor, nodes=nodes)
    fld, rep = newton_solve(fld0, anchor, tol=tol)
    steps = [ContinuationStep(path[0], fld, rep)]
    if not rep.converged:
        return ContinuationResult(steps, 0, rep.sup_u, False)

    hist = [(path[0], fld)]
    for k, target in enumerate(path[1:], start=1):
        s_cur = hist[-1][0]
        ok = True
        while s_cur != target:
            ds = target - s_cur
            while True:
                s_new = s_cur + ds
                pred = _predict(hist, s_new)
                cand, crep = newton_solve(pred, family(s_new), tol=tol)
                if crep.converged:
                    break
                ds *= 0.5
                if abs(ds) < min_step:
                    ok = False
                    break
            if not ok:
                break
            hist.append((s_new, cand))
            s_cur = s_new
            if s_cur == target:
                steps.append(ContinuationStep(target, cand, crep))
        if not ok:
            return ContinuationResult(steps, k, _bound(steps), _collapse(steps))
    return ContinuationResult(steps, None, _bound(steps), _collapse(steps))


def _predict(hist, s_new):
    s1, f1 = hist[-1]
    if len(hist) < 2:
        return f1
    s0, f0 = hist[-2]
    w = (s_new - s1) / (s1 - s0)
    return f1.copy(u=f1.u + w * (f1.u - f0.u), v=f1.v + w * (f1.v - f0.v))


def _bound(steps):
    return max(max(s.report.sup_u, s.report.sup_v) for s in steps)


def _collapse(steps, floor=1e-8):
    sups = [max(s.report.sup_u, s.report.sup_v) for s in steps]
    return len(sups) >= 1 and (sups[-1] <= floor or (len(sups) >= 2 and sups[-1] < 1e-3 * sups[0]))


# ---------------------------------------------------------------- eigenvalues

@dataclass
class Lambda1Result:
    value: float
    coarse: float
    richardson: float
    iterations: int
    eigenfield: np.ndarray
    h: float


def _inverse_iteration(L, tol, max_iter=500):
    lu = splu(sp.csc_matrix(L))
    x = np.ones(L.shape[0])
    x /= np.linalg.norm(x)
    lam_old = math.inf
    for k in range(1, max_iter + 1):
        y = lu.solve(x)
        lam = 1.0 / np.dot(x, y)
        x = y / np.linalg.norm(y)
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam, x, k
        lam_old = lam
    return lam, x, max_iter


def compute_lambda1(domain: Domain, h: float, n: int = 2, tol: float = 1e-10) -> Lambda1Result:
    """Smallest Dirichlet eigenvalue of -Δ_h by inverse iteration, with the 2h grid for Richardson."""
    fine = _lambda1_on(domain, h, n, tol)
    coarse = _lambda1_on(domain, 2 * h, n, tol)
    return Lambda1Result(value=fine[0], coarse=coarse[0], richardson=(4 * fine[0] - coarse[0]) / 3,
                         iterations=fine[2], eigenfield=fine[1], h=h)


def _lambda1_on(domain, h, n, tol):
    fld = zero_field(domain, h, n)
    L = -_lap_matrix(fld)
    lam, x, k = _inverse_iteration(L, tol)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return lam, _place(x, fld.interior(), fld.u), k


# ---------------------------------------------------------------- rescaling

@dataclass
class BlowupRescale:
    lam: float
    alpha: float
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y_uniform: np.ndarray
    u_uniform: np.ndarray
    v_uniform: np.ndarray
    max_scaled: float
    center_value: float
    bound_ok: bool
    center_ok: Optional[bool]


def blowup_rescale(fld: GridField, inst: ProblemInstance, center, check_center: bool = True) -> BlowupRescale:
    """u~(y) = lam^alpha u(x0 + lam y), alpha = 2/(sigma-1), lam = (sup u^(1/alpha) + sup v^(1/alpha))^-1."""
    sigma = inst.exps.sigma
    if not sigma > 1:
        raise ValueError("rescaling needs sigma = p + q + r > 1")
    alpha = 2.0 / (sigma - 1.0)
    su, sv = max(float(np.max(fld.u)), 0.0), max(float(np.max(fld.v)), 0.0)
    if su == 0 and sv == 0:
        raise ValueError("field is identically zero")
    lam = 1.0 / (su ** (1 / alpha) + sv ** (1 / alpha))
    center = tuple(np.atleast_1d(center))
    if check_center:
        if su < sv:
            raise ValueError("the 2^-alpha check needs sup u >= sup v")
        if fld.u[center] != su:
            raise ValueError("center is not the argmax of u")
    X = fld.coords()
    x0 = X[center]
    y = (X - x0) / lam
    us, vs = lam ** alpha * fld.u, lam ** alpha * fld.v
    # resample on a grid of the original spacing in y
    if fld.radial:
        r = X[:, 0]
        yu = np.arange(y[0, 0], y[-1, 0] + 0.5 * fld.h, fld.h)
        uu = np.interp(x0[0] + lam * yu, r, fld.u) * lam ** alpha
        vu = np.interp(x0[0] + lam * yu, r, fld.v) * lam ** alpha
    else:
        xs = X[:, 0, 0]
        ys = X[0, :, 1]
        gx = np.arange(y[0, 0, 0], y[-1, 0, 0] + 0.5 * fld.h, fld.h)
        gy = np.arange(y[0, 0, 1], y[0, -1, 1] + 0.5 * fld.h, fld.h)
        GX, GY = np.meshgrid(gx, gy, indexing="ij")
        pts = np.stack([x0[0] + lam * GX, x0[1] + lam * GY], axis=-1)
        pts[..., 0] = np.clip(pts[..., 0], xs[0], xs[-1])
        pts[..., 1] = np.clip(pts[..., 1], ys[0], ys[-1])
        uu = RegularGridInterpolator((xs, ys), fld.u)(pts) * lam ** alpha
        vu = RegularGridInterpolator((xs, ys), fld.v)(pts) * lam ** alpha
        yu = np.stack([GX, GY], axis=-1)
    max_scaled = float(max(np.max(us), np.max(vs)))
    cval = float(us[center])
    return BlowupRescale(lam=lam, alpha=alpha, y=y, u=us, v=vs, y_uniform=yu, u_uniform=uu, v_uniform=vu,
                         max_scaled=max_scaled, center_value=cval, bound_ok=max_scaled <= 1.0 + 1e-12,
                         center_ok=(cval >= 2.0 ** (-alpha) * (1 - 1e-12)) if check_center else None)
