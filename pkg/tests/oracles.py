"""Reference computations that share no code with the package."""

import functools
import math

import mpmath as mp
import numpy as np
from scipy import integrate

mp.mp.dps = 50


def K_by_diagonal_balance(a, b, c, d, p, q, r):
    """Root of K g(K, 1) - f(K, 1) = K^(p+1)(b K^q - d) - K^r (a - c K^q) by high-precision bisection."""
    a, b, c, d, p, q, r = (mp.mpf(x) for x in (a, b, c, d, p, q, r))

    def phi(K):
        return K ** (p + 1) * (b * K ** q - d) - K ** r * (a - c * K ** q)

    lo, hi = mp.mpf("1e-12"), mp.mpf(1)
    while phi(hi) < 0:
        hi *= 2
    while phi(lo) > 0:
        lo /= 2
    for _ in range(400):
        mid = (lo + hi) / 2
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def cubic_root_bisection():
    """Positive root of K^3 + K^2 - K - 2."""
    lo, hi = 1.0, 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** 3 + mid ** 2 - mid - 2 < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sinc_profile(t):
    return np.sin(t) / t


def bessel_j0_first_zero():
    return float(mp.besseljzero(0, 1))


def half_sphere_moment(exponents):
    """Integral of prod |z_i|^a_i over the unit half-sphere, by adaptive nested quadrature (n = 2, 3)."""
    n = len(exponents)
    if n == 2:
        a0, a1 = exponents
        f = lambda th: abs(math.cos(th)) ** a0 * math.sin(th) ** a1
        return sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13)[0]
                   for lo, hi in ((0, math.pi / 2), (math.pi / 2, math.pi)))
    a0, a1, a2 = exponents
    f = lambda ps, ph: (abs(math.sin(ph) * math.cos(ps)) ** a0 * abs(math.sin(ph) * math.sin(ps)) ** a1
                        * math.cos(ph) ** a2 * math.sin(ph))
    # the integrand has the symmetry of the four azimuthal quadrants
    return 4 * integrate.dblquad(f, 0, math.pi / 2, 0, math.pi / 2, epsabs=0, epsrel=1e-13)[0]


@functools.lru_cache(maxsize=None)
def ground_state_radius(n, sigma):
    """First zero of the unit Lane-Emden shoot by mpmath's Taylor ODE solver plus bisection."""
    start = mp.mpf("1e-6")
    y0 = [1 - start ** 2 / (2 * n), -start / n]
    sol = mp.odefun(lambda t, y: [y[1], -(abs(y[0]) ** sigma) * mp.sign(y[0]) - (n - 1) / t * y[1]],
                    start, y0)
    lo, hi = mp.mpf(1), mp.mpf(1)
    while sol(hi)[0] > 0:
        lo, hi = hi, hi + 1
    for _ in range(50):
        mid = (lo + hi) / 2
        if sol(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)
