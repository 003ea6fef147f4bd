"""Finite-difference Laplacians shared by the solver and the checkers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def radial_nodes(R: float, nodes: int) -> np.ndarray:
    return np.linspace(0.0, R, nodes)


def radial_laplacian(values: np.ndarray, h: float, n: int) -> np.ndarray:
    """Second-order radial Laplacian at nodes 0..N-2 (last node is the boundary).

    Uses the symmetric ghost node u_{-1} = u_1 at the origin, where the
    operator tends to n u''(0).
    """
    u = np.asarray(values, dtype=float)
    out = np.empty(len(u) - 1)
    out[0] = 2.0 * n * (u[1] - u[0]) / h ** 2
    i = np.arange(1, len(u) - 1)
    r = i * h
    out[1:] = ((u[i + 1] - 2.0 * u[i] + u[i - 1]) / h ** 2
               + (n - 1) / r * (u[i + 1] - u[i - 1]) / (2.0 * h))
    return out


def radial_laplacian_matrix(nodes: int, h: float, n: int) -> sp.csr_matrix:
    """Interior block (nodes 0..N-2) of the radial Laplacian with u_N = 0."""
    m = nodes - 1
    main = np.full(m, -2.0 / h ** 2)
    upper = np.zeros(m - 1)
    lower = np.zeros(m - 1)
    main[0] = -2.0 * n / h ** 2
    upper[0] = 2.0 * n / h ** 2
    i = np.arange(1, m)
    r = i * h
    upper[1:] = 1.0 / h ** 2 + (n - 1) / (2.0 * h * r[:-1])
    lower[:] = 1.0 / h ** 2 - (n - 1) / (2.0 * h * r)
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def box_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian on the interior of a 2-D nodal array."""
    u = np.asarray(values, dtype=float)
    return (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]) / h ** 2


def box_laplacian_matrix(nx: int, ny: int, h: float) -> sp.csr_matrix:
    """5-point Laplacian on the (nx-2) x (ny-2) interior, Dirichlet zero outside."""
    def lap1(k):
        return sp.diags([np.ones(k - 1), -2.0 * np.ones(k), np.ones(k - 1)], [-1, 0, 1]) / h ** 2
    mx, my = nx - 2, ny - 2
    return (sp.kron(lap1(mx), sp.identity(my)) + sp.kron(sp.identity(mx), lap1(my))).tocsr()
