"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np


def central_difference(fn, x, step=1e-5):
    """Central-difference gradient with a per-coordinate relative step."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        hj = step * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = hj
        g[j] = (fn(x + e) - fn(x - e)) / (2 * hj)
    return g


def grid_min_box(c0, c, lower, upper, points=10_000):
    """min over a uniform grid of the box of c0 + c.u (m = 1)."""
    u = np.linspace(lower, upper, points)
    return np.min(c0[:, None] + c[:, None] * u[None, :], axis=1)


def grid_min_one_norm(c0, c1, c2, radius, points=10_000):
    """Exact minimum over the grid points of the 1-norm ball (m = 2).

    For every u1 grid value the admissible u2 grid values form a contiguous
    run, and a linear function attains its minimum at one end of that run, so
    scanning both ends is the same as scanning the whole grid.
    """
    g = np.linspace(-radius, radius, points)
    best = np.full(np.shape(c0), np.inf)
    tol = 1e-12 * radius
    for u1 in g:
        room = radius - abs(u1)
        ok = np.nonzero(np.abs(g) <= room + tol)[0]
        if ok.size == 0:
            continue
        for u2 in (g[ok[0]], g[ok[-1]]):
            best = np.minimum(best, c0 + c1 * u1 + c2 * u2)
    return best


def projected_gradient_qp(H, F, A, b, iters=100_000):
    """Batched accelerated projected gradient on the dual of strictly convex QPs.

    Shapes: H (K, n, n), F (K, n), A (K, q, n), b (K, q).  The dual
    max_{lam >= 0} -1/2 (F + A'lam)' H^-1 (F + A'lam) - b'lam has a Lipschitz
    gradient with constant |A H^-1 A'|_2 and the only projection needed is onto
    the nonnegative orthant.  Returns the primal minimizer z(lam).
    """
    Hinv = np.linalg.inv(H)
    M = A @ Hinv @ np.swapaxes(A, 1, 2)
    L = np.linalg.eigvalsh(M)[:, -1]
    L = np.maximum(L, 1e-12)[:, None]
    lam = np.zeros(b.shape)
    y = lam.copy()
    t = 1.0

    def primal(l):
        return -np.einsum("kij,kj->ki", Hinv, F + np.einsum("kqi,kq->ki", A, l))

    for _ in range(iters):
        z = primal(y)
        grad = np.einsum("kqi,ki->kq", A, z) - b
        nxt = np.maximum(y + grad / L, 0.0)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = nxt + (t - 1) / t_next * (nxt - lam)
        lam, t = nxt, t_next
    return primal(lam)
