"""Small dense convex QP solver.

Solves::

    minimize    1/2 z' H z + F' z
    subject to  A z <= b,  lb <= z <= ub

with the dual active-set method of Goldfarb and Idnani.  It starts from the
unconstrained minimizer, so no feasible starting point is needed, and it
certifies infeasibility with a Farkas vector when a violated row is a
nonnegative combination of active rows.  The working-set system is refactored
by Cholesky at every change; after the final working set is known the
equality-constrained KKT system is re-solved directly to polish the answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"

MAX_ITER = 200
REGULARIZATION = 1e-9


class QPInfeasibleError(RuntimeError):
    def __init__(self, message: str, solution: "QPSolution | None" = None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class QPProblem:
    H: np.ndarray
    F: np.ndarray
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        F = np.atleast_1d(np.asarray(self.F, dtype=float))
        n = F.size
        if H.shape != (n, n):
            raise ValueError(f"H has shape {H.shape}, expected {(n, n)}")
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("H is not symmetric")
        if np.linalg.eigvalsh(H).min() < -1e-10:
            raise ValueError("H is not positive semidefinite")
        A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.zeros(0) if self.b is None else np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[1] != n or A.shape[0] != b.size:
            raise ValueError("inequality dimensions are inconsistent")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        for name in ("lb", "ub"):
            v = getattr(self, name)
            if v is not None:
                v = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
                object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.F.size

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        """All constraints as A z <= b, bounds appended after the general rows."""
        A, b = [self.A], [self.b]
        eye = np.eye(self.n)
        if self.ub is not None:
            keep = np.isfinite(self.ub)
            A.append(eye[keep])
            b.append(self.ub[keep])
        if self.lb is not None:
            keep = np.isfinite(self.lb)
            A.append(-eye[keep])
            b.append(-self.lb[keep])
        return np.vstack(A), np.concatenate(b)

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.H @ z + self.F @ z)


@dataclass(frozen=True)
class QPSolution:
    z: np.ndarray
    status: str
    kkt_residual: float
    active_set: tuple
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    objective: float = float("nan")
    farkas: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residual(p: QPProblem, z, lam) -> float:
    """max of primal infeasibility, stationarity and complementarity (inf-norm)."""
    A, b = p.rows()
    z = np.asarray(z, dtype=float)
    slack = A @ z - b
    primal = max(0.0, float(np.max(slack, initial=0.0)))
    stat = float(np.max(np.abs(p.H @ z + p.F + A.T @ lam), initial=0.0))
    comp = float(np.max(np.abs(lam * slack), initial=0.0))
    dual = max(0.0, float(-np.min(lam, initial=0.0)))
    return max(primal, stat, comp, dual)


def solve(p: QPProblem, max_iter: int = MAX_ITER) -> QPSolution:
    """Solve ``p``; never raises for infeasibility, check ``status`` instead."""
    A, b = p.rows()
    n, q = p.n, len(b)
    H = p.H
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        H = H + REGULARIZATION * np.eye(n)
        L = np.linalg.cholesky(H)

    def hinv(v):
        return np.linalg.solve(L.T, np.linalg.solve(L, v))

    # row scaling keeps the violation test meaningful across mixed units
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0] = 1.0

    z = -hinv(p.F)
    active: list[int] = []
    lam = np.zeros(0)
    it = 0
    while True:
        if it >= max_iter:
            return _finish(p, z, active, lam, MAX_ITERATIONS, it)
        viol = (A @ z - b) / norms
        viol[active] = -np.inf
        if q == 0 or np.max(viol) <= 1e-12:
            break
        # most violated row; argmax returns the lowest index on ties
        j = int(np.argmax(viol))
        lam_j = 0.0
        while True:
            it += 1
            if it > max_iter:
                return _finish(p, z, active, lam, MAX_ITERATIONS, it)
            N = A[active].T if active else np.zeros((n, 0))
            # step directions: H dz + a_j + N r = 0, N' dz = 0
            if active:
                HN = hinv(N)
                S = N.T @ HN
                Ls = np.linalg.cholesky(S)
                r = np.linalg.solve(Ls.T, np.linalg.solve(Ls, -(N.T @ hinv(A[j]))))
                dz = -hinv(A[j] + N @ r)
            else:
                r = np.zeros(0)
                dz = -hinv(A[j])
            dependent = _in_span(A[j], N)
            # dual (partial) step: largest t keeping active multipliers >= 0
            neg = np.where(r < 0)[0]
            t_dual = np.inf
            drop = -1
            if neg.size:
                ratios = lam[neg] / -r[neg]
                k = int(np.argmin(ratios))
                t_dual, drop = float(ratios[k]), int(neg[k])
            if dependent:
                if not np.isfinite(t_dual):
                    farkas = np.zeros(q)
                    farkas[active] = r
                    farkas[j] = 1.0
                    return _finish(p, z, active, lam, INFEASIBLE, it, farkas=farkas)
                lam = lam + t_dual * r
                lam_j += t_dual
                active.pop(drop)
                lam = np.delete(lam, drop)
                continue
            # primal (full) step makes row j active
            t_full = float((A[j] @ z - b[j]) / -(A[j] @ dz))
            t = min(t_full, t_dual)
            z = z + t * dz
            lam = lam + t * r
            lam_j += t
            if t_full <= t_dual:
                active.append(j)
                lam = np.append(lam, lam_j)
                break
            active.pop(drop)
            lam = np.delete(lam, drop)
    z, lam_full = _polish(H, p.F, A, b, z, active, lam)
    return _finish(p, z, active, lam_full[active] if active else lam_full[:0], OPTIMAL, it,
                   lam_full=lam_full)


def _in_span(a: np.ndarray, N: np.ndarray) -> bool:
    if N.shape[1] == 0:
        return False
    coef, *_ = np.linalg.lstsq(N, a, rcond=None)
    return bool(np.linalg.norm(N @ coef - a) <= 1e-10 * max(1.0, np.linalg.norm(a)))


def _polish(H, F, A, b, z, active, lam):
    # re-solve the equality-constrained problem on the final working set
    q = len(b)
    lam_full = np.zeros(q)
    if not active:
        return z, lam_full
    Aa = A[active]
    k = len(active)
    K = np.block([[H, Aa.T], [Aa, np.zeros((k, k))]])
    rhs = np.concatenate([-F, b[active]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        lam_full[active] = lam
        return z, lam_full
    z2, lam2 = sol[: len(z)], sol[len(z):]
    if np.all(lam2 >= -1e-12) and np.all(A @ z2 - b <= 1e-9 * (1 + np.abs(b))):
        lam_full[active] = np.maximum(lam2, 0.0)
        return z2, lam_full
    lam_full[active] = lam
    return z, lam_full


def _finish(p, z, active, lam, status, it, farkas=None, lam_full=None):
    A, b = p.rows()
    if lam_full is None:
        lam_full = np.zeros(len(b))
        if active:
            lam_full[active] = lam
    res = kkt_residual(p, z, lam_full)
    return QPSolution(z=np.asarray(z, dtype=float), status=status, kkt_residual=res,
                      active_set=tuple(sorted(active)), multipliers=lam_full,
                      iterations=it, objective=p.objective(z), farkas=farkas)


def solve_or_raise(p: QPProblem) -> QPSolution:
    sol = solve(p)
    if sol.status == INFEASIBLE:
        raise QPInfeasibleError("QP is infeasible", sol)
    if sol.status != OPTIMAL:
        raise QPInfeasibleError(f"QP not solved: {sol.status}", sol)
    return sol
