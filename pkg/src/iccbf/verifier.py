"""Sampling-based checks of the terminal barrier condition and set boundaries.

Everything here is a falsification search, not a proof: quasi-random samples
of a state box filtered to C*, followed by multi-start Nelder-Mead refinement
with C* enforced by rejection.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.stats import qmc

from iccbf.chain import BarrierChain

METHOD = "sampling+refinement"
GAMMA_TOL = 1e-6
BOUNDARY_EPS = 1e-4
MIN_BUDGET = 1000
CHUNK = 8192

INTERIOR = "interior"
BOUNDARY_FEASIBLE = "boundary-feasible"
BOUNDARY_INFEASIBLE = "boundary-infeasible"
EXTERIOR = "exterior"


class EmptyInnerSetError(RuntimeError):
    """No sampled state landed in C*."""


@dataclass
class CertificateReport:
    gamma: float
    argmin_state: np.ndarray
    is_iccbf: bool
    is_simple: Optional[bool]
    samples_used: int
    samples_inside: int
    refinement_trace: list = field(default_factory=list)
    method: str = METHOD
    domain_lower: Optional[np.ndarray] = None
    domain_upper: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gamma": repr(float(self.gamma)),
            "is_iccbf": str(self.is_iccbf).lower(),
            "is_simple": "unknown" if self.is_simple is None else str(self.is_simple).lower(),
            "argmin_state": " ".join(repr(float(v)) for v in self.argmin_state),
            "samples_used": str(self.samples_used),
            "samples_inside": str(self.samples_inside),
            "refinement_starts": str(len({s for s, *_ in self.refinement_trace})),
            "domain_lower": " ".join(repr(float(v)) for v in self.domain_lower),
            "domain_upper": " ".join(repr(float(v)) for v in self.domain_upper),
        }

    def write(self, path, trace_path=None) -> None:
        """Key-value text report, plus an optional CSV of the refinement trace."""
        with open(path, "w") as fh:
            for k, v in self.to_dict().items():
                fh.write(f"{k} = {v}\n")
        if trace_path is not None:
            n = len(self.argmin_state)
            with open(trace_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["start", "iteration"] + [f"x_{i + 1}" for i in range(n)] + ["value"])
                for start, it, x, val in self.refinement_trace:
                    w.writerow([start, it] + [repr(float(v)) for v in x] + [repr(float(val))])


def read_report(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def _domain(domain) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = (np.asarray(v, dtype=float) for v in domain)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("domain must be (lower, upper) with lower <= upper")
    return lo, hi


def sobol_points(lo, hi, n: int, seed: int = 0) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence scaled to the box."""
    eng = qmc.Sobol(d=len(lo), scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # balance warning for non powers of two
        pts = eng.random(n)
    return qmc.scale(pts, lo, hi) if np.any(hi > lo) else np.tile(lo, (n, 1))


def _scan(chain: BarrierChain, pts: np.ndarray, fn: Callable) -> tuple[np.ndarray, np.ndarray]:
    inside = np.zeros(len(pts), dtype=bool)
    vals = np.full(len(pts), np.inf)
    for s in range(0, len(pts), CHUNK):
        X = pts[s:s + CHUNK].T
        with np.errstate(all="ignore"):
            ins = np.asarray(chain.membership(X)[1], dtype=bool).reshape(-1)
            v = np.asarray(fn(X), dtype=float).reshape(-1)
        inside[s:s + CHUNK] = ins
        vals[s:s + CHUNK] = np.where(ins, v, np.inf)
    return inside, vals


def _refine(chain, fn, starts, lo, hi, max_iter, workers):
    span = np.where(hi > lo, hi - lo, 1.0)

    def objective(x):
        if np.any(x < lo) or np.any(x > hi):
            return np.inf
        try:
            if not chain.in_inner_set(x):
                return np.inf
            return float(fn(x))
        except (ValueError, ArithmeticError):
            return np.inf

    def run(args):
        idx, x0 = args
        trace = []

        def cb(xk):
            trace.append((idx, len(trace) + 1, np.array(xk), objective(xk)))

        simplex = [x0]
        for i in range(len(x0)):
            step = np.zeros(len(x0))
            step[i] = 0.01 * span[i]
            cand = x0 + step
            simplex.append(cand if cand[i] <= hi[i] else x0 - step)
        res = minimize(objective, x0, method="Nelder-Mead", callback=cb,
                       options={"maxiter": max_iter, "initial_simplex": np.array(simplex),
                                "xatol": 1e-10, "fatol": 1e-12})
        return idx, res.x, objective(res.x), trace

    jobs = list(enumerate(starts))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    results.sort(key=lambda r: r[0])  # deterministic merge in start order
    return results


def certificate_objective(chain: BarrierChain):
    return chain.terminal_condition


def certify(chain: BarrierChain, domain, budget: int = 100_000, n_starts: int = 50,
            max_iter: int = 500, seed: int = 0, workers: int = 1,
            check_simple: bool = False) -> CertificateReport:
    """Search for the minimum over C* of sup_u [L_f b_N + L_g b_N u + alpha_N(b_N)].

    ``gamma >= -1e-6`` marks the chain as certified.  Raises
    :class:`EmptyInnerSetError` if no sample lands in C*.
    """
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET}")
    lo, hi = _domain(domain)
    pts = sobol_points(lo, hi, budget, seed)
    fn = certificate_objective(chain)
    inside, vals = _scan(chain, pts, fn)
    if not inside.any():
        raise EmptyInnerSetError(f"no state of C* among {budget} samples")
    order = np.argsort(vals, kind="stable")
    best = int(order[0])
    gamma, argmin = float(vals[best]), pts[best].copy()
    trace = []
    starts = [pts[i] for i in order[:min(n_starts, int(inside.sum()))]]
    for idx, x, val, tr in _refine(chain, fn, starts, lo, hi, max_iter, workers):
        trace.extend(tr)
        if val < gamma:
            gamma, argmin = float(val), x
    simple = None
    if check_simple:
        simple = detect_simple(chain, domain, budget, seed=seed).is_simple
    return CertificateReport(gamma=gamma, argmin_state=argmin, is_iccbf=gamma >= -GAMMA_TOL,
                             is_simple=simple, samples_used=budget,
                             samples_inside=int(inside.sum()), refinement_trace=trace,
                             domain_lower=lo, domain_upper=hi)


@dataclass
class SimpleReport:
    is_simple: bool
    witness: np.ndarray
    b_N: float
    threshold: float


def detect_simple(chain: BarrierChain, domain, budget: int = 100_000, n_starts: int = 10,
                  max_iter: int = 500, seed: int = 0, eps: float = BOUNDARY_EPS) -> SimpleReport:
    """Look for states of C* on the boundary of C_N.

    The chain is reported simple when no sampled or refined state of C* has
    b_N within ``eps * |grad b_N|`` of zero.  The witness is the state of C*
    closest to that boundary (in first-order distance) either way.
    """
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET}")
    lo, hi = _domain(domain)
    N = chain.N

    def distance(X):
        b, _, _, grad = chain.lie(N, X)
        return b / np.maximum(np.linalg.norm(grad, axis=0), 1e-300)

    pts = sobol_points(lo, hi, budget, seed)
    inside, vals = _scan(chain, pts, distance)
    if not inside.any():
        raise EmptyInnerSetError(f"no state of C* among {budget} samples")
    order = np.argsort(vals, kind="stable")
    witness, best = pts[order[0]].copy(), float(vals[order[0]])
    starts = [pts[i] for i in order[:min(n_starts, int(inside.sum()))]]
    for _, x, val, _ in _refine(chain, distance, starts, lo, hi, max_iter, 1):
        if val < best:
            witness, best = x, float(val)
    b, _, _, grad = chain.lie(N, witness)
    thr = eps * float(np.linalg.norm(grad))
    return SimpleReport(is_simple=not abs(b) <= thr, witness=witness, b_N=float(b),
                        threshold=thr)


@dataclass
class BoundaryGrid:
    level: int
    axes: tuple
    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray
    labels: np.ndarray

    def write_csv(self, path, names=("x1", "x2")) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([names[0], names[1], f"b_{self.level}", "label"])
            for a, b, v, lab in zip(self.x1.ravel(), self.x2.ravel(), self.values.ravel(),
                                    self.labels.ravel()):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v)), lab])


def _slice_states(axis1, axis2, dims, base):
    X1, X2 = np.meshgrid(np.asarray(axis1, float), np.asarray(axis2, float), indexing="ij")
    X = np.repeat(np.asarray(base, float)[:, None], X1.size, axis=1)
    X[dims[0]] = X1.ravel()
    X[dims[1]] = X2.ravel()
    return X1, X2, X


def _edge_cells(inside: np.ndarray) -> np.ndarray:
    # inside cells with at least one 4-neighbour outside
    edge = np.zeros_like(inside)
    edge[1:, :] |= ~inside[:-1, :]
    edge[:-1, :] |= ~inside[1:, :]
    edge[:, 1:] |= ~inside[:, :-1]
    edge[:, :-1] |= ~inside[:, 1:]
    return edge & inside


def boundary_partition(chain: BarrierChain, level: int, axis1, axis2,
                       dims: Sequence[int] = (0, 1), base_state=None) -> BoundaryGrid:
    """Label a 2-D grid of states against the set C_level.

    Cells with b_i < 0 are exterior; cells inside with an outside neighbour are
    boundary cells, feasible iff sup_u of the level-i derivative is >= 0 there.
    Higher-dimensional systems need ``base_state`` to fix the other coordinates.
    """
    n = chain.system.n
    if base_state is None:
        if n != 2:
            raise ValueError("systems with n != 2 need base_state to declare a 2-D slice")
        base_state = np.zeros(2)
    X1, X2, X = _slice_states(axis1, axis2, dims, base_state)
    values = np.asarray(chain.eval_b(level, X)).reshape(X1.shape)
    inside = values >= 0
    edge = _edge_cells(inside)
    labels = np.full(X1.shape, EXTERIOR, dtype=object)
    labels[inside] = INTERIOR
    if edge.any():
        _, sup = chain.level_rate_bounds(level, X[:, edge.ravel()])
        sup = np.atleast_1d(sup)
        labels[edge] = np.where(sup >= 0, BOUNDARY_FEASIBLE, BOUNDARY_INFEASIBLE)
    return BoundaryGrid(level, tuple(dims), X1, X2, values, labels)


def inner_set_grid(grids: Sequence[BoundaryGrid]) -> BoundaryGrid:
    """Cellwise conjunction of per-level grids (C* = C_0 n ... n C_N)."""
    inside = np.all([g.values >= 0 for g in grids], axis=0)
    vals = np.min([g.values for g in grids], axis=0)
    labels = np.where(inside, INTERIOR, EXTERIOR).astype(object)
    g0 = grids[0]
    return BoundaryGrid(-1, g0.axes, g0.x1, g0.x2, vals, labels)


def sample_inner_boundary(chain: BarrierChain, domain, n: int, axis: int = 0,
                          seed: int = 0) -> np.ndarray:
    """States on the boundary of C*, found by root-finding along ``axis``.

    Quasi-random base states are drawn in the box; for each, the other
    coordinates are fixed and min_i b_i is bracketed along ``axis``.
    """
    lo, hi = _domain(domain)
    found = []
    pts = sobol_points(lo, hi, 4 * n + 64, seed)

    def phi(s, x):
        y = x.copy()
        y[axis] = s
        return float(np.min(chain.eval_all(y)))

    for x in pts:
        a, b = lo[axis], hi[axis]
        fa, fb = phi(a, x), phi(b, x)
        if np.sign(fa) == np.sign(fb):
            continue
        s = brentq(phi, a, b, args=(x,), xtol=1e-14, rtol=4 * np.finfo(float).eps)
        y = x.copy()
        y[axis] = s
        # step onto the inside of C* if the root landed just outside
        if not chain.in_inner_set(y):
            inward = b if fb > fa else a
            y[axis] = np.nextafter(s, inward)
            if not chain.in_inner_set(y):
                continue
        found.append(y)
        if len(found) == n:
            break
    return np.array(found)


@dataclass
class NagumoReport:
    violations: int
    checked: int
    worst: float
    worst_state: Optional[np.ndarray]


def nagumo_spotcheck(chain: BarrierChain, controller: Callable, samples, eps: float = 1e-8,
                     threshold: float = 1e-6) -> NagumoReport:
    """Count boundary samples where an active level decreases under ``controller``.

    A level i is active at x when |b_i(x)| <= eps; every sample must have one.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    violations, worst, worst_state = 0, np.inf, None
    for x in X:
        levels = chain.eval_all(x)
        active = [i for i, b in enumerate(levels) if abs(b) <= eps]
        if not active:
            raise ValueError(f"sample {x.tolist()} is not within {eps} of the boundary of C*")
        u = np.atleast_1d(np.asarray(controller(x), dtype=float))
        rates = []
        for i in active:
            _, lf, lg, _ = chain.lie(i, x)
            rates.append(float(lf + lg @ u))
        r = min(rates)
        if r < worst:
            worst, worst_state = r, x
        if r < -threshold:
            violations += 1
    return NagumoReport(violations, len(X), float(worst), worst_state)
