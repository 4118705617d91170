"""Pointwise feedback laws built on the barrier chain.

* ``iccbf-qp``: min 1/2 |u - u_d|^2 subject to the terminal barrier row and u in U.
* ``clf-cbf-qp-clipped``: the input-unaware CLF-CBF-QP baseline, clipped into U
  afterwards.
* ``iccbf-clf-relaxed``: relaxed CLF row plus a terminal barrier row whose gain
  (base + k) is itself a decision variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from iccbf import autodiff as ad
from iccbf.chain import BarrierChain
from iccbf.qp import QPInfeasibleError, QPProblem, QPSolution, solve

ICCBF_QP = "iccbf-qp"
CLF_CBF_QP_CLIPPED = "clf-cbf-qp-clipped"
ICCBF_CLF_RELAXED = "iccbf-clf-relaxed"
KINDS = (ICCBF_QP, CLF_CBF_QP_CLIPPED, ICCBF_CLF_RELAXED)

ROW_TOL = 1e-8


@dataclass(frozen=True)
class ControllerSpec:
    """Controller kind plus its rates and weights.

    ``clf_rate`` is lambda in L_f V + L_g V u <= -lambda V (+ delta).
    ``input_scale`` maps QP decision variables to physical inputs
    (u = input_scale * w); the rendezvous QP is posed in kN while the model runs
    in N.
    """

    kind: str
    chain: BarrierChain
    clf_rate: float = 10.0
    cbf_gain: float = 2.0
    delta_weight: float = 0.1
    k_weight: float = 50.0
    barrier_gain: float = 0.05
    input_scale: float = 1.0
    desired: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if not self.clf_rate > 0:
            raise ValueError("clf_rate must be positive")

    @property
    def system(self):
        return self.chain.system

    def __call__(self, x) -> np.ndarray:
        return control(self, x).u


@dataclass
class ControlResult:
    u: np.ndarray
    qp: Optional[QPSolution] = None
    diagnostics: dict = field(default_factory=dict)


def _clf_terms(spec: ControllerSpec, x):
    V = spec.system.V
    if V is None:
        return None
    val, grad = ad.value_and_gradient(V, [float(c) for c in x])
    grad = np.asarray(grad, dtype=float)
    lf = float(grad @ spec.system.drift(x))
    lg = grad @ spec.system.input_matrix(x)
    return float(val), lf, lg


def desired_control(spec: ControllerSpec, x) -> np.ndarray:
    """u_d solving L_f V + L_g V u_d = -clf_rate V (minimum-norm when m > 1).

    Systems without a CLF get u_d = 0 unless ``desired`` is set.
    """
    if spec.desired is not None:
        return np.atleast_1d(np.asarray(spec.desired(x), dtype=float))
    m = spec.system.m
    terms = _clf_terms(spec, x)
    if terms is None:
        return np.zeros(m)
    V, lf, lg = terms
    nrm2 = float(lg @ lg)
    if nrm2 < 1e-300:
        return np.zeros(m)
    return -(lf + spec.clf_rate * V) * lg / nrm2


def iccbf_qp_control(spec: ControllerSpec, x) -> ControlResult:
    """Closest input to u_d inside U that satisfies the terminal barrier row.

    Raises :class:`QPInfeasibleError` when the row and U do not intersect, which
    means the certificate fails at ``x``.
    """
    x = np.asarray(x, dtype=float)
    chain = spec.chain
    U = chain.U
    b, lf, lg, _ = chain.lie(chain.N, x)
    rhs = lf + float(chain.alpha(chain.N, b))
    ud = desired_control(spec, x)
    A_u, B_u = U.as_inequalities()
    A = np.vstack([-lg[None, :], A_u])
    B = np.concatenate([[rhs], B_u])
    sol = solve(QPProblem(np.eye(chain.system.m), -ud, A, B))
    diag = {"b_N": b, "Lf_bN": lf, "Lg_bN": lg, "u_d": ud}
    if not sol.optimal:
        raise QPInfeasibleError(f"ICCBF-QP {sol.status} at x={x.tolist()}", sol)
    u = sol.z
    diag["barrier_slack"] = float(lf + lg @ u + chain.alpha(chain.N, b))
    return ControlResult(u=u, qp=sol, diagnostics=diag)


def clf_cbf_qp_clipped_control(spec: ControllerSpec, x) -> ControlResult:
    """CLF-CBF-QP on (u, delta) without input bounds, then clipped into U."""
    x = np.asarray(x, dtype=float)
    sys = spec.system
    chain = spec.chain
    m = sys.m
    h, lf_h, lg_h, _ = chain.lie(0, x)
    terms = _clf_terms(spec, x)
    rows, rhs = [], []
    if terms is not None:
        V, lf_V, lg_V = terms
        rows.append(np.concatenate([lg_V, [-1.0]]))
        rhs.append(-spec.clf_rate * V - lf_V)
    rows.append(np.concatenate([-lg_h, [0.0]]))
    rhs.append(lf_h + spec.cbf_gain * h)
    rows.append(np.concatenate([np.zeros(m), [-1.0]]))  # delta >= 0
    rhs.append(0.0)
    H = np.diag(np.concatenate([np.ones(m), [2.0 * spec.delta_weight]]))
    sol = solve(QPProblem(H, np.zeros(m + 1), np.array(rows), np.array(rhs)))
    if not sol.optimal:
        raise QPInfeasibleError(f"CLF-CBF-QP {sol.status} at x={x.tolist()}", sol)
    raw = sol.z[:m]
    u = chain.U.clip(raw)
    return ControlResult(u=u, qp=sol, diagnostics={"u_qp": raw, "delta": sol.z[m],
                                                    "clipped": bool(np.any(u != raw))})


def iccbf_clf_relaxed_control(spec: ControllerSpec, x) -> ControlResult:
    """QP over (w, delta, k) with u = input_scale * w.

    minimize 1/2 |w|^2 + delta_weight delta + k_weight k
    s.t. L_f V + L_g V u <= -clf_rate V + delta
         L_f b_N + L_g b_N u >= -(barrier_gain + k) b_N
         u in U, delta >= 0, k >= 0
    """
    x = np.asarray(x, dtype=float)
    chain = spec.chain
    sys = chain.system
    m, s = sys.m, spec.input_scale
    b, lf_b, lg_b, _ = chain.lie(chain.N, x)
    terms = _clf_terms(spec, x)
    A_u, B_u = chain.U.as_inequalities()
    nz = m + 2
    rows, rhs = [], []
    if terms is not None:
        V, lf_V, lg_V = terms
        rows.append(np.concatenate([s * lg_V, [-1.0, 0.0]]))
        rhs.append(-spec.clf_rate * V - lf_V)
    rows.append(np.concatenate([-s * lg_b, [0.0, -b]]))
    rhs.append(lf_b + spec.barrier_gain * b)
    for a, bb in zip(A_u, B_u):
        rows.append(np.concatenate([s * a, [0.0, 0.0]]))
        rhs.append(bb)
    H = np.zeros((nz, nz))
    H[:m, :m] = np.eye(m)
    F = np.concatenate([np.zeros(m), [spec.delta_weight, spec.k_weight]])
    lb = np.concatenate([np.full(m, -np.inf), [0.0, 0.0]])
    sol = solve(QPProblem(H, F, np.array(rows), np.array(rhs), lb=lb))
    if not sol.optimal:
        raise QPInfeasibleError(f"relaxed ICCBF-CLF QP {sol.status} at x={x.tolist()}", sol)
    u = s * sol.z[:m]
    delta, k = float(sol.z[m]), float(sol.z[m + 1])
    residual = float(lf_b + lg_b @ u + (spec.barrier_gain + k) * b)
    return ControlResult(u=u, qp=sol, diagnostics={
        "b_N": b, "delta": delta, "k": k, "barrier_slack": residual})


_DISPATCH = {
    ICCBF_QP: iccbf_qp_control,
    CLF_CBF_QP_CLIPPED: clf_cbf_qp_clipped_control,
    ICCBF_CLF_RELAXED: iccbf_clf_relaxed_control,
}


def control(spec: ControllerSpec, x) -> ControlResult:
    return _DISPATCH[spec.kind](spec, x)


def in_admissible_set(chain: BarrierChain, x, u, tol: float = ROW_TOL,
                      gain: Optional[float] = None) -> bool:
    """Direct check that u is in U and satisfies the terminal barrier row."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    b, lf, lg, _ = chain.lie(chain.N, x)
    a_N = gain * b if gain is not None else float(chain.alpha(chain.N, b))
    return chain.U.contains(u, tol) and lf + lg @ u + a_N >= -tol
