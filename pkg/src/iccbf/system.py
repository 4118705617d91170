"""Control-affine systems, admissible input sets and the built-in models.

States are component-first: a model function receives ``x`` with ``x[i]`` the
i-th coordinate, which may be a float, an array (a batch of states) or a
:class:`~iccbf.autodiff.Jet`.  ``f`` returns a list of ``n`` components and
``g`` a list of ``n`` rows of ``m`` entries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from iccbf import autodiff as ad

BOX = "box"
ONE_NORM_BALL = "one-norm-ball"
POLYTOPE = "polytope"


class UnknownModelError(KeyError):
    pass


@dataclass(frozen=True)
class InputSet:
    """Admissible control region U.

    Build with :meth:`box`, :meth:`one_norm_ball` or :meth:`polytope`; the
    constructor validates the set and precomputes its vertices.
    """

    kind: str
    A: np.ndarray
    B: np.ndarray
    vertices: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    radius: Optional[float] = None

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "InputSet":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lower <= upper")
        m = lo.size
        A = np.vstack([np.eye(m), -np.eye(m)])
        B = np.concatenate([hi, -lo])
        corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        return cls._checked(BOX, A, B, corners, lower=lo, upper=hi)

    @classmethod
    def one_norm_ball(cls, radius: float, m: int = 2) -> "InputSet":
        if not radius > 0:
            raise ValueError("radius must be positive")
        signs = np.array(list(itertools.product([1.0, -1.0], repeat=m)))
        A = signs
        B = np.full(len(signs), float(radius))
        verts = np.vstack([radius * np.eye(m), -radius * np.eye(m)])
        return cls._checked(ONE_NORM_BALL, A, B, verts, radius=float(radius))

    @classmethod
    def polytope(cls, A, B) -> "InputSet":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float).ravel()
        return cls._checked(POLYTOPE, A, B, enumerate_vertices(A, B))

    @classmethod
    def _checked(cls, kind, A, B, verts, **kw) -> "InputSet":
        if len(verts) == 0:
            raise ValueError("input set is empty")
        if np.any(verts @ A.T - B > 1e-10):
            raise ValueError("vertex violates the defining inequalities")
        if not _bounded(A):
            raise ValueError("input set is unbounded")
        return cls(kind, A, B, verts, **kw)

    def contains(self, u, tol: float = 1e-10) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return bool(np.all(self.A @ u - self.B <= tol))

    def as_inequalities(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows (A, B) with U = {u : A u <= B}."""
        return self.A.copy(), self.B.copy()

    def clip(self, u) -> np.ndarray:
        """Coordinatewise clip for boxes, Euclidean projection otherwise."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.kind == BOX:
            return np.clip(u, self.lower, self.upper)
        return self.project(u)

    def project(self, u) -> np.ndarray:
        from iccbf.qp import QPProblem, solve

        u = np.atleast_1d(np.asarray(u, dtype=float))
        sol = solve(QPProblem(np.eye(self.m), -u, self.A, self.B))
        return sol.z

    def infimum(self, c0, c: Sequence):
        return affine_infimum(c0, c, self)

    def supremum(self, c0, c: Sequence):
        return affine_supremum(c0, c, self)


def _bounded(A: np.ndarray) -> bool:
    # bounded iff no nonzero recession direction d with A d <= 0
    from scipy.optimize import linprog

    m = A.shape[1]
    for j in range(m):
        for sgn in (1.0, -1.0):
            c = np.zeros(m)
            c[j] = -sgn
            res = linprog(c, A_ub=A, b_ub=np.zeros(len(A)), bounds=[(-1, 1)] * m)
            if res.status != 0 or -res.fun > 1e-9:
                return False
    return True


def enumerate_vertices(A: np.ndarray, B: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Vertices of {u : A u <= B} by exhaustive m-subsets of the rows."""
    p, m = A.shape
    found: list[np.ndarray] = []
    for rows in itertools.combinations(range(p), m):
        sub = A[list(rows)]
        if np.linalg.matrix_rank(sub) < m:
            continue
        v = np.linalg.solve(sub, B[list(rows)])
        if np.all(A @ v - B <= tol * (1 + np.abs(B))):
            if not any(np.allclose(v, w, atol=1e-12) for w in found):
                found.append(v)
    return np.array(found).reshape(-1, m)


def affine_infimum(c0, c: Sequence, U: InputSet):
    """inf over u in U of c0 + c . u, exact, and jet-evaluable."""
    c = list(c)
    if len(c) != U.m:
        raise ValueError(f"coefficient length {len(c)} != input dimension {U.m}")
    if U.kind == BOX:
        out = c0
        for cj, lo, hi in zip(c, U.lower, U.upper):
            out = out + ad.minimum(cj * lo, cj * hi)
        return out
    if U.kind == ONE_NORM_BALL:
        return c0 - U.radius * ad.reduce_max([ad.absolute(cj) for cj in c])
    vals = [c0 + ad.dot(c, v) for v in U.vertices]
    return ad.reduce_min(vals)


def affine_supremum(c0, c: Sequence, U: InputSet):
    """sup over u in U of c0 + c . u."""
    return -affine_infimum(-c0, [-cj for cj in c], U)


@dataclass(frozen=True)
class ControlAffineSystem:
    """x' = f(x) + g(x) u with safety function h and an optional CLF V."""

    name: str
    n: int
    m: int
    f: Callable
    g: Callable
    h: Callable
    V: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    state_lower: Optional[np.ndarray] = None
    state_upper: Optional[np.ndarray] = None
    state_names: tuple = ()

    def drift(self, x) -> np.ndarray:
        return np.array(self.f(x), dtype=float)

    def input_matrix(self, x) -> np.ndarray:
        return np.array(self.g(x), dtype=float).reshape(self.n, self.m)

    def dynamics(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return self.drift(x) + self.input_matrix(x) @ u

    def safety(self, x) -> float:
        return float(self.h(np.asarray(x, dtype=float)))

    def lie_derivatives(self, fn: Callable, x) -> tuple:
        """(fn(x), L_f fn(x), L_g fn(x)) for a jet-evaluable scalar ``fn``.

        Works for plain states, batches and jets alike; ``L_g`` is a list of
        ``m`` entries.
        """
        val, grad = ad.value_and_gradient(fn, x)
        fx = self.f(x)
        gx = self.g(x)
        lf = ad.dot(grad, fx)
        lg = [ad.dot(grad, [gx[i][j] for i in range(self.n)]) for j in range(self.m)]
        return val, lf, lg


# -- built-in models -------------------------------------------------------

ACC_DEFAULTS = dict(f0=0.1, f1=5.0, f2=0.25, mass=1650.0, g0=9.81, v0=13.89,
                    v_max=24.0, headway=1.8, u_max=0.25)


def _scalar_example(**p) -> tuple[ControlAffineSystem, InputSet]:
    bound = p.get("u_max", 1.0)
    sys = ControlAffineSystem(
        name="scalar-example", n=1, m=1,
        f=lambda x: [x[0]],
        g=lambda x: [[1.0 + 0.0 * ad.real_part(x[0])]],
        h=lambda x: 2.0 - x[0],
        params={"u_max": bound},
        state_lower=np.array([-3.0]), state_upper=np.array([3.0]),
        state_names=("x",),
    )
    return sys, InputSet.box([-bound], [bound])


def _acc(**overrides) -> tuple[ControlAffineSystem, InputSet]:
    unknown = set(overrides) - set(ACC_DEFAULTS)
    if unknown:
        raise KeyError(f"unknown acc parameters: {sorted(unknown)}")
    p = {**ACC_DEFAULTS, **overrides}
    f0, f1, f2, mass, g0, v0 = (p[k] for k in ("f0", "f1", "f2", "mass", "g0", "v0"))

    def f(x):
        v = x[1]
        return [v0 - v, -(f0 + f1 * v + f2 * v * v) / mass]

    def g(x):
        z = 0.0 * ad.real_part(x[0])
        return [[z], [z + g0]]

    sys = ControlAffineSystem(
        name="acc", n=2, m=1, f=f, g=g,
        h=lambda x: x[0] - p["headway"] * x[1],
        V=lambda x: (x[1] - p["v_max"]) ** 2,
        params=p,
        state_lower=np.array([0.0, 0.0]), state_upper=np.array([200.0, 40.0]),
        state_names=("d", "v"),
    )
    return sys, InputSet.box([-p["u_max"]], [p["u_max"]])


RENDEZVOUS_DEFAULTS = dict(
    orbit_radius=6771e3,        # m
    mu=398600e9,                # m^3/s^2
    omega=math.radians(0.6),    # rad/s
    chaser_mass=1000.0,         # kg
    thrust_bound=250.0,         # N, 1-norm
    port_radius=2.4,            # m
    los_half_angle=math.radians(10.0),
    clf_time_constant=10.0,     # s
    literal_rc=False,
)


def _rendezvous(**overrides) -> tuple[ControlAffineSystem, InputSet]:
    unknown = set(overrides) - set(RENDEZVOUS_DEFAULTS)
    if unknown:
        raise KeyError(f"unknown rendezvous parameters: {sorted(unknown)}")
    p = {**RENDEZVOUS_DEFAULTS, **overrides}
    r, mu, omega, mc, rho = (p[k] for k in
                             ("orbit_radius", "mu", "omega", "chaser_mass", "port_radius"))
    n_mean = math.sqrt(mu / r**3)
    p["mean_motion"] = n_mean
    cos_gamma = math.cos(p["los_half_angle"])
    tau = p["clf_time_constant"]

    def f(x):
        px, py, vx, vy, _ = x
        if p["literal_rc"]:
            rc2 = px * px + py * py
        else:
            rc2 = (r + px) * (r + px) + py * py
        inv_rc3 = ad.power(rc2, -1.5)
        ax = n_mean**2 * px + 2 * n_mean * vy + mu / r**2 - mu * (r + px) * inv_rc3
        ay = n_mean**2 * py - 2 * n_mean * vx - mu * py * inv_rc3
        return [vx, vy, ax, ay, omega + 0.0 * ad.real_part(px)]

    def g(x):
        z = 0.0 * ad.real_part(x[0])
        return [[z, z], [z, z], [z + 1.0 / mc, z], [z, z + 1.0 / mc], [z, z]]

    def h(x):
        px, py, _, _, psi = x
        c, s = ad.cos(psi), ad.sin(psi)
        rx, ry = px - rho * c, py - rho * s
        return (rx * c + ry * s) / ad.sqrt(rx * rx + ry * ry) - cos_gamma

    def V(x):
        px, py, vx, vy, psi = x
        ex = vx + (px - rho * ad.cos(psi)) / tau
        ey = vy + (py - rho * ad.sin(psi)) / tau
        return ex * ex + ey * ey

    big = 1e3
    sys = ControlAffineSystem(
        name="rendezvous", n=5, m=2, f=f, g=g, h=h, V=V, params=p,
        state_lower=np.array([-big, -big, -50.0, -50.0, -4 * math.pi]),
        state_upper=np.array([big, big, 50.0, 50.0, 4 * math.pi]),
        state_names=("px", "py", "vx", "vy", "psi"),
    )
    return sys, InputSet.one_norm_ball(p["thrust_bound"], m=2)


def docking_range(sys: ControlAffineSystem, x) -> float:
    """Distance from the chaser to the rotating docking port (m)."""
    rho = sys.params["port_radius"]
    px, py, _, _, psi = np.asarray(x, dtype=float)
    return float(math.hypot(px - rho * math.cos(psi), py - rho * math.sin(psi)))


def _double_integrator(**p) -> tuple[ControlAffineSystem, InputSet]:
    bound = p.get("u_max", 1.0)
    sys = ControlAffineSystem(
        name="double-integrator", n=2, m=1,
        f=lambda x: [x[1], 0.0 * x[1]],
        g=lambda x: [[0.0 * ad.real_part(x[0])], [1.0 + 0.0 * ad.real_part(x[0])]],
        h=lambda x: x[0],
        params={"u_max": bound},
        state_lower=np.array([-10.0, -10.0]), state_upper=np.array([10.0, 10.0]),
        state_names=("x1", "x2"),
    )
    return sys, InputSet.box([-bound], [bound])


MODELS = {
    "scalar-example": _scalar_example,
    "acc": _acc,
    "rendezvous": _rendezvous,
    "double-integrator": _double_integrator,
}


def builtin(name: str, **params) -> tuple[ControlAffineSystem, InputSet]:
    """Return ``(system, input_set)`` for one of :data:`MODELS`."""
    try:
        make = MODELS[name]
    except KeyError:
        raise UnknownModelError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return make(**params)
