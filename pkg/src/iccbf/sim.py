"""Fixed-step closed-loop simulation with safety-event bookkeeping."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from iccbf.chain import BarrierChain
from iccbf.qp import QPInfeasibleError
from iccbf.system import ControlAffineSystem

log = logging.getLogger(__name__)

SAFETY_VIOLATION = "safety-violation"
QP_INFEASIBLE = "qp-infeasible"
GOAL_REACHED = "goal-reached"
BLOW_UP = "blow-up"
BLOW_UP_NORM = 1e9
EPS_NUM = 1e-4


def set_exit(level: int) -> str:
    return f"set-exit-level-{level}"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    h_values: np.ndarray
    level_values: np.ndarray
    events: list = field(default_factory=list)
    failed: bool = False
    state_names: tuple = ()

    def event_kinds(self) -> set:
        return {kind for _, kind in self.events}

    def first_event(self, kind: str) -> Optional[float]:
        for t, k in self.events:
            if k == kind:
                return t
        return None

    def to_csv(self, path) -> None:
        """Columns t, x_1..x_n, u_1..u_m, h, b_0..b_N."""
        n = self.states.shape[1]
        m = self.controls.shape[1]
        header = (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{j + 1}" for j in range(m)]
                  + ["h"] + [f"b_{i}" for i in range(self.level_values.shape[1])])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self.times)):
                w.writerow([repr(float(v)) for v in np.concatenate(
                    [[self.times[k]], self.states[k], self.controls[k], [self.h_values[k]],
                     self.level_values[k]])])

    def events_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "kind"])
            for t, kind in self.events:
                w.writerow([repr(float(t)), kind])

    @classmethod
    def from_csv(cls, path, events_path=None) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        n = sum(c.startswith("x_") for c in header)
        m = sum(c.startswith("u_") for c in header)
        events = []
        if events_path is not None:
            with open(events_path, newline="") as fh:
                events = [(float(t), k) for t, k in list(csv.reader(fh))[1:]]
        return cls(times=data[:, 0], states=data[:, 1:1 + n], controls=data[:, 1 + n:1 + n + m],
                   h_values=data[:, 1 + n + m], level_values=data[:, 2 + n + m:], events=events)


def rk4_step(rhs: Callable, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(system: ControlAffineSystem, controller: Optional[Callable], x0, t_end: float,
             dt: float, chain: Optional[BarrierChain] = None,
             goal: Optional[Callable] = None, per_stage_control: bool = False,
             eps_num: float = EPS_NUM) -> Trajectory:
    """Integrate x' = f(x) + g(x) u(x) with classical RK4.

    The control is held over each step (evaluated at the step start) unless
    ``per_stage_control`` is set.  ``controller`` maps a state to an input;
    ``None`` means zero input.  A :class:`QPInfeasibleError` from the controller
    is logged as an event, the last feasible input (projected into U) is
    applied and the run is marked failed.  ``goal`` stops the run early.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.array(x0, dtype=float)
    m = system.m
    U = chain.U if chain is not None else None
    n_full = int(np.floor(t_end / dt + 1e-9))
    times = [dt * k for k in range(n_full + 1)]
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(float(t_end))

    events: list = []
    failed = False
    last_u = np.zeros(m)
    levels_out, states, controls, hs = [], [], [], []
    was_unsafe = False
    was_out = [False] * ((chain.N + 1) if chain is not None else 0)

    def ctrl(z):
        nonlocal last_u, failed
        if controller is None:
            return np.zeros(m)
        try:
            u = np.atleast_1d(np.asarray(controller(z), dtype=float))
            last_u = u
            return u
        except QPInfeasibleError as exc:
            log.warning("controller infeasible at %s: %s", z.tolist(), exc)
            events.append((t, QP_INFEASIBLE))
            failed = True
            return U.clip(last_u) if U is not None else last_u

    for idx, t in enumerate(times):
        h = system.safety(x)
        levels = chain.eval_all(x) if chain is not None else [h]
        if h < 0 and not was_unsafe:
            events.append((t, SAFETY_VIOLATION))
            failed = True
        was_unsafe = h < 0
        for i, b in enumerate(levels if chain is not None else []):
            out = b < -eps_num
            if out and not was_out[i]:
                events.append((t, set_exit(i)))
            was_out[i] = out
        reached = goal is not None and goal(x)
        last = idx == len(times) - 1 or reached
        u = ctrl(x) if not last else (last_u if controller is not None else np.zeros(m))
        states.append(x.copy())
        controls.append(u.copy())
        hs.append(h)
        levels_out.append(levels)
        if reached:
            events.append((t, GOAL_REACHED))
            break
        if last:
            break
        step = times[idx + 1] - t
        if per_stage_control:
            x = rk4_step(lambda z: system.dynamics(z, ctrl(z)), x, step)
        else:
            x = rk4_step(lambda z: system.dynamics(z, u), x, step)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > BLOW_UP_NORM:
            events.append((times[idx + 1], BLOW_UP))
            failed = True
            break

    return Trajectory(times=np.array(times[: len(states)]), states=np.array(states),
                      controls=np.array(controls).reshape(len(states), m),
                      h_values=np.array(hs), level_values=np.array(levels_out, dtype=float),
                      events=events, failed=failed, state_names=system.state_names)


def braking_onset(traj: Trajectory, threshold: float = 0.0) -> Optional[float]:
    """First time the (scalar) control drops below ``threshold``."""
    if traj.controls.shape[1] != 1:
        raise ValueError("braking onset needs a scalar control")
    below = np.nonzero(traj.controls[:, 0] < threshold)[0]
    return float(traj.times[below[0]]) if below.size else None


def saturation_intervals(traj: Trajectory, U, tol: float = 1e-9) -> list:
    """Maximal [t_start, t_end] runs where the control sits on the boundary of U."""
    A, B = U.as_inequalities()
    on = np.array([np.any(A @ u - B >= -tol) for u in traj.controls])
    out, start = [], None
    for k, flag in enumerate(on):
        if flag and start is None:
            start = k
        if not flag and start is not None:
            out.append((float(traj.times[start]), float(traj.times[k - 1])))
            start = None
    if start is not None:
        out.append((float(traj.times[start]), float(traj.times[-1])))
    return out


def summary(traj: Trajectory) -> dict:
    out = {
        "steps": int(len(traj.times)),
        "t_final": float(traj.times[-1]),
        "min_h": float(np.min(traj.h_values)),
        "failed": bool(traj.failed),
        "events": len(traj.events),
    }
    for i in range(traj.level_values.shape[1]):
        out[f"min_b_{i}"] = float(np.min(traj.level_values[:, i]))
    if traj.controls.shape[1] == 1:
        onset = braking_onset(traj)
        out["braking_onset"] = onset if onset is not None else "none"
    goal = traj.first_event(GOAL_REACHED)
    out["goal_time"] = goal if goal is not None else "none"
    return out


def write_outputs(traj: Trajectory, out_dir, stem: str = "trajectory") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"trajectory": out_dir / f"{stem}.csv", "events": out_dir / f"{stem}_events.csv"}
    traj.to_csv(paths["trajectory"])
    traj.events_to_csv(paths["events"])
    return paths
