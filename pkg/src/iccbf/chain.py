"""Recursive barrier chain b_0 ... b_N and the class-K gains that build it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from iccbf import autodiff as ad
from iccbf.system import ControlAffineSystem, InputSet, affine_infimum

KAPPA_KINDS = ("linear", "sqrt", "power", "custom")


class ChainEvaluationError(ValueError):
    """A level of the chain could not be evaluated."""

    def __init__(self, level: int, cause: Exception):
        super().__init__(f"barrier level {level}: {cause}")
        self.level = level
        self.cause = cause


@dataclass(frozen=True)
class ClassKappa:
    """Extended class-K function with odd extension to negative arguments.

    ``linear``: k s.  ``sqrt``: k sign(s) sqrt|s|.  ``power``: k sign(s) |s|^p.
    ``custom`` wraps a jet-evaluable callable that the caller vouches for.
    Non-Lipschitz kinds have their jet derivatives clipped to
    ``derivative_cap``, so the value at ``s = 0`` is 0 with slope ``cap``.
    """

    kind: str = "linear"
    gain: float = 1.0
    exponent: float = 1.0
    derivative_cap: float = 1e6
    fn: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KAPPA_KINDS:
            raise ValueError(f"unknown class-K kind {self.kind!r}")
        if self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom class-K needs fn")
        elif not self.gain > 0:
            raise ValueError("class-K gain must be positive")
        if self.kind == "power" and not self.exponent > 0:
            raise ValueError("class-K exponent must be positive")

    @classmethod
    def linear(cls, gain: float) -> "ClassKappa":
        return cls("linear", gain)

    @classmethod
    def sqrt(cls, gain: float) -> "ClassKappa":
        return cls("sqrt", gain, 0.5)

    def with_gain(self, gain: float) -> "ClassKappa":
        return ClassKappa(self.kind, gain, self.exponent, self.derivative_cap, self.fn)

    def __call__(self, s):
        if self.kind == "linear":
            return self.gain * s
        if self.kind == "custom":
            return self.fn(s)
        p = 0.5 if self.kind == "sqrt" else self.exponent
        sgn = ad.sign(s)
        if not isinstance(s, ad.Jet):
            return self.gain * sgn * np.abs(s) ** p
        mag = np.abs(s.real)
        derivs = []
        c = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            for j in range(s.depth + 1):
                # d^j/ds^j of gain*|s|^p along the branch selected by sign(s)
                term = c * mag ** (p - j) if c != 0.0 else np.zeros_like(mag)
                derivs.append(self.gain * term * sgn ** (j + 1))
                c *= p - j
        for j in range(1, len(derivs)):
            d = np.nan_to_num(derivs[j], nan=0.0, posinf=self.derivative_cap,
                              neginf=-self.derivative_cap)
            derivs[j] = np.clip(d, -self.derivative_cap, self.derivative_cap)
        return ad._apply_taylor(s, derivs)

    def describe(self) -> dict:
        out = {"kind": self.kind, "gain": self.gain}
        if self.kind == "power":
            out["exponent"] = self.exponent
        return out


class BarrierChain:
    """b_0 = h and b_{i+1} = inf_u [L_f b_i + L_g b_i u + alpha_i(b_i)].

    ``alphas`` holds alpha_0 ... alpha_N; alpha_N only enters the terminal
    condition and the controller.  ``N = 0`` is allowed for degenerate checks of
    ``h`` on its own.
    """

    def __init__(self, system: ControlAffineSystem, U: InputSet,
                 alphas: Sequence[ClassKappa], max_depth: int = ad.DEFAULT_MAX_DEPTH,
                 margin: float = 0.0):
        if len(alphas) < 1:
            raise ValueError("need at least alpha_0")
        if U.m != system.m:
            raise ValueError("input set dimension does not match the system")
        self.system = system
        self.U = U
        self.alphas = list(alphas)
        self.max_depth = max_depth
        self.margin = margin
        if self.N + 1 > max_depth:
            raise ad.DepthError(
                f"chain of order N={self.N} needs depth {self.N + 1} > limit {max_depth}")

    @property
    def N(self) -> int:
        return len(self.alphas) - 1

    def with_alphas(self, alphas: Sequence[ClassKappa]) -> "BarrierChain":
        return BarrierChain(self.system, self.U, alphas, self.max_depth, self.margin)

    # -- evaluation ------------------------------------------------------
    def _b(self, i: int, x):
        if i == 0:
            return self.system.h(x)
        val, lf, lg = self._lie(i - 1, x)
        return affine_infimum(lf + self.alphas[i - 1](val), lg, self.U)

    def _lie(self, i: int, x):
        """(b_i, L_f b_i, L_g b_i) at x (any depth)."""
        val, grad = ad.value_and_gradient(lambda y: self._b(i, y), x, self.max_depth)
        fx = self.system.f(x)
        gx = self.system.g(x)
        n, m = self.system.n, self.system.m
        lf = ad.dot(grad, fx)
        lg = [ad.dot(grad, [gx[r][j] for r in range(n)]) for j in range(m)]
        return val, lf, lg

    def _check_level(self, i: int):
        if not 0 <= i <= self.N:
            raise IndexError(f"level {i} outside 0..{self.N}")

    def eval_b(self, i: int, x):
        """b_i at a state (or a component-first batch of states)."""
        self._check_level(i)
        try:
            return _plain(self._b(i, _components(x)))
        except ChainEvaluationError:
            raise
        except Exception as exc:  # noqa: BLE001
            raise ChainEvaluationError(i, exc) from exc

    def eval_all(self, x) -> list:
        """[b_0, ..., b_N] at x."""
        return [self.eval_b(i, x) for i in range(self.N + 1)]

    def grad_b(self, i: int, x) -> np.ndarray:
        self._check_level(i)
        return self.lie(i, x)[3]

    def lie(self, i: int, x):
        """(b_i, L_f b_i, L_g b_i, grad b_i) at a state or batch.

        ``L_g b_i`` and ``grad b_i`` are arrays with the input / state index
        first.
        """
        self._check_level(i)
        xs = _components(x)
        try:
            val, grad = ad.value_and_gradient(lambda y: self._b(i, y), xs, self.max_depth)
        except Exception as exc:  # noqa: BLE001
            raise ChainEvaluationError(i, exc) from exc
        fx, gx = self.system.f(xs), self.system.g(xs)
        n, m = self.system.n, self.system.m
        grad = [_plain(gr) for gr in grad]
        lf = sum(grad[r] * fx[r] for r in range(n))
        lg = [sum(grad[r] * gx[r][j] for r in range(n)) for j in range(m)]
        shape = np.shape(_plain(val))
        return (_plain(val), np.broadcast_to(np.asarray(lf, dtype=float), shape).copy(),
                np.array([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in lg]),
                np.array([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in grad]))

    def alpha(self, i: int, s):
        return self.alphas[i](s)

    def membership(self, x) -> tuple[list, object]:
        """Per-level flags b_i(x) >= margin and their conjunction (C*)."""
        flags = [np.asarray(b >= self.margin) for b in self.eval_all(x)]
        inner = flags[0]
        for fl in flags[1:]:
            inner = inner & fl
        if inner.ndim == 0:
            return [bool(f) for f in flags], bool(inner)
        return flags, inner

    def in_inner_set(self, x) -> bool:
        return self.membership(x)[1]

    # -- derived quantities ---------------------------------------------
    def terminal_condition(self, x):
        """sup_u [L_f b_N + L_g b_N u + alpha_N(b_N)] at x."""
        b, lf, lg, _ = self.lie(self.N, x)
        c0 = lf + np.asarray(self.alphas[self.N](b), dtype=float)
        return _plain(self.U.supremum(c0, list(lg)))

    def level_rate_bounds(self, i: int, x):
        """(inf_u, sup_u) of the level-i derivative L_f b_i + L_g b_i u."""
        _, lf, lg, _ = self.lie(i, x)
        return (_plain(self.U.infimum(lf, list(lg))), _plain(self.U.supremum(lf, list(lg))))


def hocbf_reduction_check(chain: BarrierChain, samples, tol: float = 1e-12) -> float:
    """max |b_1 - (L_f h + alpha_0(h))| over states where L_g h vanishes.

    Raises ``ValueError`` if L_g h is nonzero at any sample, i.e. the system
    is not of relative degree >= 2 there.
    """
    if chain.N < 1:
        raise ValueError("chain needs at least one level above h")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    worst = 0.0
    for x in X:
        h, lf, lg, _ = chain.lie(0, x)
        if np.max(np.abs(lg)) > tol:
            raise ValueError(f"L_g h = {lg} is nonzero at {x}; reduction does not apply")
        expected = lf + chain.alphas[0](h)
        worst = max(worst, abs(float(chain.eval_b(1, x)) - float(expected)))
    return worst


def _components(x) -> list:
    if isinstance(x, (list, tuple)) and any(isinstance(c, ad.Jet) for c in x):
        return list(x)
    arr = np.asarray(x, dtype=float)
    return [arr[i] for i in range(arr.shape[0])]


def _plain(v):
    if isinstance(v, ad.Jet):
        return v
    arr = np.asarray(v, dtype=float)
    return float(arr) if arr.ndim == 0 else arr
