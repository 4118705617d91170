"""Nested forward-mode differentiation.

A :class:`Jet` is a truncated Taylor object.  Each nesting level adds one
first-order infinitesimal layer carrying any number of directions, so a
depth-``k`` jet over ``n`` directions per layer stores ``(n + 1) ** k``
coefficients.  The coefficient array is laid out as::

    coef.shape == batch_shape + (n_k + 1, ..., n_1 + 1)

where the first jet axis is the outermost (most recently created) layer.
``coef[..., 0, ...]`` is the value one level down and ``coef[..., 1 + j, ...]``
is the partial along direction ``j``.  Leading batch axes let a whole grid of
states be pushed through one evaluation.

Jets of different depth combine by treating the shallower one as constant in
the extra outer layers, which is what nested gradients need: the outer layer
is always the one created last.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

DEFAULT_MAX_DEPTH = 4


class DepthError(ValueError):
    """Raised when a lift would exceed the configured nesting limit."""


class JetEvaluationError(RuntimeError):
    """A function failed while being differentiated along one coordinate."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"evaluation failed along coordinate {index}: {cause}")
        self.index = index
        self.cause = cause


def _mul(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    # truncated product over the trailing k jet axes; leading axes broadcast
    if k == 0:
        return a * b
    rest = (slice(None),) * (k - 1)
    a0, a1 = a[(..., 0) + rest], a[(..., slice(1, None)) + rest]
    b0, b1 = b[(..., 0) + rest], b[(..., slice(1, None)) + rest]
    c0 = _mul(a0, b0, k - 1)
    c1 = _mul(np.expand_dims(a0, -k), b1, k - 1) + _mul(a1, np.expand_dims(b0, -k), k - 1)
    return np.concatenate([np.expand_dims(c0, -k), c1], axis=-k)


class Jet:
    """Nested truncated-Taylor scalar (possibly batched)."""

    __slots__ = ("coef", "depth")
    __array_priority__ = 1000

    def __init__(self, coef, depth: int):
        coef = np.asarray(coef, dtype=float)
        if depth < 1 or coef.ndim < depth:
            raise ValueError(f"bad jet: depth={depth}, coef.ndim={coef.ndim}")
        self.coef = coef
        self.depth = depth

    # -- structure -----------------------------------------------------
    @property
    def jet_shape(self) -> tuple[int, ...]:
        return self.coef.shape[self.coef.ndim - self.depth:]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coef.shape[: self.coef.ndim - self.depth]

    def _level(self, i: int):
        c = self.coef[(..., i) + (slice(None),) * (self.depth - 1)]
        return Jet(c, self.depth - 1) if self.depth > 1 else c

    @property
    def value(self):
        """Value one nesting level down (a Jet, or an ndarray at depth 1)."""
        return self._level(0)

    @property
    def partials(self) -> list:
        """Partials along each direction of the outermost layer."""
        return [self._level(1 + j) for j in range(self.jet_shape[0] - 1)]

    @property
    def real(self) -> np.ndarray:
        """Plain real part with all infinitesimals dropped."""
        return self.coef[(..., ) + (0,) * self.depth]

    def __repr__(self) -> str:
        return f"Jet(depth={self.depth}, real={self.real!r})"

    # -- arithmetic ----------------------------------------------------
    def _nilpotent(self) -> np.ndarray:
        d = self.coef.copy()
        d[(...,) + (0,) * self.depth] = 0.0
        return d

    def __neg__(self):
        return Jet(-self.coef, self.depth)

    def __pos__(self):
        return self

    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _add(self, -other)

    def __rsub__(self, other):
        return _add(-self, other)

    def __mul__(self, other):
        return _multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return _multiply(self, reciprocal(other))
        return Jet(self.coef / _expand(np.asarray(other, dtype=float), 0, self.depth), self.depth)

    def __rtruediv__(self, other):
        return _multiply(reciprocal(self), other)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        p = float(p)
        if p.is_integer() and 0 <= p <= 8:
            out = 1.0
            for _ in range(int(p)):
                out = out * self
            return out
        return power(self, p)

    # comparisons act on the real part (branch selection only)
    def __lt__(self, other):
        return self.real < _real(other)

    def __le__(self, other):
        return self.real <= _real(other)

    def __gt__(self, other):
        return self.real > _real(other)

    def __ge__(self, other):
        return self.real >= _real(other)

    def __float__(self):
        return float(self.real)


def _real(x):
    return x.real if isinstance(x, Jet) else np.asarray(x, dtype=float)


def depth_of(x) -> int:
    """Nesting depth of ``x`` (0 for plain numbers and arrays)."""
    return x.depth if isinstance(x, Jet) else 0


def _expand(c: np.ndarray, d: int, depth: int) -> np.ndarray:
    # insert (depth - d) singleton axes between the batch and jet axes of c
    if depth == d:
        return c
    nb = c.ndim - d
    return c.reshape(c.shape[:nb] + (1,) * (depth - d) + c.shape[nb:])


def _coef(x, depth: int) -> np.ndarray:
    d = depth_of(x)
    c = x.coef if d else np.asarray(x, dtype=float)
    return _expand(c, d, depth)


def _add(a, b):
    da, db = depth_of(a), depth_of(b)
    if da < db:
        a, b, da, db = b, a, db, da
    if db == da:
        return Jet(a.coef + b.coef, da)
    bc = b.coef if db else np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(a.coef.shape, _expand(bc, db, da).shape)
    out = np.array(np.broadcast_to(a.coef, shape))
    out[(...,) + (0,) * (da - db) + (slice(None),) * db] += bc
    return Jet(out, da)


def _multiply(a, b):
    da, db = depth_of(a), depth_of(b)
    if da == db:
        return Jet(_mul(a.coef, b.coef, da), da)
    if da < db:
        a, b, da, db = b, a, db, da
    if db == 0:
        return Jet(a.coef * _expand(np.asarray(b, dtype=float), 0, da), da)
    # b is constant across the extra outer layers: truncated product on its own
    # axes, broadcast over the others
    return Jet(_mul(a.coef, _expand(b.coef, db, da), db), da)


def _apply_taylor(x: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    # sum_j derivs[j] / j! * delta**j, where delta is the nilpotent part of x
    k = x.depth
    delta = x._nilpotent()
    out = np.zeros(np.broadcast_shapes(delta.shape, _expand(np.asarray(derivs[0]), 0, k).shape))
    out[(...,) + (0,) * k] = derivs[0]
    term = delta
    for j in range(1, k + 1):
        out = out + _expand(np.asarray(derivs[j]) / math.factorial(j), 0, k) * term
        if j < k:
            term = _mul(term, delta, k)
    return Jet(out, k)


def _unary(x, fn: Callable, derivs: Callable[[np.ndarray, int], list]):
    if not isinstance(x, Jet):
        return fn(x)
    return _apply_taylor(x, derivs(x.real, x.depth))


# -- elementary functions ------------------------------------------------

def sin(x):
    def d(r, k):
        cyc = [np.sin(r), np.cos(r), -np.sin(r), -np.cos(r)]
        return [cyc[j % 4] for j in range(k + 1)]
    return _unary(x, np.sin, d)


def cos(x):
    def d(r, k):
        cyc = [np.cos(r), -np.sin(r), -np.cos(r), np.sin(r)]
        return [cyc[j % 4] for j in range(k + 1)]
    return _unary(x, np.cos, d)


def exp(x):
    return _unary(x, np.exp, lambda r, k: [np.exp(r)] * (k + 1))


def log(x):
    def d(r, k):
        if np.any(r <= 0):
            raise ValueError("log of a non-positive jet")
        return [np.log(r)] + [(-1) ** (j - 1) * math.factorial(j - 1) / r**j
                              for j in range(1, k + 1)]
    return _unary(x, np.log, d)


def _power_derivs(r, p, k):
    out, c = [], 1.0
    for j in range(k + 1):
        out.append(c * r ** (p - j) if c != 0.0 else np.zeros_like(r))
        c *= p - j
    return out


def power(x, p: float):
    """``x ** p`` for real ``p``; jets need a strictly positive base."""
    if not isinstance(x, Jet):
        return np.power(x, p)
    if np.any(x.real <= 0):
        raise ValueError("non-integer power of a non-positive jet")
    return _apply_taylor(x, _power_derivs(x.real, p, x.depth))


def sqrt(x):
    """Square root; jets must be strictly positive."""
    if not isinstance(x, Jet):
        return np.sqrt(x)
    if np.any(x.real <= 0):
        raise ValueError("sqrt of a non-positive jet")
    return _apply_taylor(x, _power_derivs(x.real, 0.5, x.depth))


def reciprocal(x):
    if not isinstance(x, Jet):
        return 1.0 / np.asarray(x, dtype=float)
    r = x.real
    if np.any(r == 0):
        raise ZeroDivisionError("division by a jet with zero real part")
    return _apply_taylor(x, [(-1) ** j * math.factorial(j) / r ** (j + 1)
                             for j in range(x.depth + 1)])


def select(cond, a, b):
    """Elementwise ``a if cond else b`` for jets, keyed on a boolean real array."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(cond, a, b)
    k = max(depth_of(a), depth_of(b))
    # promote both branches to depth k (adding zero lifts the shallower one)
    a = a if depth_of(a) == k else _add(0.0 * (b if depth_of(b) == k else a), a)
    b = b if depth_of(b) == k else _add(0.0 * a, b)
    return Jet(np.where(_expand(np.asarray(cond), 0, k), a.coef, b.coef), k)


def minimum(a, b):
    """Pointwise min; exact ties pick ``a``."""
    return select(_real(a) <= _real(b), a, b)


def maximum(a, b):
    """Pointwise max; exact ties pick ``a``."""
    return select(_real(a) >= _real(b), a, b)


def absolute(x):
    """|x| with the positive branch chosen at zero."""
    return select(_real(x) >= 0, x, -x)


def sign(x) -> np.ndarray:
    """Sign of the real part (+1 at zero)."""
    return np.where(_real(x) >= 0, 1.0, -1.0)


def real_part(x) -> np.ndarray:
    return _real(x)


def reduce_min(values: Sequence):
    out = values[0]
    for v in values[1:]:
        out = minimum(out, v)
    return out


def reduce_max(values: Sequence):
    out = values[0]
    for v in values[1:]:
        out = maximum(out, v)
    return out


def dot(a: Sequence, b: Sequence):
    out = 0.0
    for ai, bi in zip(a, b):
        out = out + ai * bi
    return out


# -- seeding and extraction ------------------------------------------------

def _check_depth(depth: int, max_depth: int):
    if depth > max_depth:
        raise DepthError(f"nesting depth {depth} exceeds the limit {max_depth}")


def lift(x: Sequence, index: int, depth: int = 1, max_depth: int = DEFAULT_MAX_DEPTH) -> list:
    """Seed ``x`` for differentiation along coordinate ``index``.

    ``depth`` single-direction layers are stacked, so evaluating a function on
    the result and descending ``partials[0]`` ``d`` times yields the ``d``-th
    derivative along ``x[index]``.
    """
    n = len(x)
    if not 0 <= index < n:
        raise IndexError(f"direction index {index} out of range for dimension {n}")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    out = list(x)
    for _ in range(depth):
        out = _seed_layer(out, [index], max_depth)
    return out


def seed(x: Sequence, max_depth: int = DEFAULT_MAX_DEPTH) -> list:
    """Add one outer layer with a direction per coordinate of ``x``."""
    return _seed_layer(list(x), list(range(len(x))), max_depth)


def _seed_layer(x: list, dirs: list[int], max_depth: int) -> list:
    d = max(depth_of(xi) for xi in x)
    _check_depth(d + 1, max_depth)
    coefs = [_coef(xi, d) for xi in x]
    shape = np.broadcast_shapes(*[c.shape for c in coefs])
    nb = len(shape) - d
    out = []
    for i, c in enumerate(coefs):
        new = np.zeros(shape[:nb] + (len(dirs) + 1,) + shape[nb:])
        new[(...,) + (0,) + (slice(None),) * d] = c
        if i in dirs:
            new[(...,) + (1 + dirs.index(i),) + (0,) * d] = 1.0
        out.append(Jet(new, d + 1))
    return out


def value_and_gradient(fn: Callable, x: Sequence, max_depth: int = DEFAULT_MAX_DEPTH):
    """Evaluate ``fn`` and its gradient at ``x`` in one forward pass.

    ``x`` may hold plain numbers, arrays (a batch of states, component-first)
    or jets; the result is one nesting level shallower than the seeded pass.
    """
    n = len(x)
    d = max(depth_of(xi) for xi in x)
    y = fn(seed(x, max_depth))
    if depth_of(y) <= d:
        # fn ignores its argument at this level
        return y, [0.0 * _real(y) if d == 0 else 0.0 * y for _ in range(n)]
    return y.value, y.partials


def gradient(fn: Callable, x: Sequence, max_depth: int = DEFAULT_MAX_DEPTH):
    """Gradient of a scalar field; an ndarray for plain input, else a list of jets.

    Failures inside ``fn`` are re-raised as :class:`JetEvaluationError`; the
    vectorised pass covers every coordinate at once, so a failing pass is
    retried one coordinate at a time to report which index broke.
    """
    try:
        _, g = value_and_gradient(fn, x, max_depth)
    except DepthError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        for j in range(len(x)):
            # only coordinate j carries the new layer; the rest stay as given
            probe = list(x)
            probe[j] = _seed_layer(list(x), [j], max_depth)[j]
            try:
                fn(probe)
            except Exception as inner:  # noqa: BLE001
                raise JetEvaluationError(j, inner) from inner
        raise JetEvaluationError(-1, exc) from exc
    if all(depth_of(gi) == 0 for gi in g):
        return np.array([np.asarray(gi, dtype=float) for gi in g])
    return g
