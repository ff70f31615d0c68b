"""Conditional metrics on step values and their completion at finite scale.

With finitely many atoms the completion of the step values in R^n is the
atom-indexed product R^n x ... x R^n, so the completion is realized by
:class:`CondVector` and the embedding ``j`` is the identity on
representations.  Cauchy sequences are user-supplied black boxes and are only
*verified* over a finite horizon.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import AlgebraMismatchError, refine
from .values import CondExtReal, CondReal, StepValue

__all__ = [
    "NotCauchyError",
    "CondVector",
    "METRICS",
    "step_metric",
    "CondSequence",
    "is_cauchy",
    "cond_limit",
    "embed",
    "as_step_value",
    "ScalarFunction",
    "norm_function",
    "linear_function",
    "arctan_function",
    "uc_extend",
    "uc_extend_by_approximation",
]


class NotCauchyError(ValueError):
    pass


class CondVector:
    """A point of R^n on every atom; stored as a read-only ``(d, n)`` array."""

    __slots__ = ("_v",)

    def __init__(self, values):
        v = np.array(values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError(f"expected a (d, n) array, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("conditional vectors have finite entries")
        v.flags.writeable = False
        self._v = v

    @classmethod
    def from_atoms(cls, entries: Sequence, d: int | None = None) -> "CondVector":
        return cls(np.stack([np.asarray(e, dtype=np.float64).reshape(-1) for e in entries]))

    @classmethod
    def constant(cls, x, d: int) -> "CondVector":
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return cls(np.tile(x, (d, 1)))

    @property
    def per_atom(self) -> np.ndarray:
        return self._v

    @property
    def values(self) -> np.ndarray:
        return self._v

    @property
    def d(self) -> int:
        return self._v.shape[0]

    @property
    def n(self) -> int:
        return self._v.shape[1]

    def norm(self, kind: str = "euclidean") -> CondReal:
        return CondReal(METRICS[kind](self._v, np.zeros_like(self._v)))

    def to_json(self) -> list:
        return self._v.tolist()

    def __eq__(self, other):
        if not isinstance(other, CondVector):
            return NotImplemented
        return bool(np.array_equal(self._v, other._v))

    def __hash__(self):
        return hash(self._v.tobytes())

    def __repr__(self):
        return f"CondVector({self._v.tolist()})"

    def _other(self, other) -> np.ndarray:
        if isinstance(other, CondVector):
            if other._v.shape != self._v.shape:
                raise AlgebraMismatchError(f"shapes {self._v.shape} and {other._v.shape}")
            return other._v
        return np.broadcast_to(np.asarray(other, dtype=np.float64), self._v.shape)

    def __add__(self, other):
        return CondVector(self._v + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return CondVector(self._v - self._other(other))

    def __neg__(self):
        return CondVector(-self._v)

    def __mul__(self, scalar):
        """Scalar action of a conditional real (atomwise) or a plain float."""
        if isinstance(scalar, CondExtReal):
            if scalar.d != self.d:
                raise AlgebraMismatchError(f"scalar over {scalar.d} atoms, vector over {self.d}")
            return CondVector(scalar.values[:, None] * self._v)
        return CondVector(float(scalar) * self._v)

    __rmul__ = __mul__


def _euclidean(a, b):
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _l1(a, b):
    return np.sum(np.abs(a - b), axis=-1)


def _linf(a, b):
    return np.max(np.abs(a - b), axis=-1)


def _arctan(a, b):
    # complete metric on the extended reals, coordinatewise and summed
    return np.sum(np.abs(np.arctan(a) - np.arctan(b)), axis=-1)


METRICS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "euclidean": _euclidean,
    "l1": _l1,
    "linf": _linf,
    "arctan": _arctan,
}


def _metric(base) -> Callable:
    if callable(base):
        return base
    try:
        return METRICS[base]
    except KeyError:
        raise ValueError(f"unknown metric {base!r}; choose from {sorted(METRICS)}") from None


def _step_points(x) -> np.ndarray:
    if isinstance(x, CondVector):
        return x.values
    if isinstance(x, CondExtReal):
        return x.values[:, None]
    raise TypeError(f"not a conditional point: {type(x).__name__}")


def step_metric(x, y, base="euclidean") -> CondReal:
    """Atomwise base metric.

    On two :class:`StepValue` arguments this is ``sum d(x_i, y_j) | a_i & b_j``
    evaluated block by block on the common refinement; on conditional vectors
    (or extended reals, for the ``"arctan"`` metric) it is vectorized.
    """
    metric = _metric(base)
    if isinstance(x, StepValue) and isinstance(y, StepValue):
        if x.d != y.d:
            raise AlgebraMismatchError(f"step values over {x.d} and {y.d} atoms")
        px, vx = x.partition()
        py, vy = y.partition()
        out = np.empty(x.d)
        bx, by = px.block_index(), py.block_index()
        for block in refine(px, py).blocks:
            k = min(block.atoms)
            a = np.asarray(vx[bx[k]], dtype=np.float64).reshape(-1)
            b = np.asarray(vy[by[k]], dtype=np.float64).reshape(-1)
            out[list(block.atoms)] = metric(a, b)
        return CondReal(out)
    if isinstance(x, StepValue):
        x = embed(x)
    if isinstance(y, StepValue):
        y = embed(y)
    a, b = _step_points(x), _step_points(y)
    if a.shape != b.shape:
        raise AlgebraMismatchError(f"shapes {a.shape} and {b.shape}")
    return CondReal(metric(a, b))


def embed(x: StepValue) -> CondVector:
    """The isometric embedding of step values into their completion."""
    return CondVector.from_atoms(x.per_atom)


def as_step_value(x: CondVector) -> StepValue:
    """Inverse of :func:`embed`; shows the embedding is onto at finite scale."""
    return StepValue(tuple(tuple(row) for row in x.values.tolist()))


@dataclass(frozen=True)
class CondSequence:
    """A conditional sequence ``k -> s(k)`` for ``k = 1, 2, ...``.

    ``modulus`` optionally declares a tolerance schedule ``k -> tol(k)``.
    """

    eval: Callable[[int], CondVector]
    modulus: Callable[[int], CondReal] | None = None

    def __call__(self, k: int) -> CondVector:
        return self.eval(k)

    def stacked(self, horizon: int) -> np.ndarray:
        pts = [_step_points(self.eval(k)) for k in range(1, horizon + 1)]
        shape = pts[0].shape
        for p in pts:
            if p.shape != shape:
                raise AlgebraMismatchError("sequence terms change shape")
        return np.stack(pts)


def _as_radius(r, d: int) -> np.ndarray:
    if isinstance(r, CondExtReal):
        if r.d != d:
            raise AlgebraMismatchError(f"radius over {r.d} atoms, sequence over {d}")
        return r.values
    return np.full(d, float(r))


def _tail_diameters(pts: np.ndarray, metric) -> np.ndarray:
    """``diam[k] = max_{k <= m, m' < H} d(s_m, s_m')`` per atom, 0-based ``k``."""
    H = pts.shape[0]
    diam = np.zeros((H, pts.shape[1]))
    running = np.zeros(pts.shape[1])
    for k in range(H - 1, -1, -1):
        if k < H - 1:
            running = np.maximum(running, metric(pts[k][None], pts[k + 1 :]).max(axis=0))
        diam[k] = running
    return diam


def is_cauchy(s: CondSequence, r, horizon: int, base="euclidean") -> tuple[bool, int | None]:
    """Verify the Cauchy property up to ``horizon``.

    Returns ``(True, k)`` for the least ``k`` such that every pair of terms in
    ``s(k), ..., s(horizon)`` lies within ``r`` on every atom, with at least
    two terms in the tail.  Per-atom witnesses may be smaller; ``k`` is their
    maximum.  ``False`` means "not verified up to horizon", not a disproof.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon == 1:
        return False, None
    pts = s.stacked(horizon)
    rad = _as_radius(r, pts.shape[1])
    if not (rad > 0).all():
        raise ValueError("radius must be strictly positive on every atom")
    ok = _tail_diameters(pts, _metric(base)) <= rad
    ok[-1] = False  # a one-term tail verifies nothing
    if not ok.any(axis=0).all():
        return False, None
    # ok is monotone in k per atom, so the first True is the per-atom witness
    per_atom = np.argmax(ok, axis=0) + 1
    return True, int(per_atom.max())


def cond_limit(s: CondSequence, tol, horizon: int, base="euclidean") -> CondVector:
    d = _step_points(s(1)).shape[0]
    half = _as_radius(tol, d) / 2
    ok, witness = is_cauchy(s, CondReal(half), horizon, base)
    if not ok:
        raise NotCauchyError(f"Cauchy property at tolerance {half.tolist()} not verified up to {horizon}")
    return s(horizon)


@dataclass(frozen=True)
class ScalarFunction:
    """A uniformly continuous ``R^n -> R`` with a modulus ``eps -> delta``."""

    fn: Callable[[np.ndarray], np.ndarray]
    modulus: Callable[[float], float]
    name: str = field(default="f")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(pts, dtype=np.float64))


def norm_function(kind: str = "euclidean") -> ScalarFunction:
    metric = _metric(kind)
    return ScalarFunction(lambda p: metric(p, np.zeros_like(p)), lambda eps: eps, f"norm:{kind}")


def linear_function(c) -> ScalarFunction:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    scale = float(np.linalg.norm(c))
    return ScalarFunction(
        lambda p: p @ c,
        lambda eps: eps / scale if scale > 0 else np.inf,
        f"linear:{c.tolist()}",
    )


def arctan_function() -> ScalarFunction:
    """``arctan`` on the first coordinate; 1-Lipschitz."""
    return ScalarFunction(lambda p: np.arctan(p[..., 0]), lambda eps: eps, "arctan")


def uc_extend(f: ScalarFunction, x: CondVector) -> CondReal:
    """The conditionally uniformly continuous extension, evaluated atomwise."""
    return CondReal(f(x.values))


def uc_extend_by_approximation(
    f: ScalarFunction, s: CondSequence, eps: float, horizon: int, base="euclidean"
) -> CondReal:
    """Evaluate the extension as ``lim f_s(s(k))`` along a Cauchy sequence.

    The sequence must be verified Cauchy at radius ``delta(eps)``; the tail
    values of ``f_s`` then stay within ``eps`` of the returned estimate.
    """
    delta = f.modulus(eps)
    d = _step_points(s(1)).shape[0]
    ok, witness = is_cauchy(s, CondReal(np.full(d, min(delta, 1e300))), horizon, base)
    if not ok:
        raise NotCauchyError(f"sequence not verified Cauchy at delta={delta} up to {horizon}")
    vals = np.stack([f(_step_points(s(k))) for k in range(witness, horizon + 1)])
    est = vals[-1]
    spread = np.abs(vals - est).max(axis=0)
    if (spread > eps).any():
        raise NotCauchyError(f"f along the tail varies by {spread.max()} > eps={eps}")
    return CondReal(est)
