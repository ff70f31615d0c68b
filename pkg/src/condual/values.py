"""Step values over a finite algebra and the conditional extended reals.

Every step value ``sum x_i | a_i`` is stored in canonical form as the total map
atom -> value, which decides the identification of representatives by
construction.  :class:`CondExtReal` is the extended-real instance, stored as a
read-only float64 array of length ``d`` with ``+-inf`` allowed and NaN banned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .algebra import AlgebraMismatchError, Condition, Partition, PartitionError, is_partition

__all__ = [
    "IndeterminateFormError",
    "StepValue",
    "RestrictedValue",
    "CondExtReal",
    "CondReal",
    "concatenate",
    "restrict",
    "agreement",
    "add",
    "mul",
    "neg",
    "sub",
    "sub_inf_convention",
    "leq",
    "cond_leq",
    "strict_on",
    "ess_sup",
    "ess_inf",
    "cond_abs",
    "arctan_c",
]


class IndeterminateFormError(ArithmeticError):
    """``(+inf) + (-inf)`` outside the sup-of-differences convention."""


def _hashable(v: Any):
    if isinstance(v, np.ndarray):
        return tuple(float(t) for t in v.ravel())
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass(frozen=True)
class StepValue:
    """A step value with arbitrary (hashable) entries, one per atom."""

    per_atom: tuple

    def __post_init__(self):
        if not self.per_atom:
            raise ValueError("a step value needs at least one atom")
        object.__setattr__(self, "per_atom", tuple(_hashable(v) for v in self.per_atom))

    @property
    def d(self) -> int:
        return len(self.per_atom)

    @classmethod
    def from_atoms(cls, entries: Sequence, d: int | None = None) -> "StepValue":
        return cls(tuple(entries))

    @classmethod
    def constant(cls, value, d: int) -> "StepValue":
        return cls((value,) * d)

    @classmethod
    def from_blocks(cls, p: Partition, values: Sequence) -> "StepValue":
        """``sum values[i] | p.blocks[i]``."""
        if len(values) != len(p.blocks):
            raise ValueError(f"{len(values)} values for {len(p.blocks)} blocks")
        idx = p.block_index()
        return cls(tuple(values[i] for i in idx))

    def partition(self) -> tuple[Partition, list]:
        """Coarsest partition on which the value is constant, with block values."""
        groups: dict = {}
        for k, v in enumerate(self.per_atom):
            groups.setdefault(v, []).append(k)
        p = Partition.of(groups.values(), self.d)
        first = {min(atoms): v for v, atoms in groups.items()}
        return p, [first[min(b.atoms)] for b in p.blocks]

    def map(self, fn) -> "StepValue":
        return StepValue(tuple(fn(v) for v in self.per_atom))


@dataclass(frozen=True)
class RestrictedValue:
    """The object ``x | a``: the entries of ``x`` on ``a``, tagged with ``a``.

    Two restricted values are equal only if their conditions are equal (C1).
    """

    entries: tuple
    condition: Condition


def _entries(x) -> Sequence:
    return x.per_atom


def restrict(x, a: Condition) -> RestrictedValue:
    if x.d != a.d:
        raise AlgebraMismatchError(f"value over {x.d} atoms restricted to condition over {a.d}")
    pa = _entries(x)
    return RestrictedValue(tuple((k, _hashable(pa[k])) for k in a.sorted()), a)


def concatenate(p, values: Sequence):
    """The unique value agreeing with ``values[i]`` on block ``i``.

    ``p`` is either a :class:`Partition` (values follow its canonical block
    order) or a raw sequence of conditions forming a partition, possibly with
    empty blocks, in which case values pair with blocks as given.  Works for any
    atom-indexed type exposing ``per_atom`` and ``from_atoms``.
    """
    blocks = list(p.blocks if isinstance(p, Partition) else p)
    values = list(values)
    if len(values) != len(blocks):
        raise ValueError(f"{len(values)} values for {len(blocks)} blocks")
    if not is_partition(blocks):
        raise PartitionError(f"not a partition: {blocks}")
    d = blocks[0].d
    for v in values:
        if v.d != d:
            raise AlgebraMismatchError(f"value over {v.d} atoms, partition over {d}")
    owner = [0] * d
    for i, b in enumerate(blocks):
        for k in b.atoms:
            owner[k] = i
    entries = [_entries(values[i])[k] for k, i in enumerate(owner)]
    return type(values[0]).from_atoms(entries, d)


def agreement(x, y) -> Condition:
    """Largest condition ``b`` with ``x|b == y|b``."""
    if x.d != y.d:
        raise AlgebraMismatchError(f"values over {x.d} and {y.d} atoms")
    px, py = _entries(x), _entries(y)
    return Condition.of((k for k in range(x.d) if _hashable(px[k]) == _hashable(py[k])), x.d)


class CondExtReal:
    """Conditional extended real number: an extended real per atom."""

    __slots__ = ("_v",)

    def __init__(self, values):
        v = np.array(values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise ValueError("a conditional number needs at least one atom")
        if np.isnan(v).any():
            raise ValueError("NaN is not an extended real")
        v.flags.writeable = False
        self._v = v

    @classmethod
    def from_atoms(cls, entries: Sequence, d: int | None = None):
        return cls(entries)

    @classmethod
    def constant(cls, value: float, d: int):
        return cls(np.full(d, float(value)))

    @property
    def per_atom(self) -> np.ndarray:
        return self._v

    @property
    def values(self) -> np.ndarray:
        return self._v

    @property
    def d(self) -> int:
        return self._v.size

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self._v).all())

    def to_json(self) -> list:
        return [_float_json(t) for t in self._v]

    @classmethod
    def from_json(cls, data):
        return cls([_float_from_json(t) for t in data])

    def __eq__(self, other):
        if not isinstance(other, CondExtReal):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self._v, other._v))

    def __hash__(self):
        return hash(tuple(self._v.tolist()))

    def __repr__(self):
        return f"{type(self).__name__}({self._v.tolist()})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_promote(other, self.d), self)

    def __le__(self, other):
        return leq(self, _promote(other, self.d))

    def __ge__(self, other):
        return leq(_promote(other, self.d), self)


class CondReal(CondExtReal):
    """All-finite conditional real number."""

    __slots__ = ()

    def __init__(self, values):
        super().__init__(values)
        if not np.isfinite(self._v).all():
            raise ValueError(f"conditional real must be finite, got {self._v.tolist()}")


def _float_json(t: float):
    if t == math.inf:
        return "inf"
    if t == -math.inf:
        return "-inf"
    return float(t)


def _float_from_json(t) -> float:
    if isinstance(t, str):
        if t in ("inf", "+inf"):
            return math.inf
        if t == "-inf":
            return -math.inf
        raise ValueError(f"unknown numeric sentinel {t!r}")
    return float(t)


def _promote(x, d: int) -> CondExtReal:
    if isinstance(x, CondExtReal):
        return x
    return CondExtReal.constant(float(x), d)


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, CondExtReal) and not isinstance(y, CondExtReal):
        y = _promote(y, x.d)
    elif isinstance(y, CondExtReal) and not isinstance(x, CondExtReal):
        x = _promote(x, y.d)
    if x.d != y.d:
        raise AlgebraMismatchError(f"conditional numbers over {x.d} and {y.d} atoms")
    return x.values, y.values


def add(x, y) -> CondExtReal:
    a, b = _pair(x, y)
    bad = np.isinf(a) & np.isinf(b) & (np.sign(a) != np.sign(b))
    if bad.any():
        raise IndeterminateFormError(f"(+inf) + (-inf) on atoms {np.flatnonzero(bad).tolist()}")
    return CondExtReal(a + b)


def mul(x, y) -> CondExtReal:
    """Atomwise product with ``0 * (+-inf) = 0``."""
    a, b = _pair(x, y)
    with np.errstate(invalid="ignore"):
        out = a * b
    out[(a == 0) | (b == 0)] = 0.0
    return CondExtReal(out)


def neg(x: CondExtReal) -> CondExtReal:
    return CondExtReal(-x.values)


def sub(x, y) -> CondExtReal:
    return add(x, neg(_promote(y, x.d) if isinstance(x, CondExtReal) else y))


def sub_inf_convention(p, q) -> CondExtReal:
    """``p - q`` with ``anything - (+inf) = -inf`` and ``(> -inf) - (-inf) = +inf``.

    The remaining case ``(-inf) - (-inf)`` is taken as ``-inf`` so the result
    is absorbed inside a supremum.
    """
    a, b = _pair(p, q)
    with np.errstate(invalid="ignore"):
        out = a - b
    out[b == math.inf] = -math.inf
    out[(b == -math.inf) & (a > -math.inf)] = math.inf
    out[(b == -math.inf) & (a == -math.inf)] = -math.inf
    return CondExtReal(out)


def leq(x, y) -> bool:
    a, b = _pair(x, y)
    return bool((a <= b).all())


def cond_leq(x, y) -> Condition:
    a, b = _pair(x, y)
    return Condition.of(np.flatnonzero(a <= b).tolist(), a.size)


def strict_on(x, y) -> Condition:
    a, b = _pair(x, y)
    return Condition.of(np.flatnonzero(a < b).tolist(), a.size)


def _stack(family: Sequence[CondExtReal]) -> np.ndarray:
    family = list(family)
    if not family:
        raise ValueError("essential sup/inf of an empty family")
    d = family[0].d
    for x in family:
        if x.d != d:
            raise AlgebraMismatchError(f"family mixes {d} and {x.d} atoms")
    return np.stack([x.values for x in family])


def ess_sup(family: Sequence[CondExtReal]) -> CondExtReal:
    return CondExtReal(_stack(family).max(axis=0))


def ess_inf(family: Sequence[CondExtReal]) -> CondExtReal:
    return CondExtReal(_stack(family).min(axis=0))


def cond_abs(x: CondExtReal) -> CondExtReal:
    """``x | a + (-x) | a^c`` where ``a`` is the largest condition with ``x >= 0``."""
    a = cond_leq(CondExtReal.constant(0.0, x.d), x)
    return concatenate_pair(a, x, neg(x))


def concatenate_pair(a: Condition, x, y):
    """``x | a + y | a^c`` (a two-block concatenation, either block may be empty)."""
    return concatenate([a, ~a], [x, y])


def arctan_c(x: CondExtReal) -> CondReal:
    # np.arctan(+-inf) is exactly +-pi/2
    return CondReal(np.arctan(x.values))
