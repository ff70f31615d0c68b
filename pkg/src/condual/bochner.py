"""Random variables on a finite measure space and their conditional realization.

Points of zero weight are null: the measure algebra has one atom per
positive-weight point, and two random variables are identified when they
agree off the null points.  :func:`iso_to_cond` drops the null points and
returns the atom-indexed :class:`CondVector` (or :class:`CondExtReal`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import Condition
from .conjugate import GridSpec, check_duality
from .functions import FunctionDescriptor
from .metric import METRICS, CondVector
from .pairing import DualPairConfig
from .values import CondExtReal, ess_inf, ess_sup

__all__ = [
    "FiniteMeasureSpace",
    "MeasureAlgebraMap",
    "measure_algebra",
    "L0Element",
    "canonicalize",
    "iso_to_cond",
    "lift",
    "l0_pairing",
    "l0_norm",
    "l0_add",
    "l0_scale",
    "l0_concatenate",
    "ess_sup_l0",
    "ess_inf_l0",
    "l0_check_duality",
]


@dataclass(frozen=True)
class FiniteMeasureSpace:
    labels: tuple
    weights: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        w = tuple(float(t) for t in self.weights)
        if len(labels) != len(w):
            raise ValueError(f"{len(labels)} labels and {len(w)} weights")
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be distinct")
        if any(t < 0 or not math.isfinite(t) for t in w):
            raise ValueError("weights must be finite and nonnegative")
        if not any(t > 0 for t in w):
            raise ValueError("all points are null")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def positive(self) -> np.ndarray:
        return np.array([t > 0 for t in self.weights])

    def index(self, label) -> int:
        return self.labels.index(label)

    def measure(self, subset) -> float:
        return sum(self.weights[self.index(a)] for a in set(subset))

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "weights": list(self.weights)}


@dataclass(frozen=True)
class MeasureAlgebraMap:
    """Quotient map ``A -> [A]`` onto conditions over the positive-weight points."""

    space: FiniteMeasureSpace
    atom_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms, k = {}, 0
        for lab, w in zip(self.space.labels, self.space.weights):
            if w > 0:
                atoms[lab] = k
                k += 1
        object.__setattr__(self, "atom_of", atoms)

    @property
    def d(self) -> int:
        return len(self.atom_of)

    def condition(self, subset) -> Condition:
        for a in subset:
            self.space.index(a)  # unknown labels raise
        return Condition.of([self.atom_of[a] for a in subset if a in self.atom_of], self.d)


def measure_algebra(space: FiniteMeasureSpace) -> tuple[int, MeasureAlgebraMap]:
    m = MeasureAlgebraMap(space)
    return m.d, m


def _raw(values, size: int) -> np.ndarray:
    v = np.array(values, dtype=np.float64)
    if v.shape[0] != size:
        raise ValueError(f"{v.shape[0]} values for {size} points")
    if np.isnan(v).any():
        raise ValueError("NaN in random variable")
    if v.ndim > 2:
        raise ValueError("values must be scalars or vectors")
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class L0Element:
    """A random variable with values in ``R^n`` (``raw`` of shape ``(m, n)``)
    or in the extended reals (``raw`` of shape ``(m,)``).

    Equality and hashing go through the canonical form, so raws that differ
    only on null points are the same element.
    """

    space: FiniteMeasureSpace
    raw: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "raw", _raw(self.raw, self.space.size))

    @property
    def is_vector(self) -> bool:
        return self.raw.ndim == 2

    @property
    def canonical(self) -> np.ndarray:
        return self.raw[self.space.positive]

    @property
    def null_mask(self) -> np.ndarray:
        return ~self.space.positive

    def __eq__(self, other):
        if not isinstance(other, L0Element):
            return NotImplemented
        return self.space == other.space and self.raw.ndim == other.raw.ndim and bool(
            np.array_equal(self.canonical, other.canonical))

    def __hash__(self):
        return hash((self.space, self.raw.ndim, self.canonical.tobytes()))

    def to_json(self) -> dict:
        def num(t):
            return "inf" if t == math.inf else "-inf" if t == -math.inf else float(t)

        vals = [[num(t) for t in row] for row in self.raw] if self.is_vector else [num(t) for t in self.raw]
        return {"values": vals, "null": self.null_mask.tolist()}


def canonicalize(space: FiniteMeasureSpace, raw) -> L0Element:
    return L0Element(space, raw)


def iso_to_cond(x: L0Element):
    """The realization ``L^0 -> conditional points``: drop the null points."""
    if x.is_vector:
        return CondVector(x.canonical)
    return CondExtReal(x.canonical)


def lift(space: FiniteMeasureSpace, c, null_value=0.0) -> L0Element:
    """Inverse of :func:`iso_to_cond`; null points get ``null_value``."""
    v = c.values
    pos = space.positive
    if v.shape[0] != int(pos.sum()):
        raise ValueError(f"conditional value over {v.shape[0]} atoms, space has {int(pos.sum())}")
    raw = np.empty((space.size,) + v.shape[1:])
    raw[pos] = v
    raw[~pos] = null_value
    return L0Element(space, raw)


def _same(x: L0Element, y: L0Element) -> None:
    if x.space != y.space:
        raise ValueError("random variables on different spaces")


def l0_pairing(x: L0Element, y: L0Element, config: DualPairConfig | None = None) -> L0Element:
    """Pointwise ``<x(w), y(w)>``."""
    _same(x, y)
    if not (x.is_vector and y.is_vector) or x.raw.shape != y.raw.shape:
        raise ValueError("pairing needs two vector variables of equal dimension")
    if config is None:
        return L0Element(x.space, np.sum(x.raw * y.raw, axis=-1))
    return L0Element(x.space, config.pair(x.raw, y.raw))


def l0_norm(x: L0Element, kind: str = "euclidean") -> L0Element:
    return L0Element(x.space, METRICS[kind](x.raw, np.zeros_like(x.raw)))


def l0_add(x: L0Element, y: L0Element) -> L0Element:
    _same(x, y)
    if x.raw.shape != y.raw.shape:
        raise ValueError("shapes differ")
    return L0Element(x.space, x.raw + y.raw)


def l0_scale(s, x: L0Element) -> L0Element:
    """Pointwise ``s(w) * x(w)`` for a real variable or a float ``s``."""
    if isinstance(s, L0Element):
        _same(s, x)
        if s.is_vector or not np.isfinite(s.raw).all():
            raise ValueError("scalars must be finite real variables")
        a = s.raw[:, None] if x.is_vector else s.raw
        return L0Element(x.space, a * x.raw)
    return L0Element(x.space, float(s) * x.raw)


def l0_concatenate(blocks: Sequence, elements: Sequence[L0Element]) -> L0Element:
    """``sum x_n 1_{A_n}`` along a partition of the points into label sets."""
    elements = list(elements)
    space = elements[0].space
    for e in elements:
        _same(elements[0], e)
    owner = np.full(space.size, -1)
    for i, b in enumerate(blocks):
        for lab in b:
            j = space.index(lab)
            if owner[j] >= 0:
                raise ValueError(f"point {lab!r} lies in two blocks")
            owner[j] = i
    if (owner < 0).any():
        raise ValueError("blocks do not cover the space")
    raw = np.stack([elements[i].raw[j] for j, i in enumerate(owner)])
    return L0Element(space, raw)


def _family(family: Sequence[L0Element]) -> list:
    family = list(family)
    if not family:
        raise ValueError("essential sup/inf of an empty family")
    for e in family:
        _same(family[0], e)
        if e.is_vector:
            raise ValueError("essential sup/inf needs real-valued variables")
    return family


def ess_sup_l0(family: Sequence[L0Element]) -> L0Element:
    """Essential supremum; null points also receive the pointwise max."""
    family = _family(family)
    space = family[0].space
    s = ess_sup([iso_to_cond(e) for e in family])
    nulls = np.max(np.stack([e.raw for e in family]), axis=0)
    raw = nulls.copy()
    raw[space.positive] = s.values
    return L0Element(space, raw)


def ess_inf_l0(family: Sequence[L0Element]) -> L0Element:
    family = _family(family)
    space = family[0].space
    s = ess_inf([iso_to_cond(e) for e in family])
    raw = np.min(np.stack([e.raw for e in family]), axis=0)
    raw[space.positive] = s.values
    return L0Element(space, raw)


def l0_check_duality(f: FunctionDescriptor, x: L0Element, primal_grid: GridSpec, dual_grid: GridSpec,
                     tol=None, config: DualPairConfig | None = None, method: str = "fast"):
    """Dual representation of ``f`` at a random point, through the realization.

    ``f`` has one component per atom of the measure algebra; atom ``k`` is
    checked at ``x(w_k)``.  Returns ``(residual, optimizer, report)`` with the
    residual as a real variable and the maximizing dual point as an ``R^n``
    variable, both lifted back with zeros on the null points.
    """
    xc = iso_to_cond(x)
    if not isinstance(xc, CondVector) or xc.d != f.d:
        raise ValueError("need a vector variable with one positive point per component")
    rep = check_duality(f, xc.values, primal_grid, dual_grid, tol, config, method)
    k = np.arange(f.d)
    residual = rep.residual[k, k]
    optimizer = rep.optimizer[k, k]
    return (lift(x.space, CondExtReal(residual)), lift(x.space, CondVector(optimizer)), rep)
