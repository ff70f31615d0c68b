"""Finite power-set Boolean algebras.

A :class:`Condition` is a subset of the atoms ``{0, ..., d-1}``; the algebra
size ``d`` travels with every value so that mixing conditions from different
algebras fails loudly instead of silently producing nonsense.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

__all__ = [
    "AlgebraMismatchError",
    "PartitionError",
    "Condition",
    "Partition",
    "meet",
    "join",
    "complement",
    "leq",
    "sup",
    "inf",
    "is_partition",
    "refine",
    "all_conditions",
]


class AlgebraMismatchError(ValueError):
    """Two conditions from algebras of different size were combined."""


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Condition:
    atoms: frozenset
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"algebra size must be positive, got {self.d}")
        atoms = frozenset(int(k) for k in self.atoms)
        for k in atoms:
            if not 0 <= k < self.d:
                raise ValueError(f"atom {k} outside 0..{self.d - 1}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def of(cls, atoms: Iterable[int], d: int) -> "Condition":
        return cls(frozenset(atoms), d)

    @classmethod
    def empty(cls, d: int) -> "Condition":
        return cls(frozenset(), d)

    @classmethod
    def full(cls, d: int) -> "Condition":
        return cls(frozenset(range(d)), d)

    @property
    def is_empty(self) -> bool:
        return not self.atoms

    @property
    def is_full(self) -> bool:
        return len(self.atoms) == self.d

    def mask(self):
        """Boolean numpy mask of length ``d``."""
        import numpy as np

        m = np.zeros(self.d, dtype=bool)
        m[list(self.atoms)] = True
        return m

    def sorted(self) -> list[int]:
        return sorted(self.atoms)

    def to_json(self) -> list[int]:
        return self.sorted()

    @classmethod
    def from_json(cls, data: Sequence[int], d: int) -> "Condition":
        return cls.of(data, d)

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.atoms)

    def __and__(self, other):
        return meet(self, other)

    def __or__(self, other):
        return join(self, other)

    def __invert__(self):
        return complement(self)

    def __le__(self, other):
        return leq(self, other)

    def __repr__(self):
        return f"Condition({self.sorted()}, d={self.d})"


def _check(a: Condition, b: Condition) -> None:
    if a.d != b.d:
        raise AlgebraMismatchError(f"conditions from algebras of size {a.d} and {b.d}")


def meet(a: Condition, b: Condition) -> Condition:
    _check(a, b)
    return Condition(a.atoms & b.atoms, a.d)


def join(a: Condition, b: Condition) -> Condition:
    _check(a, b)
    return Condition(a.atoms | b.atoms, a.d)


def complement(a: Condition) -> Condition:
    return Condition(frozenset(range(a.d)) - a.atoms, a.d)


def leq(a: Condition, b: Condition) -> bool:
    """``a <= b`` in the algebra order, i.e. ``a & b == a``."""
    _check(a, b)
    return a.atoms <= b.atoms


def sup(family: Iterable[Condition], d: int | None = None) -> Condition:
    """Least upper bound; the empty family has supremum 0 (needs ``d``)."""
    family = list(family)
    if not family:
        if d is None:
            raise ValueError("sup of an empty family needs the algebra size d")
        return Condition.empty(d)
    out = family[0]
    for c in family[1:]:
        out = join(out, c)
    if d is not None:
        _check(out, Condition.empty(d))
    return out


def inf(family: Iterable[Condition], d: int | None = None) -> Condition:
    """Greatest lower bound; the empty family has infimum 1 (needs ``d``)."""
    family = list(family)
    if not family:
        if d is None:
            raise ValueError("inf of an empty family needs the algebra size d")
        return Condition.full(d)
    out = family[0]
    for c in family[1:]:
        out = meet(out, c)
    if d is not None:
        _check(out, Condition.empty(d))
    return out


def is_partition(blocks: Sequence[Condition]) -> bool:
    blocks = list(blocks)
    if not blocks:
        return False
    d = blocks[0].d
    seen: set[int] = set()
    for b in blocks:
        _check(b, blocks[0])
        if seen & b.atoms:
            return False
        seen |= b.atoms
    return len(seen) == d


@dataclass(frozen=True)
class Partition:
    """A partition of unity in canonical form.

    Empty blocks are accepted on input and dropped; the remaining blocks are
    ordered by their least atom, so equality is equality of canonical forms.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = list(self.blocks)
        if not is_partition(blocks):
            raise PartitionError(f"not a partition: {blocks}")
        canon = sorted((b for b in blocks if not b.is_empty), key=lambda b: min(b.atoms))
        object.__setattr__(self, "blocks", tuple(canon))

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]], d: int) -> "Partition":
        return cls(tuple(Condition.of(b, d) for b in blocks))

    @classmethod
    def trivial(cls, d: int) -> "Partition":
        return cls((Condition.full(d),))

    @classmethod
    def atoms_of(cls, d: int) -> "Partition":
        return cls(tuple(Condition.of([k], d) for k in range(d)))

    @property
    def d(self) -> int:
        return self.blocks[0].d

    def block_index(self):
        """Array mapping each atom to the index of the block containing it."""
        import numpy as np

        idx = np.empty(self.d, dtype=np.intp)
        for i, b in enumerate(self.blocks):
            idx[list(b.atoms)] = i
        return idx

    def to_json(self) -> list[list[int]]:
        return [b.to_json() for b in self.blocks]

    @classmethod
    def from_json(cls, data, d: int) -> "Partition":
        return cls.of(data, d)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __repr__(self):
        return f"Partition({[b.sorted() for b in self.blocks]}, d={self.d})"


def refine(p: Partition, q: Partition) -> Partition:
    """Common refinement: all nonempty meets ``p_i & q_j``."""
    if p.d != q.d:
        raise AlgebraMismatchError(f"partitions of algebras of size {p.d} and {q.d}")
    return Partition(tuple(meet(a, b) for a, b in product(p.blocks, q.blocks)))


def all_conditions(d: int) -> list[Condition]:
    """Every element of the algebra with ``d`` atoms (``2**d`` of them)."""
    return [
        Condition(frozenset(k for k in range(d) if mask >> k & 1), d) for mask in range(1 << d)
    ]
