"""Catalog of exactly-evaluable vector-valued functions ``R^n -> R-bar^d``.

A :class:`FunctionDescriptor` holds one scalar component per atom plus an
optional table of point overrides.  Components know their convexity,
Lipschitz constant on a box and, where available, their exact conjugate; the
conjugation engine only ever sees sampled values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

__all__ = [
    "Component",
    "Quadratic",
    "ScaledNorm",
    "BoxIndicator",
    "MaxAffine",
    "PiecewiseAffine1D",
    "Constant",
    "FunctionDescriptor",
    "component_from_json",
]

_P = {"1": 1, "2": 2, "inf": math.inf, 1: 1, 2: 2, math.inf: math.inf}


def _vec(v, n: int | None = None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=np.float64)).reshape(-1)
    if n is not None and a.size == 1 and n > 1:
        a = np.full(n, a[0])
    return a


def _box_vertices(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.array(list(itertools.product(*zip(lo, hi))), dtype=np.float64)


def _num(t):
    if isinstance(t, str):
        try:
            return {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}[t]
        except KeyError:
            raise ValueError(f"unknown numeric sentinel {t!r}") from None
    return float(t)


def _json_num(t: float):
    if t == math.inf:
        return "inf"
    if t == -math.inf:
        return "-inf"
    return float(t)


class Component:
    """One atom's scalar function on ``R^n``."""

    kind: str = "abstract"
    n: int
    convex: bool = True
    lsc: bool = True

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """Euclidean Lipschitz constant on the box (on its effective domain)."""
        raise NotImplementedError

    def conjugate(self, y: np.ndarray) -> np.ndarray | None:
        """Exact conjugate for the dot pairing, or ``None`` when not available."""
        return None

    def minimizer(self) -> np.ndarray | None:
        return None

    def liminf(self, pts: np.ndarray) -> np.ndarray:
        """``liminf f(z)`` as ``z -> x`` with ``z != x``; continuous kinds return ``f``."""
        return self(pts)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Quadratic(Component):
    """``1/2 x^T Q x + b^T x + c``."""

    Q: Any
    b: Any = 0.0
    c: float = 0.0
    kind = "quadratic"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=np.float64))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got {Q.shape}")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", _vec(self.b, Q.shape[0]))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def convex(self) -> bool:
        return bool(np.linalg.eigvalsh(self.Q).min() >= -1e-12)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return 0.5 * np.einsum("...i,ij,...j->...", pts, self.Q, pts) + pts @ self.b + self.c

    def lipschitz(self, lo, hi):
        # ||Qx + b|| is convex, so its max over the box sits at a vertex
        v = _box_vertices(lo, hi)
        return float(np.linalg.norm(v @ self.Q.T + self.b, axis=1).max())

    def conjugate(self, y):
        if np.linalg.eigvalsh(self.Q).min() <= 1e-12:
            return None
        z = np.asarray(y, dtype=np.float64) - self.b
        sol = np.linalg.solve(self.Q, z.reshape(-1, self.n).T).T.reshape(z.shape)
        return 0.5 * np.sum(z * sol, axis=-1) - self.c

    def minimizer(self):
        if np.linalg.eigvalsh(self.Q).min() <= 1e-12:
            return None
        return np.linalg.solve(self.Q, -self.b)

    def to_json(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}


@dataclass(frozen=True)
class ScaledNorm(Component):
    """``alpha * ||x||_p`` for ``p`` in ``{1, 2, inf}``."""

    alpha: float
    p: Any = 2
    n: int = 1
    kind = "norm"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "p", _P[self.p])

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return self.alpha * np.linalg.norm(pts, ord=self.p, axis=-1)

    def lipschitz(self, lo, hi):
        factor = math.sqrt(self.n) if self.p == 1 else 1.0
        return self.alpha * factor

    def conjugate(self, y):
        q = {1: math.inf, 2: 2, math.inf: 1}[self.p]
        nrm = np.linalg.norm(np.asarray(y, dtype=np.float64), ord=q, axis=-1)
        return np.where(nrm <= self.alpha * (1 + 1e-12), 0.0, math.inf)

    def minimizer(self):
        return np.zeros(self.n)

    def to_json(self):
        return {"kind": self.kind, "alpha": self.alpha, "p": _json_num(self.p), "n": self.n}


@dataclass(frozen=True)
class BoxIndicator(Component):
    """0 on the open box, ``boundary`` on its boundary, ``+inf`` outside.

    ``boundary=0`` is the closed-box indicator; any other value breaks lower
    semi-continuity (``+inf`` gives the open box).
    """

    lo: Any
    hi: Any
    boundary: float = 0.0
    kind = "indicator"

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if lo.shape != hi.shape or not (lo <= hi).all():
            raise ValueError("indicator box needs lo <= hi of equal length")
        if self.boundary < 0:
            raise ValueError("a negative boundary value makes the indicator non-convex")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "boundary", float(self.boundary))

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def degenerate(self) -> bool:
        """Empty interior: every point of the box is a boundary point."""
        return bool((self.lo == self.hi).any())

    @property
    def lsc(self) -> bool:
        return self.boundary == 0.0 or self.degenerate

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        interior = np.all((pts > self.lo) & (pts < self.hi), axis=-1)
        out = np.where(inside, self.boundary, math.inf)
        return np.where(interior, 0.0, out)

    def lipschitz(self, lo, hi):
        return 0.0

    def liminf(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        closed = np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        if not self.degenerate:
            return np.where(closed, 0.0, math.inf)
        if (self.lo == self.hi).all():
            return np.full(closed.shape, math.inf)  # an isolated point
        return np.where(closed, self.boundary, math.inf)

    def conjugate(self, y):
        if not self.lsc:
            return None
        y = np.asarray(y, dtype=np.float64)
        shift = self.boundary if self.degenerate else 0.0
        return np.sum(np.maximum(y * self.lo, y * self.hi), axis=-1) - shift

    def minimizer(self):
        return 0.5 * (self.lo + self.hi)

    def to_json(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist(),
                "boundary": _json_num(self.boundary)}


@dataclass(frozen=True)
class MaxAffine(Component):
    """``max_i a_i^T x + c_i``."""

    A: Any
    c: Any = 0.0
    kind = "max_affine"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", _vec(self.c, A.shape[0]))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.max(pts @ self.A.T + self.c, axis=-1)

    def lipschitz(self, lo, hi):
        return float(np.linalg.norm(self.A, axis=1).max())

    def to_json(self):
        return {"kind": self.kind, "A": self.A.tolist(), "c": self.c.tolist()}


@dataclass(frozen=True)
class PiecewiseAffine1D(Component):
    """Linear interpolation through ``(xs[i], vs[i])``, extended linearly past the ends."""

    xs: Any
    vs: Any
    kind = "pwa1d"
    n = 1

    def __post_init__(self):
        xs, vs = _vec(self.xs), _vec(self.vs)
        if xs.size < 2 or xs.size != vs.size or not (np.diff(xs) > 0).all():
            raise ValueError("need >= 2 strictly increasing breakpoints with matching values")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "vs", vs)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.vs) / np.diff(self.xs)

    @property
    def convex(self) -> bool:
        return bool((np.diff(self.slopes) >= -1e-12).all())

    def __call__(self, pts):
        t = np.asarray(pts, dtype=np.float64)[..., 0]
        s = self.slopes
        out = np.interp(t, self.xs, self.vs)
        out = np.where(t < self.xs[0], self.vs[0] + s[0] * (t - self.xs[0]), out)
        return np.where(t > self.xs[-1], self.vs[-1] + s[-1] * (t - self.xs[-1]), out)

    def lipschitz(self, lo, hi):
        return float(np.abs(self.slopes).max())

    def minimizer(self):
        if not self.convex:
            return None
        i = int(np.argmin(self.vs))
        return np.array([self.xs[i]])

    def to_json(self):
        return {"kind": self.kind, "xs": self.xs.tolist(), "vs": self.vs.tolist()}


@dataclass(frozen=True)
class Constant(Component):
    """Constant value (possibly ``+inf``); the base of custom tables."""

    value: float
    n: int = 1
    kind = "constant"

    def __post_init__(self):
        if self.value == -math.inf:
            raise ValueError("a constant -inf component is never proper")

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.full(pts.shape[:-1], float(self.value))

    def lipschitz(self, lo, hi):
        return 0.0

    def conjugate(self, y):
        return None

    def to_json(self):
        return {"kind": self.kind, "value": _json_num(self.value), "n": self.n}


_KINDS = {
    "quadratic": lambda p, n: Quadratic(p["Q"], p.get("b", 0.0), p.get("c", 0.0)),
    "norm": lambda p, n: ScaledNorm(float(p.get("alpha", 1.0)), p.get("p", 2), n),
    "indicator": lambda p, n: BoxIndicator(p["lo"], p["hi"], _num(p.get("boundary", 0.0))),
    "max_affine": lambda p, n: MaxAffine(p["A"], p.get("c", 0.0)),
    "pwa1d": lambda p, n: PiecewiseAffine1D(p["xs"], p["vs"]),
    "constant": lambda p, n: Constant(_num(p["value"]), n),
}


def component_from_json(data: dict, n: int) -> Component:
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown function kind {kind!r}; choose from {sorted(_KINDS)}")
    comp = _KINDS[kind]({k: v for k, v in data.items() if k != "kind"}, n)
    if comp.n != n:
        raise ValueError(f"{kind} component lives in R^{comp.n}, expected R^{n}")
    return comp


@dataclass(frozen=True)
class FunctionDescriptor:
    """Vector function ``x -> (f_0(x), ..., f_{d-1}(x))`` with optional overrides.

    ``overrides`` is a sequence of ``(point, per_atom_values)`` pairs replacing
    the component values exactly at those points; ``box`` is the domain box
    used for sampling-based searches.
    """

    components: tuple
    overrides: tuple = ()
    box: tuple | None = None
    _ov: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one component")
        n = comps[0].n
        for c in comps:
            if c.n != n:
                raise ValueError("components live in different dimensions")
        object.__setattr__(self, "components", comps)
        ov = []
        for point, vals in self.overrides:
            p = _vec(point)
            seq = vals if isinstance(vals, (list, tuple, np.ndarray)) else [vals]
            v = np.array([_num(t) for t in seq], dtype=np.float64)
            if v.size == 1:
                v = np.full(len(comps), v[0])
            if p.size != n or v.size != len(comps):
                raise ValueError(f"override at {p.tolist()} has the wrong shape")
            if (v == -math.inf).any():
                raise ValueError("override values must be > -inf")
            ov.append((p, v))
        object.__setattr__(self, "_ov", tuple(ov))
        if self.box is not None:
            lo, hi = _vec(self.box[0], n), _vec(self.box[1], n)
            object.__setattr__(self, "box", (lo, hi))

    @classmethod
    def of(cls, *components: Component, overrides=(), box=None) -> "FunctionDescriptor":
        return cls(tuple(components), tuple(overrides), box)

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return self.components[0].n

    @property
    def override_points(self) -> np.ndarray:
        if not self._ov:
            return np.empty((0, self.n))
        return np.stack([p for p, _ in self._ov])

    @property
    def convex_known(self) -> bool:
        """Convexity certified from the component kinds alone (no overrides)."""
        return not self._ov and all(c.convex for c in self.components)

    @property
    def lsc_known(self) -> bool:
        return not self._ov and all(c.lsc for c in self.components)

    def evaluate(self, pts) -> np.ndarray:
        """Values at ``pts`` of shape ``(N, n)``; returns ``(N, d)``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[-1] != self.n:
            raise ValueError(f"points in R^{pts.shape[-1]}, function on R^{self.n}")
        out = np.stack([c(pts) for c in self.components], axis=-1)
        for p, v in self._ov:
            hit = np.all(pts == p, axis=-1)
            out[hit] = v
        return out

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    def closure(self, pts) -> np.ndarray:
        """Lower semi-continuous hull ``min(f(x), liminf_{z -> x} f(z))`` at ``pts``.

        Overrides sit at isolated points, so the punctured liminf only sees
        the components.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        lim = np.stack([c.liminf(pts) for c in self.components], axis=-1)
        return np.minimum(self.evaluate(pts), lim)

    def lipschitz(self, lo, hi) -> np.ndarray:
        lo, hi = _vec(lo, self.n), _vec(hi, self.n)
        return np.array([c.lipschitz(lo, hi) for c in self.components])

    def conjugate(self, y) -> np.ndarray | None:
        """Exact conjugate ``(M, d)`` when every component has one and no overrides."""
        if self._ov:
            return None
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        cols = [c.conjugate(y) for c in self.components]
        if any(c is None for c in cols):
            return None
        return np.stack(cols, axis=-1)

    def restrict_atoms(self, atoms: Sequence[int]) -> "FunctionDescriptor":
        atoms = list(atoms)
        ov = tuple((p, v[atoms]) for p, v in self._ov)
        return FunctionDescriptor(tuple(self.components[k] for k in atoms), ov, self.box)

    def to_json(self) -> dict:
        out: dict = {"components": [c.to_json() for c in self.components]}
        if self._ov:
            out["overrides"] = [
                {"point": p.tolist(), "values": [_json_num(t) for t in v]} for p, v in self._ov
            ]
        if self.box is not None:
            out["box"] = [self.box[0].tolist(), self.box[1].tolist()]
        return out

    @classmethod
    def from_json(cls, data: dict, n: int, d: int) -> "FunctionDescriptor":
        comps = data["components"]
        if isinstance(comps, dict):
            comps = [comps] * d
        if len(comps) != d:
            raise ValueError(f"{len(comps)} components for {d} atoms")
        ov = [(o["point"], o["values"]) for o in data.get("overrides", [])]
        return cls(tuple(component_from_json(c, n) for c in comps), tuple(ov), data.get("box"))
