"""Neighborhood-based lower semi-continuity and the conditional lsc extension.

Infima over weak neighborhoods are estimated from a finite candidate set
(structural points plus a seeded Halton prefix), so they are upper bounds of
the true infimum that can only decrease as the budget grows.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .algebra import Condition
from .conjugate import GridSpec, _envelope_atom, _in_hull
from .functions import FunctionDescriptor
from .metric import CondVector
from .pairing import DualPairConfig
from .values import CondExtReal

__all__ = [
    "NotConvexError",
    "WeakNeighborhood",
    "step_lift",
    "candidate_points",
    "lsc_value_weak",
    "lsc_value_ball",
    "geometric_schedule",
    "is_lsc_at",
    "cond_extend",
    "dominated_candidate",
]


class NotConvexError(ValueError):
    pass


def _as_tests(tests, d: int, n: int) -> tuple:
    if tests is None:
        return (np.eye(n),) * d
    tests = list(tests)
    if len(tests) == 0 or np.ndim(tests[0]) == 1:
        # one family shared by every atom
        tests = [tests] * d
    if len(tests) != d:
        raise ValueError(f"{len(tests)} test families for {d} atoms")
    out = []
    for t in tests:
        a = np.array(t, dtype=np.float64).reshape(-1, n) if len(t) else np.empty((0, n))
        a.flags.writeable = False
        out.append(a)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class WeakNeighborhood:
    """``{z : |<z - center, y_l>| <= radius for every test y_l}``, atom by atom.

    ``tests[k]`` is the (possibly empty) family of dual vectors on atom ``k``.
    """

    center: CondVector
    radius: CondExtReal
    tests: tuple
    config: DualPairConfig | None = None

    def __post_init__(self):
        r = self.radius if isinstance(self.radius, CondExtReal) else CondExtReal(
            np.broadcast_to(np.asarray(self.radius, dtype=np.float64), (self.center.d,)))
        if r.d != self.center.d:
            raise ValueError(f"radius over {r.d} atoms, center over {self.center.d}")
        if not (r.values > 0).all() or not r.is_finite:
            raise ValueError("radius must be finite and strictly positive")
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "tests", _as_tests(self.tests, self.center.d, self.center.n))

    @property
    def d(self) -> int:
        return self.center.d

    @property
    def n(self) -> int:
        return self.center.n

    def _pair(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        W = np.eye(self.n) if self.config is None else self.config.matrix
        return z @ W @ y.T

    def member_atom(self, k: int, pts: np.ndarray) -> np.ndarray:
        """Which rows of ``pts`` satisfy the atom-``k`` constraints."""
        pts = np.atleast_2d(pts)
        y = self.tests[k]
        if len(y) == 0:
            return np.ones(len(pts), dtype=bool)
        s = np.abs(self._pair(pts - self.center.values[k], y))
        return np.all(s <= self.radius.values[k] * (1 + 1e-12), axis=1)

    def membership(self, z: CondVector) -> Condition:
        """Atoms on which ``z`` lies in the neighborhood."""
        ok = [bool(self.member_atom(k, z.values[k])[0]) for k in range(self.d)]
        return Condition.of([k for k in range(self.d) if ok[k]], self.d)

    def __contains__(self, z: CondVector) -> bool:
        return self.membership(z).is_full


def step_lift(f: FunctionDescriptor, x) -> CondExtReal:
    """``f_s(sum x_i | a_i) = sum f(x_i) | a_i``: atom ``k`` takes component ``k``."""
    pts = x.values if isinstance(x, CondVector) else np.array(
        [np.asarray(v, dtype=np.float64).reshape(-1) for v in x.per_atom])
    if pts.shape != (f.d, f.n):
        raise ValueError(f"point of shape {pts.shape} for a function with d={f.d}, n={f.n}")
    # group equal block points so each distinct point is evaluated once
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    vals = f.evaluate(uniq)
    return CondExtReal(vals[inv.reshape(-1), np.arange(f.d)])


def _project_slabs(p: np.ndarray, c: np.ndarray, Y: np.ndarray, r: float) -> np.ndarray | None:
    """Euclidean projection of ``p`` onto ``{z : |<z - c, y_l>| <= r}`` for at most two tests."""
    best, best_dist = None, math.inf
    m = len(Y)
    for active in itertools.product(*[(None, -1.0, 1.0)] * m):
        rows = [(Y[l], s) for l, s in enumerate(active) if s is not None]
        if rows:
            A = np.stack([a for a, _ in rows])
            b = np.array([s * r + a @ c for a, s in rows])
            G = A @ A.T
            if abs(np.linalg.det(G)) < 1e-14 * max(1.0, float(np.abs(G).max())) ** len(rows):
                continue
            z = p - A.T @ np.linalg.solve(G, A @ p - b)
        else:
            z = p
        if np.all(np.abs((z - c) @ Y.T) <= r * (1 + 1e-9) + 1e-15):
            dist = float(np.linalg.norm(z - p))
            if dist < best_dist:
                best, best_dist = z, dist
    return best


def _minimizers(f: FunctionDescriptor, k: int) -> list:
    m = f.components[k].minimizer()
    return [] if m is None else [np.asarray(m, dtype=np.float64)]


def _halton(n: int, budget: int, seed: int) -> np.ndarray:
    if budget <= 0:
        return np.empty((0, n))
    return qmc.Halton(d=n, scramble=True, seed=seed).random(budget)


def candidate_points(f: FunctionDescriptor, V: WeakNeighborhood, k: int, budget: int = 256,
                     seed: int = 0) -> np.ndarray:
    """Candidate set on atom ``k``: center, slab endpoints, minimizer projections,
    override points and a Halton prefix of length ``budget`` scaled to the slab box.

    The Halton part is a prefix of one fixed sequence, so candidate sets are
    nested in ``budget``.
    """
    c = V.center.values[k]
    r = float(V.radius.values[k])
    Y = V.tests[k]
    W = np.eye(V.n) if V.config is None else V.config.matrix
    Yp = Y @ W.T  # pairing rows: <z, y> = z . (W y)
    pts = [c[None, :]]
    for y in Yp:
        nrm2 = float(y @ y)
        if nrm2 > 0:
            pts.append(np.stack([c + r * y / nrm2, c - r * y / nrm2]))
    for i in range(V.n):
        e = np.zeros(V.n)
        e[i] = 1.0
        pts.append(np.stack([c + r * e, c - r * e]))
    for m in _minimizers(f, k):
        pts.append(m[None, :])
        if 0 < len(Yp) <= 2:
            z = _project_slabs(m, c, Yp, r)
            if z is not None:
                pts.append(z[None, :])
    if len(f.override_points):
        pts.append(f.override_points)
    nrm = np.linalg.norm(Yp, axis=1) if len(Yp) else np.empty(0)
    half = r / nrm[nrm > 0].min() if (nrm > 0).any() else r
    u = _halton(V.n, budget, seed)
    pts.append(c + half * (2 * u - 1))
    P = np.vstack(pts)
    return P[V.member_atom(k, P)]


def lsc_value_weak(f: FunctionDescriptor, V: WeakNeighborhood, budget: int = 256, seed: int = 0,
                   points: np.ndarray | None = None) -> CondExtReal:
    """Upper estimate of ``inf {f_s(z) : z in V}``, atom by atom.

    With ``points`` given, the candidate set is exactly those points (plus the
    center) that lie in ``V``; sharing one point set between neighborhoods
    makes the estimates monotone under inclusion.
    """
    if f.d != V.d or f.n != V.n:
        raise ValueError("neighborhood and function disagree on d or n")
    out = np.empty(V.d)
    for k in range(V.d):
        if points is None:
            P = candidate_points(f, V, k, budget, seed)
        else:
            P = np.vstack([V.center.values[k][None, :], np.atleast_2d(points)])
            P = P[V.member_atom(k, P)]
        out[k] = f.evaluate(P)[:, k].min()
    return CondExtReal(out)


def lsc_value_ball(f: FunctionDescriptor, center: CondVector, radius, budget: int = 256,
                   seed: int = 0) -> CondExtReal:
    """Upper estimate of ``inf f`` over the closed Euclidean ball, atom by atom."""
    r = np.broadcast_to(np.asarray(getattr(radius, "values", radius), dtype=np.float64), (center.d,))
    out = np.empty(center.d)
    n = center.n
    u = _halton(n, budget, seed)
    # radial map of the cube onto the ball; keeps the prefix property in budget
    v = 2 * u - 1
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    box = np.abs(v).max(axis=1, keepdims=True)
    ball = np.divide(v * box, nrm, out=np.zeros_like(v), where=nrm > 0)
    for k in range(center.d):
        c = center.values[k]
        pts = [c[None, :], c + r[k] * np.vstack([np.eye(n), -np.eye(n)]), c + r[k] * ball]
        for m in _minimizers(f, k):
            dist = float(np.linalg.norm(m - c))
            pts.append((m if dist <= r[k] else c + (m - c) * (r[k] / dist))[None, :])
        if len(f.override_points):
            pts.append(f.override_points)
        P = np.vstack(pts)
        P = P[np.linalg.norm(P - c, axis=1) <= r[k] * (1 + 1e-12)]
        out[k] = f.evaluate(P)[:, k].min()
    return CondExtReal(out)


def geometric_schedule(r0: float = 1.0, ratio: float = 0.5, levels: int = 41) -> np.ndarray:
    return r0 * ratio ** np.arange(levels)


def _check_schedule(radii) -> np.ndarray:
    r = np.asarray(radii, dtype=np.float64).reshape(-1)
    if r.size == 0 or not (r > 0).all() or not (np.diff(r) < 0).all():
        raise ValueError("schedule radii must be positive and strictly decreasing")
    return r


def is_lsc_at(f: FunctionDescriptor, x, radii=None, tol: float = 1e-9, variant: str = "weak",
              tests=None, budget: int = 64, seed: int = 0):
    """Check ``f(x) = sup_r inf_{z in V_r} f(z)`` over a shrinking schedule.

    ``variant="weak"`` uses slab neighborhoods built from ``tests`` (default
    the coordinate vectors); ``variant="norm"`` uses closed Euclidean balls.
    Returns ``(verdict, gap)`` with ``gap = f(x) - sup_r value(r)`` per atom,
    taken as 0 where both sides are ``+inf``.
    """
    radii = _check_schedule(geometric_schedule() if radii is None else radii)
    xc = x if isinstance(x, CondVector) else CondVector.constant(x, f.d)
    best = np.full(f.d, -math.inf)
    for r in radii:
        if variant == "weak":
            V = WeakNeighborhood(xc, CondExtReal.constant(r, f.d), tests)
            val = lsc_value_weak(f, V, budget, seed)
        elif variant == "norm":
            val = lsc_value_ball(f, xc, r, budget, seed)
        else:
            raise ValueError(f"unknown lsc variant {variant!r}")
        best = np.maximum(best, val.values)
    fx = step_lift(f, xc).values
    both = (fx == math.inf) & (best == math.inf)
    with np.errstate(invalid="ignore"):
        gap = np.where(both, 0.0, fx - best)
    gap = CondExtReal(gap)
    return bool((gap.values <= tol).all()), gap


def _sample_points(f: FunctionDescriptor, extra: np.ndarray, count: int) -> np.ndarray:
    if f.box is not None:
        lo, hi = f.box
    else:
        allp = np.vstack([extra, f.override_points]) if len(f.override_points) else extra
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        pad = 0.5 * (hi - lo) + 1.0
        lo, hi = lo - pad, hi + pad
    grid = GridSpec(tuple((float(a), float(b), count) for a, b in zip(lo, hi)))
    parts = [grid.nodes(), extra]
    if len(f.override_points):
        parts.append(f.override_points)
    return np.unique(np.vstack(parts), axis=0)


def cond_extend(f: FunctionDescriptor, xc: CondVector, count: int | None = None,
                tol: float = 1e-8) -> CondExtReal:
    """``f_c(xc)``: atom ``k`` takes the closed convex envelope of ``f_k`` at ``xc_k``.

    For a convex ``f`` the closed convex envelope is the lower semi-continuous
    hull, which is exact for catalog components with point overrides.  With
    overrides, convexity is checked on exact samples over the descriptor box
    (plus the query and override points) and a violation raises
    :class:`NotConvexError`.
    """
    if xc.d != f.d or xc.n != f.n:
        raise ValueError(f"point of shape {xc.values.shape} for d={f.d}, n={f.n}")
    if not all(c.convex for c in f.components):
        raise NotConvexError("a component is not convex")
    if f.override_points.size:
        count = count or {1: 513, 2: 65, 3: 17}.get(f.n, 9)
        P = _sample_points(f, xc.values, count)
        F = f.evaluate(P)
        for k in range(f.d):
            fin = np.isfinite(F[:, k])
            if not fin.any():
                raise ValueError(f"component {k} is +inf on every sample; not proper")
            env = _envelope_atom(P[fin], F[fin, k], P[fin])
            if (np.abs(env - F[fin, k]) > tol * (1 + np.abs(F[fin, k]))).any():
                raise NotConvexError(f"component {k} is not convex on the sampled points")
            # +inf strictly inside the hull of the finite samples
            holes = ~fin & _in_hull(P[fin], P, 1e-12)
            if holes.any():
                raise NotConvexError(f"component {k} has a hole in its domain")
    uniq, inv = np.unique(xc.values, axis=0, return_inverse=True)
    out = CondExtReal(f.closure(uniq)[inv.reshape(-1), np.arange(f.d)])
    if (out.values == -math.inf).any():
        raise AssertionError("conditional extension of a proper convex function reached -inf")
    return out


def dominated_candidate(f: FunctionDescriptor, eps: float, bump_center, bump_width: float,
                        count: int = 257):
    """Atomwise closed convex hull of ``f - eps * bump`` as a function of conditional points.

    The bump is a nonnegative tent around ``bump_center``; the candidate is
    conditionally convex and lsc and lies below ``f`` at every grid node, so
    it must stay below ``f_c`` at conditional points whose atom points are
    nodes of the returned grid.  Returns ``(g, grid)``.
    """
    bc = np.asarray(bump_center, dtype=np.float64).reshape(-1)
    box = f.box
    if box is None:
        lo, hi = bc - 4 * bump_width - 4, bc + 4 * bump_width + 4
    else:
        lo, hi = box
    grid = GridSpec(tuple((float(a), float(b), count) for a, b in zip(lo, hi)))
    X = grid.nodes()
    bump = np.maximum(0.0, 1.0 - np.linalg.norm(X - bc, axis=1) / bump_width)
    F = f.evaluate(X) - eps * bump[:, None]

    def g(xc: CondVector) -> CondExtReal:
        out = np.empty(f.d)
        for k in range(f.d):
            fin = np.isfinite(F[:, k])
            out[k] = _envelope_atom(X[fin], F[fin, k], xc.values[k][None, :])[0]
        return CondExtReal(out)

    return g, grid
