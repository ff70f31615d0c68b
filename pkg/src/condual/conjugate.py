"""Discrete Legendre-Fenchel conjugation of vector-valued grid functions.

Values live on rectangular grids with one column per atom.  Conjugation is
atomwise: ``f*(y)_k = max_x <x, y> - f(x)_k`` over the primal nodes, where
``+inf`` nodes drop out of the max.  :func:`conjugate_brute` is the
``O(N M d)`` oracle; :func:`conjugate_fast` factors the max over the grid axes
and solves each one-dimensional problem with a lower hull and a monotone slope
search.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import Condition
from .functions import FunctionDescriptor
from .metric import CondVector
from .pairing import DualPairConfig
from .values import CondExtReal

__all__ = [
    "NotProperError",
    "GridSpec",
    "GridFunction",
    "sample",
    "conjugate_brute",
    "conjugate_fast",
    "conjugate",
    "biconjugate",
    "hull_mask",
    "tol_disc",
    "default_dual_grid",
    "young_fenchel_slack",
    "DualityReport",
    "check_duality",
    "is_lsc_convex",
    "convex_envelope",
    "lower_hull_1d",
    "write_grid_csv",
    "read_grid_csv",
    "MAX_DIM",
]

MAX_DIM = 3
ORACLE_TOL = 1e-9
ROUNDING = 1e-12


class NotProperError(ValueError):
    """A component is ``-inf`` somewhere or ``+inf`` on every node."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid, one ``(min, max, count)`` triple per axis."""

    axes: tuple

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(c)) for lo, hi, c in self.axes)
        if not axes:
            raise ValueError("a grid needs at least one axis")
        if len(axes) > MAX_DIM:
            raise ValueError(f"grids above {MAX_DIM} dimensions are not supported")
        for lo, hi, c in axes:
            if not lo < hi:
                raise ValueError(f"axis needs min < max, got [{lo}, {hi}]")
            if c < 2:
                raise ValueError(f"axis needs at least 2 nodes, got {c}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lo: float, hi: float, count: int, n: int = 1) -> "GridSpec":
        return cls(((lo, hi, count),) * n)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(c for _, _, c in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (c - 1) for lo, hi, c in self.axes])

    @property
    def lo(self) -> np.ndarray:
        return np.array([lo for lo, _, _ in self.axes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([hi for _, hi, _ in self.axes])

    def axis(self, i: int) -> np.ndarray:
        lo, hi, c = self.axes[i]
        return np.linspace(lo, hi, c)

    def nodes(self) -> np.ndarray:
        """All nodes in C order, shape ``(size, n)``; lexicographically sorted."""
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.n)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_json(self) -> list:
        return [[lo, hi, c] for lo, hi, c in self.axes]

    @classmethod
    def from_json(cls, data) -> "GridSpec":
        return cls(tuple(tuple(a) for a in data))


@dataclass(frozen=True)
class GridFunction:
    """Extended-real values ``(size, d)`` on a grid, nodes in C order."""

    grid: GridSpec
    values: np.ndarray
    claimed_convex: bool = False
    claimed_proper: bool = False
    tol_convex: float = 1e-9

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.size:
            raise ValueError(f"{v.shape[0]} values for a grid of {self.grid.size} nodes")
        if np.isnan(v).any():
            raise ValueError("NaN in grid function values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.claimed_proper:
            check_proper(self)
        if self.claimed_convex and not convex_along_lines(self, self.tol_convex).all():
            raise ValueError("values are not convex along grid lines")

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.grid.n

    def nodes(self) -> np.ndarray:
        return self.grid.nodes()

    def at(self, k: int) -> CondExtReal:
        """All atoms' values at node ``k``."""
        return CondExtReal(self.values[k])

    def restrict(self, a: Condition) -> "GridFunction":
        """Keep only the components on the atoms of ``a``."""
        if a.d != self.d:
            raise ValueError(f"condition over {a.d} atoms, function over {self.d}")
        return GridFunction(self.grid, self.values[:, a.sorted()], self.claimed_convex,
                            self.claimed_proper, self.tol_convex)


def check_proper(f: GridFunction) -> None:
    v = f.values
    if (v == -math.inf).any():
        raise NotProperError("a component takes the value -inf")
    dead = ~np.isfinite(v).any(axis=0)
    if dead.any():
        raise NotProperError(f"components {np.flatnonzero(dead).tolist()} are +inf on every node")


def convex_along_lines(f: GridFunction, tol: float = 1e-9) -> np.ndarray:
    """Per-atom verdict: second differences >= -tol along every grid line.

    A ``+inf`` node flanked by two finite nodes is a hole in the domain and
    counts as a violation; differences involving ``+inf`` otherwise pass.
    """
    ok = np.ones(f.d, dtype=bool)
    vals = f.values.reshape(f.grid.shape + (f.d,))
    for ax in range(f.n):
        v = np.moveaxis(vals, ax, 0)
        if v.shape[0] < 3:
            continue
        left, mid, right = v[:-2], v[1:-1], v[2:]
        fin = np.isfinite(left) & np.isfinite(mid) & np.isfinite(right)
        with np.errstate(invalid="ignore"):
            second = np.where(fin, left - 2 * mid + right, 0.0)
        scale = np.where(fin, 1 + np.abs(left) + np.abs(mid) + np.abs(right), 1.0)
        bad = second < -tol * scale
        hole = np.isinf(mid) & np.isfinite(left) & np.isfinite(right)
        bad |= hole
        ok &= ~bad.reshape(-1, f.d).any(axis=0)
    return ok


def sample(f: FunctionDescriptor, grid: GridSpec) -> GridFunction:
    if f.n != grid.n:
        raise ValueError(f"function on R^{f.n}, grid in R^{grid.n}")
    vals = f.evaluate(grid.nodes())
    proper = bool(np.isfinite(vals).any(axis=0).all() and not (vals == -math.inf).any())
    convex = f.convex_known or bool(convex_along_lines(GridFunction(grid, vals)).all())
    return GridFunction(grid, vals, claimed_convex=convex, claimed_proper=proper)


def _config(config: DualPairConfig | None, n: int) -> DualPairConfig:
    return config if config is not None else DualPairConfig(n)


def _pair_matrix(X: np.ndarray, Y: np.ndarray, config: DualPairConfig | None) -> np.ndarray:
    if config is None or config.weight is None:
        return X @ Y.T
    return X @ config.matrix @ Y.T


def _scattered_conjugate(X, F, Y, config=None, chunk_elems=1 << 22, want_argmax=False):
    """``max_i <X_i, Y_j> - F_ik`` for scattered points; ``+inf`` rows skipped."""
    N, d = F.shape
    M = Y.shape[0]
    out = np.full((M, d), -math.inf)
    arg = np.full((M, d), -1, dtype=np.intp)
    step = max(1, chunk_elems // max(N, 1))
    for s in range(0, M, step):
        S = _pair_matrix(X, Y[s : s + step], config)
        for k in range(d):
            fin = np.isfinite(F[:, k])
            if not fin.any():
                continue
            T = S[fin] - F[fin, k][:, None]
            j = np.argmax(T, axis=0)
            out[s : s + step, k] = T[j, np.arange(T.shape[1])]
            if want_argmax:
                arg[s : s + step, k] = np.flatnonzero(fin)[j]
    return (out, arg) if want_argmax else out


def conjugate_brute(f: GridFunction, dual_grid: GridSpec, config: DualPairConfig | None = None) -> GridFunction:
    """Oracle conjugate: explicit max over all primal nodes."""
    check_proper(f)
    if dual_grid.n != f.n:
        raise ValueError(f"dual grid in R^{dual_grid.n}, function on R^{f.n}")
    out = _scattered_conjugate(f.nodes(), f.values, dual_grid.nodes(), config)
    return GridFunction(dual_grid, out, claimed_convex=True, claimed_proper=True)


def lower_hull_1d(x: Sequence[float], v: Sequence[float]) -> list[int]:
    """Indices of the lower convex hull of ``(x_i, v_i)``, ``x`` strictly increasing."""
    hull: list[int] = []
    for i in range(len(x)):
        xi, vi = x[i], v[i]
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or above the chord from a to i
            if (v[b] - v[a]) * (xi - x[a]) >= (vi - v[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _llt_line(x: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-dimensional conjugate of ``v`` sampled at sorted ``x``, on all ``y``."""
    fin = np.isfinite(v)
    if not fin.any():
        return np.full(y.shape, -math.inf)
    xs, vs = x[fin], v[fin]
    h = lower_hull_1d(xs.tolist(), vs.tolist())
    hx, hv = xs[h], vs[h]
    if len(h) == 1:
        return hx[0] * y - hv[0]
    slopes = np.diff(hv) / np.diff(hx)
    # vertex i is optimal for slopes[i-1] <= y <= slopes[i]
    idx = np.searchsorted(slopes, y, side="left")
    return hx[idx] * y - hv[idx]


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CONDUAL_THREADS", "1") or 1)
    return max(1, threads)


def conjugate_fast(f: GridFunction, dual_grid: GridSpec, config: DualPairConfig | None = None,
                   threads: int | None = None) -> GridFunction:
    """Same quantity as :func:`conjugate_brute`, one grid axis at a time.

    ``sup_x <x, y> - f(x)`` splits as nested one-dimensional conjugates over a
    rectangular grid, so each axis costs ``O((N_axis + M_axis) log M_axis)`` per
    line.  Only diagonal pairing matrices keep the factorization.
    """
    check_proper(f)
    if dual_grid.n != f.n:
        raise ValueError(f"dual grid in R^{dual_grid.n}, function on R^{f.n}")
    scale = np.ones(f.n)
    if config is not None and config.weight is not None:
        W = config.matrix
        if not np.array_equal(W, np.diag(np.diag(W))):
            raise ValueError("the fast conjugate needs a diagonal pairing; use conjugate_brute")
        scale = np.diag(W).copy()

    def one_atom(k: int) -> np.ndarray:
        cur = f.values[:, k].reshape(f.grid.shape)
        # axes processed last to first; after each pass the primal axis is
        # replaced by the dual one
        for ax in range(f.n - 1, -1, -1):
            x = f.grid.axis(ax)
            y = dual_grid.axis(ax) * scale[ax]
            moved = np.moveaxis(cur, ax, -1)
            lines = moved.reshape(-1, moved.shape[-1])
            new = np.empty((lines.shape[0], y.size))
            for i, line in enumerate(lines):
                new[i] = _llt_line(x, line, y)
            new = np.moveaxis(new.reshape(moved.shape[:-1] + (y.size,)), -1, ax)
            cur = new if ax == 0 else -new
        return cur.reshape(-1)

    workers = _threads(threads)
    if workers > 1 and f.d > 1:
        with ThreadPoolExecutor(workers) as ex:
            cols = list(ex.map(one_atom, range(f.d)))
    else:
        cols = [one_atom(k) for k in range(f.d)]
    return GridFunction(dual_grid, np.stack(cols, axis=-1), claimed_convex=True, claimed_proper=True)


def conjugate(f: GridFunction, dual_grid: GridSpec, config: DualPairConfig | None = None,
              method: str = "fast", threads: int | None = None) -> GridFunction:
    if method == "brute":
        return conjugate_brute(f, dual_grid, config)
    if method == "fast":
        return conjugate_fast(f, dual_grid, config, threads)
    raise ValueError(f"unknown conjugation method {method!r}")


def _in_hull(P: np.ndarray, Q: np.ndarray, tol: float) -> np.ndarray:
    """Rows of ``Q`` within distance ``tol`` of the convex hull of the rows of ``P``."""
    c = P.mean(axis=0)
    D = P - c
    scale = max(1.0, float(np.abs(P).max()))
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    rank = int((s > 1e-10 * scale * max(1, len(P)) ** 0.5).sum())
    Qc = Q - c
    if rank == 0:
        return np.linalg.norm(Qc, axis=1) <= tol
    basis = vt[:rank]
    off = np.linalg.norm(Qc - (Qc @ basis.T) @ basis, axis=1) > tol
    p, q = D @ basis.T, Qc @ basis.T
    if rank == 1:
        inside = (q[:, 0] >= p[:, 0].min() - tol) & (q[:, 0] <= p[:, 0].max() + tol)
    else:
        from scipy.spatial import ConvexHull

        eq = ConvexHull(p).equations  # unit outward normals
        inside = np.all(q @ eq[:, :-1].T + eq[:, -1] <= tol, axis=1)
    return inside & ~off


def hull_mask(f: GridFunction, nodes: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """``(len(nodes), d)`` mask of nodes within ``tol`` of the convex hull of each ``dom f_k``."""
    X = f.nodes()
    out = np.zeros((nodes.shape[0], f.d), dtype=bool)
    for k in range(f.d):
        dom = X[np.isfinite(f.values[:, k])]
        if len(dom):
            out[:, k] = _in_hull(dom, nodes, tol)
    return out


def biconjugate(f: GridFunction, primal_grid: GridSpec | None = None, dual_grid: GridSpec | None = None,
                config: DualPairConfig | None = None, method: str = "fast") -> GridFunction:
    """Closed convex envelope of ``f`` on ``primal_grid`` via ``(f*)*``.

    A bounded dual grid can never produce ``+inf``; nodes outside the convex
    hull of the effective domain are therefore set to ``+inf`` explicitly.
    """
    primal_grid = primal_grid or f.grid
    dual_grid = dual_grid or default_dual_grid(f)
    fs = conjugate(f, dual_grid, config, method)
    fss = conjugate(fs, primal_grid, config, method).values.copy()
    fss[~hull_mask(f, primal_grid.nodes())] = math.inf
    return GridFunction(primal_grid, fss, claimed_convex=True, claimed_proper=True)


def default_dual_grid(f: GridFunction, count: int | None = None) -> GridSpec:
    """Symmetric dual box covering every finite-difference slope of ``f``, padded by one step."""
    vals = f.values.reshape(f.grid.shape + (f.d,))
    axes = []
    for ax in range(f.n):
        v = np.moveaxis(vals, ax, 0)
        h = f.grid.spacing[ax]
        fin = np.isfinite(v[1:]) & np.isfinite(v[:-1])
        with np.errstate(invalid="ignore"):
            s = np.where(fin, (v[1:] - v[:-1]) / h, np.nan)
        if np.isfinite(s).any():
            lo, hi = float(np.nanmin(s)), float(np.nanmax(s))
        else:
            lo, hi = 0.0, 0.0
        R = max(abs(lo), abs(hi), 1.0) + h
        c = count or f.grid.shape[ax]
        axes.append((-R, R, c))
    return GridSpec(tuple(axes))


def tol_disc(f: FunctionDescriptor, primal_grid: GridSpec, dual_grid: GridSpec | None = None,
             slack: float = ORACLE_TOL) -> np.ndarray:
    """Per-atom discretization tolerance ``L * h + 1e-9``.

    ``L`` is the component's Lipschitz constant on the primal box and ``h`` the
    largest node spacing of the primal and dual grids.
    """
    h = float(primal_grid.spacing.max())
    if dual_grid is not None:
        h = max(h, float(dual_grid.spacing.max()))
    return f.lipschitz(primal_grid.lo, primal_grid.hi) * h + slack


def young_fenchel_slack(f: GridFunction, fstar: GridFunction, config: DualPairConfig | None = None,
                        chunk_elems: int = 1 << 22) -> float:
    """``min f(x)_k + f*(y)_k - <x, y>`` over all node pairs and atoms with finite ``f``."""
    X, Y = f.nodes(), fstar.nodes()
    worst = math.inf
    step = max(1, chunk_elems // max(len(X), 1))
    for s in range(0, len(Y), step):
        S = _pair_matrix(X, Y[s : s + step], config)
        for k in range(f.d):
            fin = np.isfinite(f.values[:, k])
            slack = f.values[fin, k][:, None] + fstar.values[s : s + step, k][None, :] - S[fin]
            if slack.size:
                worst = min(worst, float(slack.min()))
    return worst


@dataclass
class DualityReport:
    """Residuals of the dual representation at a set of test points.

    ``residual[t, k] = f(x_t)_k - max_y (<x_t, y> - f*(y)_k)``; ``optimizer[t]``
    is the maximizing dual node on each atom, a step function in ``Y^d``.
    """

    test_points: np.ndarray
    values: np.ndarray
    residual: np.ndarray
    optimizer: np.ndarray
    tol: np.ndarray
    on_dual_boundary: np.ndarray
    status: np.ndarray = field(init=False)

    def __post_init__(self):
        r = self.residual
        scale = 1.0 + np.abs(np.where(np.isfinite(self.values), self.values, 0.0))
        st = np.full(r.shape, "PASS", dtype=object)
        st[r > self.tol[None, :]] = "FAIL"
        low = r < -ROUNDING * scale
        st[low] = "FAIL"
        st[r < -self.tol[None, :]] = "BUG"
        self.status = st

    @property
    def passed(self) -> bool:
        return bool((self.status == "PASS").all())

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    @property
    def min_residual(self) -> float:
        return float(self.residual.min())

    def worst(self) -> tuple[int, int]:
        t, k = np.unravel_index(int(np.argmax(self.residual)), self.residual.shape)
        return int(t), int(k)

    def optimizer_at(self, t: int) -> CondVector:
        return CondVector(self.optimizer[t])

    def summary(self) -> dict:
        t, k = self.worst()
        return {
            "passed": self.passed,
            "max_residual": _num(self.max_residual),
            "min_residual": _num(self.min_residual),
            "worst_point": self.test_points[t].tolist(),
            "worst_atom": k,
            "failures": int((self.status != "PASS").sum()),
            "bugs": int((self.status == "BUG").sum()),
            "optimizers_on_dual_boundary": int(self.on_dual_boundary.sum()),
        }


def _num(t: float):
    if t == math.inf:
        return "inf"
    if t == -math.inf:
        return "-inf"
    return float(t)


def _near_domain(f: FunctionDescriptor, T: np.ndarray, rel: float = 1e-7) -> np.ndarray:
    """``(len(T), d)``: some probe within ``rel * (1 + |x|)`` of ``x`` has finite ``f``."""
    n = T.shape[1]
    dirs = np.vstack([np.eye(n), -np.eye(n), np.ones((1, n)) / n**0.5, -np.ones((1, n)) / n**0.5])
    out = np.zeros((len(T), f.d), dtype=bool)
    for t, x in enumerate(T):
        rho = rel * (1.0 + float(np.abs(x).max()))
        probes = np.vstack([x, x + rho * dirs])
        out[t] = np.isfinite(f.evaluate(probes)).any(axis=0)
    return out


def check_duality(f: FunctionDescriptor, test_points, primal_grid: GridSpec, dual_grid: GridSpec,
                  tol=None, config: DualPairConfig | None = None, method: str = "fast") -> DualityReport:
    """Check ``f(x) = max_y <x, y> - f*(y)`` atomwise at each test point.

    ``f*`` is the discrete conjugate over the primal nodes together with the
    test points themselves, so Young's inequality holds exactly at every test
    point and a residual below ``-tol`` can only come from a conjugation bug.
    A residual above ``tol`` signals a failure of lower semi-continuity (or a
    dual grid that is too small; see ``on_dual_boundary``).
    """
    T = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    if T.shape[1] != f.n:
        raise ValueError(f"test points in R^{T.shape[1]}, function on R^{f.n}")
    gf = sample(f, primal_grid)
    check_proper(gf)
    Y = dual_grid.nodes()
    FT = f.evaluate(T)
    fstar = conjugate(gf, dual_grid, config, method).values
    fstar = np.maximum(fstar, _scattered_conjugate(T, FT, Y, config))
    S = _pair_matrix(T, Y, config)
    residual = np.empty(FT.shape)
    opt_idx = np.empty(FT.shape, dtype=np.intp)
    for k in range(f.d):
        terms = S - fstar[:, k][None, :]
        j = np.argmax(terms, axis=1)  # first maximizer = lexicographically smallest node
        best = terms[np.arange(len(T)), j]
        opt_idx[:, k] = j
        residual[:, k] = FT[:, k] - best
    # f(x) = +inf: the full dual sup is +inf as well when x lies off the closed
    # domain (residual inf - inf, read as 0) and finite on it (residual +inf)
    infinite = FT == math.inf
    if infinite.any():
        closure = hull_mask(gf, T, tol=1e-12) | _near_domain(f, T)
        residual[infinite & ~closure] = 0.0
        residual[infinite & closure] = math.inf
    if tol is None:
        tol = tol_disc(f, primal_grid, dual_grid)
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), (f.d,)).copy()
    optimizer = Y[opt_idx]  # (T, d, n)
    lo, hi = dual_grid.lo, dual_grid.hi
    boundary = np.any((optimizer <= lo) | (optimizer >= hi), axis=-1)
    return DualityReport(T, FT, residual, optimizer, tol, boundary)


def _envelope_atom(X: np.ndarray, v: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Lower convex envelope of points ``(X_i, v_i)`` evaluated at ``Q``; ``+inf`` off the hull."""
    out = np.full(len(Q), math.inf)
    inside = _in_hull(X, Q, 1e-12)
    if not inside.any():
        return out
    c = X.mean(axis=0)
    D = X - c
    scale = max(1.0, float(np.abs(X).max()))
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    basis = vt[: int((s > 1e-10 * scale * max(1, len(X)) ** 0.5).sum())]
    u, q = D @ basis.T, (Q[inside] - c) @ basis.T
    r = basis.shape[0]
    if r == 0:
        out[inside] = v.min()
        return out
    A = np.hstack([u, np.ones((len(u), 1))])
    coef = np.linalg.lstsq(A, v, rcond=None)[0]
    fit = A @ coef
    if np.abs(fit - v).max() <= 1e-12 * (1.0 + np.abs(v).max()):
        out[inside] = np.hstack([q, np.ones((len(q), 1))]) @ coef
        return out
    if r == 1:
        order = np.lexsort((v, u[:, 0]))
        uu, vv = u[order, 0], v[order]
        keep = np.r_[True, np.diff(uu) > 0]  # smallest value per abscissa
        uu, vv = uu[keep], vv[keep]
        h = lower_hull_1d(uu.tolist(), vv.tolist())
        out[inside] = np.interp(q[:, 0], uu[h], vv[h])
        return out
    from scipy.spatial import ConvexHull

    eq = ConvexHull(np.hstack([u, v[:, None]])).equations
    lower = eq[eq[:, r] < -1e-12]
    planes = -(q @ lower[:, :r].T + lower[:, r + 1]) / lower[:, r]
    out[inside] = planes.max(axis=1)
    return out


def convex_envelope(f: GridFunction, nodes: np.ndarray | None = None) -> np.ndarray:
    """Closed convex envelope of the sampled values, per atom, at ``nodes``.

    This is ``f**`` with the dual sup taken over all of ``R^n`` rather than a
    dual grid, computed from the lower hull of the lifted points, so it carries
    no truncation error.  Returns ``(len(nodes), d)``.
    """
    X = f.nodes()
    Q = X if nodes is None else np.atleast_2d(np.asarray(nodes, dtype=np.float64))
    out = np.empty((len(Q), f.d))
    for k in range(f.d):
        fin = np.isfinite(f.values[:, k])
        out[:, k] = _envelope_atom(X[fin], f.values[fin, k], Q)
    return out


def is_lsc_convex(f: GridFunction, tol: float = 1e-8):
    """Whether the sampled ``f`` equals its closed convex envelope on the grid.

    Returns ``(verdict, worst_node)`` where ``worst_node`` is the index of the
    node with the largest gap ``f - f**`` (a mismatch of ``+inf`` patterns
    counts as an infinite gap).  ``tol`` is relative to ``1 + |f|``.
    """
    check_proper(f)
    fss = convex_envelope(f)
    v = f.values
    pattern = np.isinf(v) != np.isinf(fss)
    fin = np.isfinite(v) & np.isfinite(fss)
    gap = np.zeros(v.shape)
    gap[fin] = np.abs(v[fin] - fss[fin]) / (1.0 + np.abs(v[fin]))
    gap[pattern] = math.inf
    per_node = gap.max(axis=1)
    worst = int(np.argmax(per_node))
    return bool(per_node[worst] <= tol), worst


def write_grid_csv(f: GridFunction, target=None) -> str:
    """RFC-4180 CSV: node coordinates ``x0..``, then ``f0..``; ``inf`` sentinels."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow([f"x{i}" for i in range(f.n)] + [f"f{k}" for k in range(f.d)])
    for node, row in zip(f.nodes(), f.values):
        w.writerow([repr(float(t)) for t in node] + [_csv_num(t) for t in row])
    text = buf.getvalue()
    if target is not None:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _csv_num(t: float) -> str:
    if t == math.inf:
        return "inf"
    if t == -math.inf:
        return "-inf"
    return repr(float(t))


def read_grid_csv(source, grid: GridSpec) -> GridFunction:
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("x"))
    if n != grid.n or len(body) != grid.size:
        raise ValueError("CSV does not match the grid")
    nodes = np.array([[float(t) for t in r[:n]] for r in body])
    if not np.allclose(nodes, grid.nodes()):
        raise ValueError("CSV node coordinates do not match the grid")
    vals = np.array([[float(t) for t in r[n:]] for r in body])
    return GridFunction(grid, vals)
