"""Conditional extension of a finite-dimensional dual pair.

The base pair is ``(R^n, R^n, <x, y> = x^T W y)`` with a primal norm and the
compatible dual norm ``||y||_* = ||W y||_q`` where ``q`` is the dual exponent
of the primal norm, so ``|<x, y>| <= ||x|| ||y||_*`` holds by Hoelder.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraMismatchError, Condition, refine
from .metric import METRICS, CondVector
from .values import CondReal, StepValue

__all__ = [
    "SeparationError",
    "DualPairConfig",
    "DUAL_NORM",
    "pairing_s",
    "pairing_c",
    "norm_c",
    "dual_norm_c",
    "separate",
    "sample_ball",
]

DUAL_NORM = {"euclidean": "euclidean", "l1": "linf", "linf": "l1"}


class SeparationError(ValueError):
    """The exclusion ball around ``x`` reaches the origin on some atom."""


def _norm(kind: str, v: np.ndarray) -> np.ndarray:
    return METRICS[kind](v, np.zeros_like(v))


@dataclass(frozen=True)
class DualPairConfig:
    n: int
    weight: np.ndarray | None = None
    primal_norm: str = "euclidean"
    dual_norm: str | None = None
    check_samples: int = 256
    seed: int = 0
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.primal_norm not in DUAL_NORM:
            raise ValueError(f"unknown norm {self.primal_norm!r}")
        w = np.eye(self.n) if self.weight is None else np.array(self.weight, dtype=np.float64)
        if w.shape != (self.n, self.n):
            raise ValueError(f"pairing matrix must be {self.n}x{self.n}, got {w.shape}")
        w.flags.writeable = False
        object.__setattr__(self, "_w", w)
        if self.dual_norm is None:
            object.__setattr__(
                self, "dual_norm", "weighted" if self.weight is not None else DUAL_NORM[self.primal_norm]
            )
        if self.dual_norm != "weighted" and self.dual_norm not in DUAL_NORM:
            raise ValueError(f"unknown dual norm {self.dual_norm!r}")
        self._validate()

    @classmethod
    def from_key(cls, n: int, pairing: str = "dot", primal_norm: str = "euclidean",
                 dual_norm: str | None = None, weight=None) -> "DualPairConfig":
        if pairing == "dot":
            return cls(n, None, primal_norm, dual_norm)
        if pairing.startswith("weighted"):
            if weight is None:
                raise ValueError("weighted pairing needs a weight matrix")
            return cls(n, np.asarray(weight, dtype=np.float64), primal_norm, dual_norm)
        raise ValueError(f"unknown pairing {pairing!r}")

    @property
    def matrix(self) -> np.ndarray:
        return self._w

    def pair(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Base pairing on the last axis, broadcasting over leading axes."""
        if self.weight is None:
            return np.sum(x * y, axis=-1)
        return np.sum(x * (y @ self._w.T), axis=-1)

    def primal(self, x: np.ndarray) -> np.ndarray:
        return _norm(self.primal_norm, x)

    def dual(self, y: np.ndarray) -> np.ndarray:
        if self.dual_norm == "weighted":
            return _norm(DUAL_NORM[self.primal_norm], y @ self._w.T)
        return _norm(self.dual_norm, y)

    def _validate(self) -> None:
        rng = np.random.default_rng(self.seed)
        x = rng.standard_normal((self.check_samples, self.n))
        y = rng.standard_normal((self.check_samples, self.n))
        # include the coordinate directions, where l1/linf mismatches show up
        x = np.vstack([x, np.ones((1, self.n)), np.eye(self.n)])
        y = np.vstack([y, np.ones((1, self.n)), np.eye(self.n)])
        lhs = np.abs(self.pair(x, y))
        rhs = self.primal(x) * self.dual(y)
        if (lhs > rhs * (1 + 1e-12) + 1e-300).any():
            raise ValueError(
                f"norms {self.primal_norm}/{self.dual_norm} are not compatible with the pairing"
            )


_DEFAULT = None


def _cfg(config: DualPairConfig | None, n: int) -> DualPairConfig:
    global _DEFAULT
    if config is not None:
        if config.n != n:
            raise AlgebraMismatchError(f"config for n={config.n}, points in R^{n}")
        return config
    if _DEFAULT is None or _DEFAULT.n != n:
        _DEFAULT = DualPairConfig(n)
    return _DEFAULT


def pairing_s(x: StepValue, y: StepValue, config: DualPairConfig | None = None) -> CondReal:
    """Pairing of two step values, evaluated block by block on the common refinement."""
    if x.d != y.d:
        raise AlgebraMismatchError(f"step values over {x.d} and {y.d} atoms")
    px, vx = x.partition()
    py, vy = y.partition()
    bx, by = px.block_index(), py.block_index()
    out = np.empty(x.d)
    cfg = None
    for block in refine(px, py).blocks:
        k = min(block.atoms)
        a = np.asarray(vx[bx[k]], dtype=np.float64).reshape(-1)
        b = np.asarray(vy[by[k]], dtype=np.float64).reshape(-1)
        cfg = cfg or _cfg(config, a.size)
        out[list(block.atoms)] = cfg.pair(a, b)
    return CondReal(out)


def pairing_c(x: CondVector, y: CondVector, config: DualPairConfig | None = None) -> CondReal:
    if x.values.shape != y.values.shape:
        raise AlgebraMismatchError(f"shapes {x.values.shape} and {y.values.shape}")
    return CondReal(_cfg(config, x.n).pair(x.values, y.values))


def norm_c(x: CondVector, config: DualPairConfig | None = None) -> CondReal:
    return CondReal(_cfg(config, x.n).primal(x.values))


def dual_norm_c(y: CondVector, config: DualPairConfig | None = None) -> CondReal:
    return CondReal(_cfg(config, y.n).dual(y.values))


def _unit_maximizer(kind: str, x: np.ndarray) -> np.ndarray:
    """Rows ``u`` with dual norm 1 and ``x . u = ||x||`` (for nonzero rows)."""
    if kind == "euclidean":
        nrm = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.divide(x, nrm, out=np.zeros_like(x), where=nrm > 0)
    if kind == "l1":
        return np.sign(x)
    u = np.zeros_like(x)
    j = np.argmax(np.abs(x), axis=-1)
    rows = np.arange(x.shape[0])
    u[rows, j] = np.sign(x[rows, j])
    return u


def separate(x: CondVector, exclusion_radius, config: DualPairConfig | None = None):
    """Strongly separate the ball ``C_{r/2}(x)`` from the origin on ``support(x)``.

    Returns ``(y, delta, a)`` with ``a`` the atoms where ``x != 0`` and
    ``<z, y> >= delta > 0`` on ``a`` for every ``z`` with
    ``||z - x|| <= r/2``; ``y`` and ``delta`` vanish off ``a``.
    """
    cfg = _cfg(config, x.n)
    r = np.asarray(exclusion_radius.values if hasattr(exclusion_radius, "values") else exclusion_radius,
                   dtype=np.float64)
    r = np.broadcast_to(r, (x.d,))
    xv = x.values
    nx = cfg.primal(xv)
    support = nx > 0
    a = Condition.of(np.flatnonzero(support).tolist(), x.d)
    bad = support & ~((r > 0) & (r < nx))
    if bad.any():
        raise SeparationError(
            f"need 0 < radius < ||x|| on atoms {np.flatnonzero(bad).tolist()}"
        )
    u = _unit_maximizer(cfg.primal_norm, xv)
    y = u if cfg.weight is None else np.linalg.solve(cfg.matrix, u.T).T
    y = np.where(support[:, None], y, 0.0)
    delta = np.where(support, nx - r / 2, 0.0)
    return CondVector(y), CondReal(delta), a


def sample_ball(center: np.ndarray, radius: float, kind: str, count: int, rng) -> np.ndarray:
    """Points of the closed ``kind``-ball, half uniform inside and half on the sphere."""
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    n = center.size
    if kind == "euclidean":
        g = rng.standard_normal((count, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
    elif kind == "linf":
        g = rng.uniform(-1, 1, (count, n))
        j = rng.integers(0, n, count)
        g[np.arange(count), j] = np.sign(g[np.arange(count), j]) + (g[np.arange(count), j] == 0)
    elif kind == "l1":
        g = rng.exponential(size=(count, n)) * rng.choice([-1.0, 1.0], size=(count, n))
        g /= np.abs(g).sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown norm {kind!r}")
    scale = np.ones(count)
    half = count // 2
    scale[:half] = rng.uniform(0, 1, half) ** (1.0 / n)
    return center + radius * scale[:, None] * g
