"""Seeded property suites shared by ``condual selftest``."""
from __future__ import annotations

import itertools

import numpy as np

from .algebra import Condition, Partition, all_conditions
from .conjugate import GridSpec, conjugate_fast, sample, young_fenchel_slack
from .functions import BoxIndicator, FunctionDescriptor, MaxAffine, Quadratic, ScaledNorm
from .metric import METRICS, as_step_value, embed, step_metric
from .values import StepValue, concatenate, restrict

__all__ = ["algebra_law_violations", "algebra_laws", "c1", "c2", "c3", "isometry", "young_fenchel", "run_all"]


def algebra_law_violations(a: Condition, b: Condition, c: Condition) -> list[str]:
    full, empty = Condition.full(a.d), Condition.empty(a.d)
    laws = {
        "meet-commutative": (a & b) == (b & a),
        "join-commutative": (a | b) == (b | a),
        "meet-associative": ((a & b) & c) == (a & (b & c)),
        "join-associative": ((a | b) | c) == (a | (b | c)),
        "absorption-meet": (a & (a | b)) == a,
        "absorption-join": (a | (a & b)) == a,
        "distributive-meet": (a & (b | c)) == ((a & b) | (a & c)),
        "distributive-join": (a | (b & c)) == ((a | b) & (a | c)),
        "complement-join": (a | ~a) == full,
        "complement-meet": (a & ~a) == empty,
        "involution": ~~a == a,
        "de-morgan": ~(a & b) == (~a | ~b),
        "identity": (a & full) == a and (a | empty) == a,
        "order": (a <= b) == ((a & b) == a),
    }
    return [name for name, ok in laws.items() if not ok]


def _random_condition(rng, d: int) -> Condition:
    return Condition.of(np.flatnonzero(rng.random(d) < 0.5).tolist(), d)


def algebra_laws(seed: int = 0, d_exhaustive: int = 3, d_random: int = 16, cases: int = 10_000) -> dict:
    bad = 0
    conds = all_conditions(d_exhaustive)
    for a, b, c in itertools.product(conds, repeat=3):
        bad += bool(algebra_law_violations(a, b, c))
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        a, b, c = (_random_condition(rng, d_random) for _ in range(3))
        bad += bool(algebra_law_violations(a, b, c))
    return {"cases": len(conds) ** 3 + cases, "violations": bad}


def _random_step(rng, d: int, levels: int = 3) -> StepValue:
    return StepValue(tuple(int(v) for v in rng.integers(0, levels, d)))


def c1(seed: int = 0, cases: int = 1000) -> dict:
    """Equal restrictions force equal conditions."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        x, y = _random_step(rng, d), _random_step(rng, d)
        a, b = _random_condition(rng, d), _random_condition(rng, d)
        if restrict(x, b) == restrict(y, a) and a != b:
            bad += 1
        if a != b and restrict(x, a) == restrict(x, b):
            bad += 1
    return {"cases": cases, "violations": bad}


def c2(seed: int = 0, cases: int = 1000) -> dict:
    """Agreement on ``b`` passes down to every ``a <= b``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        x = _random_step(rng, d)
        b = _random_condition(rng, d)
        other = _random_step(rng, d)
        y = concatenate([b, ~b], [x, other])
        a = b & _random_condition(rng, d)
        if restrict(x, b) != restrict(y, b) or restrict(x, a) != restrict(y, a):
            bad += 1
    return {"cases": cases, "violations": bad}


def c3(seed: int = 0, cases: int = 1000) -> dict:
    """Concatenation matches every piece, and no other value does."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        owner = rng.integers(0, int(rng.integers(1, d + 1)), d)
        p = Partition.of([np.flatnonzero(owner == i).tolist() for i in np.unique(owner)], d)
        xs = [_random_step(rng, d) for _ in p.blocks]
        z = concatenate(p, xs)
        if any(restrict(z, blk) != restrict(x, blk) for blk, x in zip(p.blocks, xs)):
            bad += 1
        # uniqueness: changing z on any single atom breaks some block
        for k in range(d):
            w = list(z.per_atom)
            w[k] = w[k] + 1
            w = StepValue(tuple(w))
            if all(restrict(w, blk) == restrict(x, blk) for blk, x in zip(p.blocks, xs)):
                bad += 1
    return {"cases": cases, "violations": bad}


def isometry(seed: int = 0, cases: int = 1000) -> dict:
    rng = np.random.default_rng(seed)
    bad = 0
    for name in METRICS:
        for _ in range(cases):
            d, n = int(rng.integers(1, 9)), int(rng.integers(1, 4))
            pool = rng.standard_normal((3, n)) * 10.0
            x = StepValue(tuple(tuple(pool[i]) for i in rng.integers(0, 3, d)))
            y = StepValue(tuple(tuple(pool[i]) for i in rng.integers(0, 3, d)))
            lhs = step_metric(x, y, name).values
            rhs = step_metric(embed(x), embed(y), name).values
            if not np.array_equal(lhs, rhs):
                bad += 1
            if as_step_value(embed(x)) != x or embed(as_step_value(embed(y))) != embed(y):
                bad += 1
    return {"cases": cases * len(METRICS), "violations": bad}


def young_fenchel(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    f = FunctionDescriptor.of(
        Quadratic([[1.0]], [0.0], 0.0),
        ScaledNorm(1.0, 2, 1),
        BoxIndicator([-1.0], [1.0]),
        MaxAffine(rng.standard_normal((5, 1)), rng.standard_normal(5)),
    )
    g = sample(f, GridSpec.uniform(-3.0, 3.0, 257))
    fs = conjugate_fast(g, GridSpec.uniform(-4.0, 4.0, 257))
    slack = young_fenchel_slack(g, fs)
    return {"cases": 257 * 257 * 4, "violations": int(slack < -1e-12), "min_slack": slack}


def run_all(seed: int = 0) -> list[dict]:
    suites = [
        ("algebra-laws", algebra_laws),
        ("C1", c1),
        ("C2", c2),
        ("C3", c3),
        ("isometry", isometry),
        ("young-fenchel", young_fenchel),
    ]
    out = []
    for name, fn in suites:
        res = fn(seed=seed)
        out.append({"name": name, "status": "PASS" if res["violations"] == 0 else "FAIL", **res})
    return out
