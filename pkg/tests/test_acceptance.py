"""The eleven acceptance criteria, each at its stated tolerance and size.

Each test records a one-line verdict that is printed at the end of the run.
"""
import itertools
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from condual.algebra import Condition, Partition, all_conditions
from condual.bochner import (
    FiniteMeasureSpace,
    L0Element,
    ess_sup_l0,
    iso_to_cond,
    l0_add,
    l0_norm,
    l0_pairing,
    l0_scale,
    lift,
    measure_algebra,
)
from condual.conjugate import (
    GridFunction,
    GridSpec,
    biconjugate,
    check_duality,
    conjugate_brute,
    conjugate_fast,
    sample,
    tol_disc,
    young_fenchel_slack,
)
from condual.functions import (
    BoxIndicator,
    Constant,
    FunctionDescriptor,
    PiecewiseAffine1D,
    Quadratic,
    ScaledNorm,
)
from condual.lsc import cond_extend, dominated_candidate, is_lsc_at
from condual.metric import METRICS, CondVector, as_step_value, embed, step_metric
from condual.pairing import DualPairConfig, pairing_c, sample_ball, separate
from condual.values import CondExtReal, CondReal, StepValue, concatenate, ess_sup, mul, restrict

ROOT = Path(__file__).resolve().parents[1]


# 1. Boolean algebra laws --------------------------------------------------

def _mask(a: Condition) -> int:
    return sum(1 << k for k in a.atoms)


def _law_failures(a, b, c, full, empty):
    ma, mb, mc = _mask(a), _mask(b), _mask(c)
    top = (1 << a.d) - 1
    checks = [
        _mask(a & b) == ma & mb,
        _mask(a | b) == ma | mb,
        _mask(~a) == top & ~ma,
        (a <= b) == (ma & ~mb == 0),
        (a & b) == (b & a),
        (a | b) == (b | a),
        ((a & b) & c) == (a & (b & c)),
        ((a | b) | c) == (a | (b | c)),
        (a & (a | b)) == a,
        (a | (a & b)) == a,
        (a & (b | c)) == ((a & b) | (a & c)),
        (a | (b & c)) == ((a | b) & (a | c)),
        (a | ~a) == full,
        (a & ~a) == empty,
        ~(a | b) == (~a & ~b),
        ~(a & b) == (~a | ~b),
    ]
    return checks.count(False)


def test_criterion_1_boolean_algebra_laws(record):
    start = time.perf_counter()
    bad = 0
    conds = all_conditions(3)
    full, empty = Condition.full(3), Condition.empty(3)
    for a, b, c in itertools.product(conds, repeat=3):
        bad += _law_failures(a, b, c, full, empty)
    exhaustive = len(conds) ** 3
    rng = np.random.default_rng(1)
    full, empty = Condition.full(16), Condition.empty(16)
    for _ in range(10_000):
        a, b, c = (Condition.of(np.flatnonzero(rng.random(16) < 0.5).tolist(), 16) for _ in range(3))
        bad += _law_failures(a, b, c, full, empty)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and exhaustive == 512 and elapsed < 5.0
    record(1, ok, f"{exhaustive} exhaustive + 10000 random triples, {bad} violations, {elapsed:.2f} s")
    assert bad == 0
    assert exhaustive == 512
    assert elapsed < 5.0


# 2. C1-C3 -------------------------------------------------------------------

def _random_value(rng, d, kind):
    if kind == "step":
        return StepValue(tuple(int(v) for v in rng.integers(0, 3, d)))
    if kind == "real":
        return CondExtReal(rng.choice([-np.inf, -1.0, 0.0, 2.5, np.inf], d))
    return CondVector(rng.integers(-1, 2, (d, 2)).astype(float))


def _random_cond(rng, d):
    return Condition.of(np.flatnonzero(rng.random(d) < 0.5).tolist(), d)


def _perturb(x, k):
    """``x`` changed on atom ``k`` only."""
    if isinstance(x, StepValue):
        v = list(x.per_atom)
        v[k] = v[k] + 1
        return StepValue(tuple(v))
    v = np.array(x.values)
    if isinstance(x, CondExtReal):
        v[k] = 7.0 if v[k] != 7.0 else 8.0
        return CondExtReal(v)
    v[k, 0] += 1.0
    return CondVector(v)


def test_criterion_2_conditional_set_axioms(record):
    rng = np.random.default_rng(2)
    kinds = ["step", "real", "vector"]
    bad = {"C1": 0, "C2": 0, "C3": 0}
    for i in range(1000):
        kind = kinds[i % 3]
        d = int(rng.integers(1, 9))
        x, y = _random_value(rng, d, kind), _random_value(rng, d, kind)
        a, b = _random_cond(rng, d), _random_cond(rng, d)
        # C1: equal restrictions carry equal conditions
        if restrict(x, b) == restrict(y, a) and a != b:
            bad["C1"] += 1
        if a != b and restrict(x, a) == restrict(x, b):
            bad["C1"] += 1
        if restrict(x, a) != restrict(x, a):
            bad["C1"] += 1
    for i in range(1000):
        kind = kinds[i % 3]
        d = int(rng.integers(1, 9))
        x = _random_value(rng, d, kind)
        b = _random_cond(rng, d)
        y = concatenate([b, ~b], [x, _random_value(rng, d, kind)])
        a = b & _random_cond(rng, d)
        if not (restrict(x, b) == restrict(y, b)) or not (restrict(x, a) == restrict(y, a)):
            bad["C2"] += 1
    for i in range(1000):
        kind = kinds[i % 3]
        d = int(rng.integers(1, 9))
        owner = rng.integers(0, int(rng.integers(1, d + 1)), d)
        p = Partition.of([np.flatnonzero(owner == j).tolist() for j in np.unique(owner)], d)
        xs = [_random_value(rng, d, kind) for _ in p.blocks]
        z = concatenate(p, xs)
        if any(restrict(z, blk) != restrict(x, blk) for blk, x in zip(p.blocks, xs)):
            bad["C3"] += 1
        for k in range(d):
            w = _perturb(z, k)
            if all(restrict(w, blk) == restrict(x, blk) for blk, x in zip(p.blocks, xs)):
                bad["C3"] += 1
    ok = sum(bad.values()) == 0
    record(2, ok, f"1000 cases each, violations {bad}")
    assert bad == {"C1": 0, "C2": 0, "C3": 0}


# 3. isometric embedding -------------------------------------------------------

def test_criterion_3_embedding_isometry(record):
    rng = np.random.default_rng(3)
    bad = 0
    for name in METRICS:
        for _ in range(1000):
            d, n = int(rng.integers(1, 9)), int(rng.integers(1, 4))
            pool = rng.standard_normal((4, n)) * 10.0 ** rng.integers(-3, 4)
            x = StepValue(tuple(tuple(pool[i]) for i in rng.integers(0, 4, d)))
            y = StepValue(tuple(tuple(pool[i]) for i in rng.integers(0, 4, d)))
            step = step_metric(x, y, name).values
            cond = step_metric(embed(x), embed(y), name).values
            bad += not np.array_equal(step, cond)
            zero = StepValue.constant(tuple([0.0] * n), d)
            bad += not np.array_equal(step_metric(x, zero, name).values,
                                      step_metric(embed(x), embed(zero), name).values)
    onto = 0
    for _ in range(1000):
        v = CondVector(rng.standard_normal((int(rng.integers(1, 9)), 3)))
        onto += embed(as_step_value(v)) != v
    ok = bad == 0 and onto == 0
    record(3, ok, f"{4 * 1000} pairs bitwise, {bad} mismatches; round-trip failures {onto}")
    assert bad == 0
    assert onto == 0


# 4. dual pair ---------------------------------------------------------------------

def test_criterion_4_dual_pair(record):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    W = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -0.3], [0.1, 0.0, 1.5]])
    configs = [
        DualPairConfig(3),
        DualPairConfig(3, primal_norm="l1"),
        DualPairConfig(3, primal_norm="linf"),
        DualPairConfig(3, weight=W),
    ]
    bilinear = 0.0
    for i in range(1000):
        cfg = configs[i % 4]
        d = int(rng.integers(1, 9))
        x, x2, y, y2 = (CondVector(rng.standard_normal((d, 3))) for _ in range(4))
        a, b = CondReal(rng.uniform(-1, 1, d)), CondReal(rng.uniform(-1, 1, d))
        lhs = pairing_c(x * a + x2 * b, y, cfg).values
        rhs = a.values * pairing_c(x, y, cfg).values + b.values * pairing_c(x2, y, cfg).values
        bilinear = max(bilinear, float(np.abs(lhs - rhs).max()))
        lhs = pairing_c(x, y * a + y2 * b, cfg).values
        rhs = a.values * pairing_c(x, y, cfg).values + b.values * pairing_c(x, y2, cfg).values
        bilinear = max(bilinear, float(np.abs(lhs - rhs).max()))
    bound = 0
    for i in range(1000):
        cfg = configs[i % 4]
        d = int(rng.integers(1, 9))
        x = CondVector(rng.standard_normal((d, 3)) * 10.0 ** rng.integers(-2, 3))
        y = CondVector(rng.standard_normal((d, 3)))
        p = np.abs(pairing_c(x, y, cfg).values)
        bound += int((p > cfg.primal(x.values) * cfg.dual(y.values)).sum())
    worst = math.inf
    for i in range(200):
        cfg = configs[i % 4]
        d = int(rng.integers(1, 5))
        xv = rng.standard_normal((d, 3)) * 3
        xv[rng.random(d) < 0.2] = 0.0  # some atoms off the support
        x = CondVector(xv)
        nx = cfg.primal(xv)
        r = np.where(nx > 0, rng.uniform(0.05, 0.95, d) * nx, 1.0)
        y, delta, a = separate(x, r, cfg)
        for k in a.sorted():
            z = sample_ball(xv[k], r[k] / 2, cfg.primal_norm, 10_000, rng)
            gap = float((cfg.pair(z, y.values[k]) - delta.values[k]).min())
            worst = min(worst, gap)
    elapsed = time.perf_counter() - start
    ok = bilinear <= 1e-12 and bound == 0 and worst >= -1e-12 and elapsed < 10.0
    record(4, ok, f"bilinearity {bilinear:.1e}, bound violations {bound}, "
                  f"min <z,y> - delta {worst:.2e}, {elapsed:.2f} s")
    assert bilinear <= 1e-12
    assert bound == 0
    assert worst >= -1e-12
    assert elapsed < 10.0


# 5. fast vs brute conjugation ----------------------------------------------------

def _random_convex_pl(rng, lo=-4.0, hi=4.0):
    k = int(rng.integers(2, 12))
    xs = np.sort(rng.uniform(lo, hi, k))
    xs = np.unique(np.round(xs, 6))
    if xs.size < 2:
        xs = np.array([lo / 2, hi / 2])
    slopes = np.sort(rng.uniform(-5, 5, xs.size - 1))
    vs = np.concatenate([[rng.uniform(-2, 2)], rng.uniform(-2, 2) + np.cumsum(slopes * np.diff(xs))])
    vs[1:] = vs[0] + np.cumsum(slopes * np.diff(xs))
    return PiecewiseAffine1D(xs, vs)


def _best_time(fn, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def test_criterion_5_fast_matches_brute(record):
    rng = np.random.default_rng(5)
    grid = GridSpec.uniform(-4.0, 4.0, 257)
    worst = 0.0
    for _ in range(200):
        comps = [_random_convex_pl(rng) for _ in range(4)]
        vals = FunctionDescriptor.of(*comps).evaluate(grid.nodes())
        # restrict some atoms to a random sub-interval so +inf plateaus occur
        x = grid.nodes()[:, 0]
        for k in range(4):
            if rng.random() < 0.3:
                a, b = np.sort(rng.uniform(-4, 4, 2))
                out = (x < a) | (x > b)
                if (~out).any():
                    vals[out, k] = np.inf
        f = GridFunction(grid, vals, claimed_convex=True, claimed_proper=True)
        R = float(rng.uniform(1, 8))
        dual = GridSpec.uniform(-R, R, 257)
        diff = np.abs(conjugate_fast(f, dual).values - conjugate_brute(f, dual).values)
        worst = max(worst, float(diff.max()))
    worst2 = 0.0
    g2 = GridSpec(((-2.0, 2.0, 33), (-1.5, 2.5, 29)))
    X = g2.nodes()
    for _ in range(20):
        cols = []
        for _k in range(4):
            p, q = _random_convex_pl(rng, -2, 2), _random_convex_pl(rng, -2, 2)
            cols.append(p(X[:, :1]) + float(rng.uniform(0.1, 2)) * 0.5 * X[:, 1] ** 2 + q(X[:, 1:]))
        f = GridFunction(g2, np.stack(cols, axis=-1), claimed_convex=True, claimed_proper=True)
        dual = GridSpec(((-6.0, 6.0, 31), (-7.0, 7.0, 35)))
        diff = np.abs(conjugate_fast(f, dual).values - conjugate_brute(f, dual).values)
        worst2 = max(worst2, float(diff.max()))
    big = GridSpec.uniform(-4.0, 4.0, 2049)
    comps = [Quadratic([[1.0]]), ScaledNorm(1.0, 2, 1), BoxIndicator([-1.0], [1.0]), _random_convex_pl(rng)]
    fb = sample(FunctionDescriptor.of(*comps), big)
    dual = GridSpec.uniform(-6.0, 6.0, 2049)
    t_fast = _best_time(lambda: conjugate_fast(fb, dual))
    t_brute = _best_time(lambda: conjugate_brute(fb, dual))
    speedup = t_brute / t_fast
    ok = worst <= 1e-9 and worst2 <= 1e-9 and speedup >= 10
    record(5, ok, f"1D max diff {worst:.1e}, 2D max diff {worst2:.1e}, speedup {speedup:.1f}x at N=M=2049")
    assert worst <= 1e-9
    assert worst2 <= 1e-9
    assert speedup >= 10


# 6 & 7. Fenchel-Moreau and Young-Fenchel ------------------------------------------

def _cases_6():
    """``(name, f, grid, dual, closed)``; ``closed(y)`` gives the exact conjugate and a
    mask of the dual nodes whose maximizer lies inside the primal box."""
    rng = np.random.default_rng(6)
    g1 = GridSpec.uniform(-2.0, 2.0, 257)
    d1 = GridSpec.uniform(-4.0, 4.0, 257)  # spacing 1/32: every kink slope below is a node
    qa, na, ic = (1.0, 0.5, 1.5, 1.0), (1.0, 0.5, 1.5, 2.0), (1.0, 0.5, 1.5, 1.0)
    quad = FunctionDescriptor.of(*[Quadratic([[a]]) for a in qa])
    absx = FunctionDescriptor.of(*[ScaledNorm(a, 2, 1) for a in na])
    ind = FunctionDescriptor.of(*[BoxIndicator([-c], [c]) for c in ic])
    Qs = []
    for _ in range(4):
        A = rng.standard_normal((2, 2))
        Qs.append(A @ A.T + 0.5 * np.eye(2))
    quad2 = FunctionDescriptor.of(*[Quadratic(Q) for Q in Qs])
    g2 = GridSpec.uniform(-2.0, 2.0, 65, 2)
    L2 = max(float(np.linalg.norm(Q, 2)) for Q in Qs) * 2 * math.sqrt(2) + 0.5
    d2 = GridSpec.uniform(-L2, L2, 65, 2)

    def quad_closed(y):
        t = y[:, 0]
        return (np.stack([0.5 * t**2 / a for a in qa], -1),
                np.stack([np.abs(t / a) <= 2.0 for a in qa], -1))

    def abs_closed(y):
        # on a bounded primal box the conjugate is finite; compare where it is 0
        t = np.abs(y[:, 0])
        return (np.zeros((len(t), 4)), np.stack([t <= a for a in na], -1))

    def ind_closed(y):
        t = np.abs(y[:, 0])
        return np.stack([c * t for c in ic], -1), np.ones((len(t), 4), dtype=bool)

    def quad2_closed(y):
        vals, ok = [], []
        for Q in Qs:
            x = np.linalg.solve(Q, y.T).T
            vals.append(0.5 * np.sum(y * x, axis=1))
            ok.append(np.all(np.abs(x) <= 2.0, axis=1))
        return np.stack(vals, -1), np.stack(ok, -1)

    return [
        ("1/2 x^2", quad, g1, d1, quad_closed),
        ("|x|", absx, g1, d1, abs_closed),
        ("indicator [-1,1]", ind, g1, d1, ind_closed),
        ("1/2 x^T Q x", quad2, g2, d2, quad2_closed),
    ]


def test_criteria_6_7_fenchel_moreau_and_young(record):
    start = time.perf_counter()
    rng = np.random.default_rng(66)
    lines, ok6, min_slack = [], True, math.inf
    for name, f, grid, dual, closed in _cases_6():
        tol = tol_disc(f, grid, dual)
        gf = sample(f, grid)
        fs = conjugate_fast(gf, dual)
        # the conjugate pair: grid conjugate vs closed form where the maximizer is in the box
        exact, valid = closed(dual.nodes())
        pair_err = float(np.abs(fs.values[valid] - exact[valid]).max())
        pair_ok = bool(pair_err <= tol.max())
        fss = biconjugate(gf, grid, dual).values
        v = gf.values
        same_pattern = np.array_equal(np.isinf(v), np.isinf(fss))
        both = np.isfinite(v) & np.isfinite(fss)
        bi = np.zeros(v.shape)
        bi[both] = np.abs(v[both] - fss[both])
        bi_ok = same_pattern and bool((bi.max(axis=0) <= tol).all())
        T = rng.uniform(grid.lo, grid.hi, (100, f.n))
        rep = check_duality(f, T, grid, dual, tol)
        res_ok = bool((rep.residual >= 0).all() and (rep.residual <= tol).all())
        slack = young_fenchel_slack(gf, fs)
        min_slack = min(min_slack, slack)
        ok6 &= pair_ok and bi_ok and res_ok
        lines.append(f"{name}: |f*-closed| {pair_err:.1e}, |f-f**| {bi.max():.1e}, residual [{rep.residual.min():.1e}, "
                     f"{rep.residual.max():.1e}] <= {tol.max():.1e}")
    elapsed = time.perf_counter() - start
    ok6 &= elapsed < 60
    record(6, ok6, "; ".join(lines) + f"; {elapsed:.1f} s")
    record(7, min_slack >= -1e-12, f"min slack {min_slack:.2e}")
    assert ok6
    assert min_slack >= -1e-12


# 8. lsc characterization --------------------------------------------------------

CATALOG_1D = [
    Quadratic([[1.0]]),
    Quadratic([[2.0]], [1.0], -0.5),
    ScaledNorm(1.0, 2, 1),
    ScaledNorm(0.5, 1, 1),
    BoxIndicator([-1.0], [1.0]),
    PiecewiseAffine1D([-1.0, 0.0, 2.0], [1.0, -0.5, 0.5]),
]


def test_criterion_8_lsc_characterization(record):
    grid = GridSpec.uniform(-2.0, 2.0, 129)
    dual = GridSpec.uniform(-4.0, 4.0, 129)
    bump = FunctionDescriptor.of(*[Constant(0.0, 1)] * 4, overrides=[([0.0], [1.0])])
    lsc_ok, gap = is_lsc_at(bump, [0.0])
    lsc_norm, gap_norm = is_lsc_at(bump, [0.0], variant="norm")
    tol = tol_disc(bump, grid, dual)
    rep = check_duality(bump, [[0.0]], grid, dual, tol)
    bump_ok = (not lsc_ok and not lsc_norm and np.array_equal(gap.values, np.ones(4))
               and np.array_equal(gap_norm.values, np.ones(4))
               and bool(np.all(np.abs(rep.residual - 1.0) <= tol)) and not rep.passed)
    f = FunctionDescriptor.of(*CATALOG_1D)
    pts = [[-1.0], [-0.3], [0.0], [0.7], [1.0], [1.9]]
    weak = [is_lsc_at(f, x)[0] for x in pts]
    norm = [is_lsc_at(f, x, variant="norm")[0] for x in pts]
    cat_rep = check_duality(f, pts, grid, dual, tol_disc(f, grid, dual))
    catalog_ok = all(weak) and all(norm) and cat_rep.passed
    agree = weak == norm
    ok = bump_ok and catalog_ok and agree
    record(8, ok, f"bump gap {gap.values.tolist()}, residual {rep.residual.ravel().tolist()}; "
                  f"catalog lsc {all(weak)}/{all(norm)}, duality {cat_rep.passed}")
    assert bump_ok
    assert catalog_ok
    assert agree


# 9. conditional extension ---------------------------------------------------------

def test_criterion_9_conditional_extension(record):
    rng = np.random.default_rng(9)
    grid = GridSpec.uniform(-2.0, 2.0, 257)
    f = FunctionDescriptor.of(*CATALOG_1D)
    tol = tol_disc(f, grid)
    ext_err = 0.0
    for x in rng.uniform(-2, 2, 100):
        got = cond_extend(f, CondVector.constant([x], f.d)).values
        want = f([x])
        same_inf = np.array_equal(np.isinf(got), np.isinf(want))
        fin = np.isfinite(want)
        ext_err = max(ext_err, float(np.abs(got[fin] - want[fin]).max()) if same_inf else math.inf)
    ext_ok = bool((ext_err <= tol).all())
    convex_bad = 0
    for _ in range(1000):
        lam = CondReal(rng.uniform(0, 1, f.d))
        x = CondVector(rng.uniform(-2, 2, (f.d, 1)))
        x2 = CondVector(rng.uniform(-2, 2, (f.d, 1)))
        mid = x * lam + x2 * CondReal(1 - lam.values)
        lhs = cond_extend(f, mid).values
        rhs = (mul(lam, cond_extend(f, x)) + mul(CondReal(1 - lam.values), cond_extend(f, x2))).values
        convex_bad += int((lhs > rhs + tol).sum())
    quad = FunctionDescriptor.of(Quadratic([[1.0]]), ScaledNorm(1.0, 2, 1), Quadratic([[2.0]], [0.5]))
    g, cgrid = dominated_candidate(quad, 0.5, [0.5], 0.75)
    nodes = cgrid.nodes()
    below, strict = 0, 0
    for _ in range(500):
        pts = nodes[rng.integers(0, len(nodes), quad.d)]
        if np.all(pts == pts[0]):
            continue
        xc = CondVector(pts)
        gc, fc = g(xc).values, cond_extend(quad, xc).values
        below += int((gc > fc + 1e-12).sum())
        strict += int((gc < fc - 1e-6).any())
    dom_ok = below == 0 and strict > 0
    ok = ext_ok and convex_bad == 0 and dom_ok
    record(9, ok, f"max |f_c - f| {ext_err:.1e}, convexity violations {convex_bad}/1000, "
                  f"candidate above f_c {below}, strictly below at {strict} points")
    assert ext_ok
    assert convex_bad == 0
    assert dom_ok


# 10. measure-space realization ----------------------------------------------------

def test_criterion_10_bochner_commuting_squares(record):
    rng = np.random.default_rng(10)
    space = FiniteMeasureSpace(("a", "b", "c", "d", "e"), (0.1, 0.4, 0.0, 0.3, 0.2))
    d, qmap = measure_algebra(space)
    bad = 0
    cfg = DualPairConfig(3)
    for _ in range(1000):
        x = L0Element(space, rng.standard_normal((5, 3)))
        y = L0Element(space, rng.standard_normal((5, 3)))
        s = L0Element(space, rng.standard_normal(5))
        xc, yc, sc = iso_to_cond(x), iso_to_cond(y), iso_to_cond(s)
        bad += not np.array_equal(iso_to_cond(l0_norm(x)).values, xc.norm().values)
        bad += iso_to_cond(l0_add(x, y)) != xc + yc
        bad += iso_to_cond(l0_scale(s, x)) != xc * sc
        bad += not np.array_equal(iso_to_cond(l0_pairing(x, y, cfg)).values, pairing_c(xc, yc, cfg).values)
        fam = [L0Element(space, rng.choice([-np.inf, -1.0, 0.5, 2.0, np.inf], 5)) for _ in range(3)]
        bad += iso_to_cond(ess_sup_l0(fam)) != ess_sup([iso_to_cond(e) for e in fam])
        bad += lift(space, xc) != x
        # null-point insensitivity
        raw = np.array(x.raw)
        raw[2] = rng.standard_normal(3) * 1e6
        x2 = L0Element(space, raw)
        bad += x2 != x or hash(x2) != hash(x)
        bad += iso_to_cond(l0_norm(x2)) != iso_to_cond(l0_norm(x))
        bad += iso_to_cond(l0_pairing(x2, y, cfg)) != iso_to_cond(l0_pairing(x, y, cfg))
    bad += qmap.condition({"c"}) != qmap.condition(set())
    ok = bad == 0 and d == 4
    record(10, ok, f"1000 cases on 5 points (1 null), {bad} mismatches")
    assert d == 4
    assert bad == 0


# 11. CLI determinism and exit codes -----------------------------------------------

def _cli(*args, cwd):
    env = dict(os.environ, CONDUAL_THREADS="1")
    return subprocess.run([sys.executable, "-m", "condual", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)


def _outputs(out: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


EXPECTED = {
    ("conjugate", "quadratic_1d.json"): 0,
    ("check-duality", "quadratic_1d.json"): 0,
    ("check-duality", "pair_d2.json"): 0,
    ("extend", "pair_d2.json"): 0,
    ("conjugate", "quadratic_2d.json"): 0,
    ("check-duality", "measure_space.json"): 0,
    ("check-lsc", "measure_space.json"): 0,
    ("check-duality", "nonlsc_bump.json"): 1,
    ("check-lsc", "nonlsc_bump.json"): 1,
    ("extend", "nonlsc_bump.json"): 3,
    ("conjugate", "improper.json"): 3,
    ("conjugate", "bad_schema.json"): 2,
}


def test_criterion_11_cli_determinism(record, tmp_path):
    problems = ROOT / "problems"
    bad = []
    for (verb, name), code in EXPECTED.items():
        runs = []
        for i in range(2):
            out = tmp_path / f"{verb}-{name}-{i}"
            res = _cli(verb, "--problem", str(problems / name), "--out", str(out), "--seed", "11", cwd=tmp_path)
            runs.append((res.returncode, _outputs(out)))
        if runs[0][0] != code or runs[1][0] != code:
            bad.append(f"{verb} {name}: exit {runs[0][0]} (want {code})")
        if runs[0][1] != runs[1][1]:
            bad.append(f"{verb} {name}: outputs differ")
        json.loads(runs[0][1]["report.json"])
    for i in range(2):
        res = _cli("selftest", "--out", str(tmp_path / f"self-{i}"), "--seed", "0", cwd=tmp_path)
        if res.returncode != 0:
            bad.append(f"selftest exit {res.returncode}")
    if _outputs(tmp_path / "self-0") != _outputs(tmp_path / "self-1"):
        bad.append("selftest outputs differ")
    record(11, not bad, f"{len(EXPECTED)} runs + selftest twice; problems: {bad or 'none'}")
    assert not bad


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
