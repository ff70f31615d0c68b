import numpy as np
import pytest
from hypothesis import given, strategies as st

from condual.algebra import Condition
from condual.metric import CondVector
from condual.pairing import (
    DualPairConfig,
    SeparationError,
    dual_norm_c,
    norm_c,
    pairing_c,
    pairing_s,
    sample_ball,
    separate,
)
from condual.values import CondReal, StepValue

coords = st.floats(-100, 100, allow_nan=False)


def vectors(d, n):
    return st.lists(st.lists(coords, min_size=n, max_size=n), min_size=d, max_size=d).map(
        lambda v: CondVector(np.array(v)))


def test_pairing_example():
    x = CondVector([[1.0, 0.0], [0.0, 1.0]])
    y = CondVector([[2.0, 3.0], [4.0, 5.0]])
    assert pairing_c(x, y) == CondReal([2.0, 5.0])
    xs = StepValue(((1.0, 0.0), (0.0, 1.0)))
    ys = StepValue(((2.0, 3.0), (4.0, 5.0)))
    assert pairing_s(xs, ys) == CondReal([2.0, 5.0])


def test_weighted_pairing():
    W = np.diag([2.0, 3.0])
    cfg = DualPairConfig.from_key(2, "weighted", weight=W)
    x = CondVector([[1.0, 1.0]])
    y = CondVector([[1.0, 2.0]])
    assert pairing_c(x, y, cfg) == CondReal([8.0])
    assert cfg.dual_norm == "weighted"
    np.testing.assert_allclose(dual_norm_c(y, cfg).values, [np.hypot(2.0, 6.0)])


def test_incompatible_norms_rejected():
    with pytest.raises(ValueError):
        DualPairConfig(2, primal_norm="linf", dual_norm="linf")
    with pytest.raises(ValueError):
        DualPairConfig.from_key(2, "weighted")
    assert DualPairConfig(3, primal_norm="l1").dual_norm == "linf"


@given(st.integers(1, 4).flatmap(lambda d: st.tuples(vectors(d, 3), vectors(d, 3), vectors(d, 3))),
       st.floats(-10, 10), st.floats(-10, 10))
def test_bilinear(t, a, b):
    x, z, y = t
    lhs = pairing_c(a * x + b * z, y).values
    rhs = a * pairing_c(x, y).values + b * pairing_c(z, y).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-6)


@given(st.integers(1, 4).flatmap(lambda d: st.tuples(vectors(d, 2), vectors(d, 2))),
       st.sampled_from(["euclidean", "l1", "linf"]))
def test_continuity_estimate(t, kind):
    x, y = t
    cfg = DualPairConfig(2, primal_norm=kind)
    lhs = np.abs(pairing_c(x, y, cfg).values)
    rhs = norm_c(x, cfg).values * dual_norm_c(y, cfg).values
    assert (lhs <= rhs * (1 + 1e-12) + 1e-9).all()


def test_separate_example():
    y, delta, a = separate(CondVector([[2.0], [0.0]]), 1.0)
    assert a == Condition.of([0], 2)
    assert y == CondVector([[1.0], [0.0]])
    assert delta == CondReal([1.5, 0.0])
    _, _, a0 = separate(CondVector([[0.0]]), 1.0)
    assert a0 == Condition.empty(1)
    with pytest.raises(SeparationError):
        separate(CondVector([[1.0]]), 2.0)


@given(st.integers(1, 3).flatmap(lambda d: vectors(d, 2)), st.sampled_from(["euclidean", "l1", "linf"]))
def test_separation_holds_on_ball(x, kind):
    cfg = DualPairConfig(2, primal_norm=kind)
    nx = norm_c(x, cfg).values
    r = np.where(nx > 0, nx / 2, 1.0)
    y, delta, a = separate(x, CondReal(r), cfg)
    rng = np.random.default_rng(0)
    for k in a.atoms:
        z = sample_ball(x.values[k], r[k] / 2, kind, 64, rng)
        assert (cfg.pair(z, y.values[k]) >= delta.values[k] - 1e-9 * (1 + nx[k])).all()
        assert delta.values[k] > 0


def test_pairing_separates_points():
    # <x, y> = <x', y> for all y forces x = x'; a single coordinate probe shows the difference
    x = CondVector([[1.0, 2.0], [3.0, 4.0]])
    for k in range(2):
        for j in range(2):
            bumped = x.values.copy()
            bumped[k, j] += 1e-6
            e = np.zeros((2, 2))
            e[:, j] = 1.0
            diff = pairing_c(CondVector(bumped), CondVector(e)).values - pairing_c(x, CondVector(e)).values
            assert diff[k] != 0
