import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capkit.choquet import (choquet_integral, dual_pairing_check, l1_norm, layer_cake,
                            sublinearity_report, superlevel_contents)
from capkit.content import dyadic_content
from capkit.grid import DiscreteMeasure, DyadicCube, DyadicSet, GridFunction, RootCube
from capkit.oracles import choquet_by_riemann

R13 = RootCube(1, 3)


def steps(size, levels=5):
    return st.lists(st.integers(0, levels), min_size=size, max_size=size).map(
        lambda v: np.array(v, dtype=float) / 2)


def test_two_layers():
    f = GridFunction(RootCube(1, 1), [2.0, 1.0])
    assert choquet_integral(f, 0.5) == pytest.approx(1.7071067811865475, abs=1e-15)


@pytest.mark.parametrize("beta", [0.3, 1.0])
def test_constant(beta):
    f = GridFunction(RootCube(1, 4, side=2.0), np.full(16, 3.0))
    assert choquet_integral(f, beta) == pytest.approx(3.0 * 2.0 ** beta)


def test_indicator_is_content():
    rng = np.random.default_rng(4)
    E = DyadicSet(RootCube(2, 3), rng.random(64) < 0.4)
    assert choquet_integral(E.indicator(), 1.2) == pytest.approx(dyadic_content(E, 1.2), abs=1e-15)


def test_negative_values_rejected():
    with pytest.raises(ValueError, match="l1_norm"):
        choquet_integral(GridFunction(RootCube(1, 1), [-1.0, 1.0]), 1.0)


def test_l1_norm_examples():
    root = RootCube(1, 1)
    assert l1_norm(GridFunction(root, [-1.0, 1.0]), 1.0) == 1.0
    assert l1_norm(GridFunction(root, [0.0, 0.0]), 0.5) == 0.0
    E = DyadicSet.from_leaves(R13, [0, 1])
    F = DyadicSet.from_leaves(R13, [6])
    f = GridFunction(R13, E.indicator().values - F.indicator().values)
    assert l1_norm(f, 0.5) == pytest.approx(dyadic_content(E | F, 0.5), abs=1e-15)


def test_cube_restriction():
    f = GridFunction(RootCube(1, 2), [4.0, 0, 0, 1.0])
    # relative to [1/2, 1): only the last leaf carries mass
    assert choquet_integral(f, 1.0, DyadicCube(1, (1,))) == pytest.approx(0.25)


def test_sublinearity_example():
    root = RootCube(1, 1)
    f, g = GridFunction(root, [2.0, 0.0]), GridFunction(root, [0.0, 2.0])
    assert choquet_integral(f.with_values(f.values + g.values), 0.5) == pytest.approx(2.0)
    assert choquet_integral(f, 0.5) + choquet_integral(g, 0.5) == pytest.approx(2.8284271247461903)
    assert sublinearity_report([(f, g)], 0.5)["passed"]


@settings(max_examples=40, deadline=None)
@given(v=steps(16), beta=st.floats(0.2, 2.0))
def test_riemann_oracle(v, beta):
    f = GridFunction(RootCube(2, 2), v)
    root = f.root

    def content_of(t):
        return dyadic_content(DyadicSet(root, v > t), beta)

    assert choquet_integral(f, beta) == pytest.approx(choquet_by_riemann(v, content_of), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(v=steps(8), beta=st.floats(0.2, 1.0))
def test_layer_cake_matches(v, beta):
    f = GridFunction(R13, v)
    lc = layer_cake(f, beta)
    assert np.all(np.diff(lc.thresholds) > 0)
    assert np.all(np.diff(lc.contents) <= 1e-15)
    for t, c in zip(lc.thresholds, lc.contents):
        assert c == pytest.approx(dyadic_content(DyadicSet(R13, v >= t), beta), abs=1e-15)
    assert lc.integral() == pytest.approx(choquet_integral(f, beta), rel=1e-12, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(a=steps(16), b=steps(16), beta=st.floats(0.2, 2.0))
def test_monotone_and_subadditive(a, b, beta):
    root = RootCube(2, 2)
    f, g = GridFunction(root, a), GridFunction(root, b)
    lo = GridFunction(root, np.minimum(a, b))
    assert choquet_integral(lo, beta) <= choquet_integral(f, beta) + 1e-12
    rep = sublinearity_report([(f, g)], beta, c=3.5)
    assert rep["passed"], rep["issues"]


@settings(max_examples=40, deadline=None)
@given(v=steps(16), beta=st.floats(0.2, 2.0), t=st.floats(0.01, 3.0))
def test_chebyshev(v, beta, t):
    f = GridFunction(RootCube(2, 2), v)
    assert superlevel_contents(f, beta, [t])[0] <= choquet_integral(f, beta) / t + 1e-12


def test_pairing_uniform_morrey_measure():
    root = RootCube(1, 4)
    nu = DiscreteMeasure(root, np.full(16, 1 / 16))
    rep = dual_pairing_check(GridFunction(root, np.ones(16)), nu, 1.0)
    assert rep["normalized"] and rep["ratio"] == pytest.approx(1.0)


def test_pairing_point_mass():
    root = RootCube(1, 3)
    side = root.leaf_side ** 0.5
    nu = DiscreteMeasure(root, np.eye(8)[2] * side)
    rep = dual_pairing_check(DyadicSet.from_leaves(root, [2]).indicator(), nu, 0.5)
    assert rep["ratio"] == pytest.approx(1.0)


def test_pairing_random_bounded():
    rng = np.random.default_rng(5)
    root = RootCube(1, 6)
    nu = DiscreteMeasure(root, rng.random(64))
    from capkit.potential import morrey_norm
    nu = nu.scaled(1 / morrey_norm(nu, 0.5).value)
    ratios = [dual_pairing_check(GridFunction(root, rng.random(64)), nu, 0.5)["ratio"]
              for _ in range(100)]
    assert np.isfinite(max(ratios)) and max(ratios) > 0
