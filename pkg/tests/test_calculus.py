import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capkit.calculus import (CubeFamily, PostconditionError, antichain_table, cz_check,
                             cz_decompose, density_curve, differentiation_check, maximal_function,
                             measure_packing_constant, melnikov_select, ov_postconditions,
                             packing_integral_check, weak_type_check, _random_family)
from capkit.choquet import choquet_integral
from capkit.grid import DyadicCube, DyadicSet, GridError, GridFunction, RootCube, restrict
from capkit.oracles import brute_content, choquet_by_riemann


def fam(d, n, cubes):
    return CubeFamily(RootCube(d, n), tuple(DyadicCube(m, tuple(i)) for m, i in cubes))


def oracle_average(f, c, beta):
    """Normalized integral over ``c`` from exhaustive covers and a Riemann sum in t."""
    g = restrict(f, c)
    v = np.abs(g.values)
    n = g.root.n
    return choquet_by_riemann(v, lambda t: brute_content(v > t, g.root.d, n, beta), oversample=2)


def oracle_maximal(f, beta):
    r = f.root
    out = np.zeros(r.shape)
    for leaf in np.ndindex(*r.shape):
        c = DyadicCube(r.n, leaf)
        out[leaf] = max(oracle_average(f, c.ancestor(m), beta) for m in range(r.n + 1))
    return out.reshape(-1)


# -- covering selection ---------------------------------------------------------

def test_single_cube_family():
    F = fam(1, 3, [(1, (1,))])
    sel = melnikov_select(F, 0.5)
    assert list(sel.subfamily) == list(F) and len(sel.ancestors) == 0


def test_all_leaves_heavy_root():
    sel = melnikov_select(fam(1, 2, [(2, (i,)) for i in range(4)]), 0.5)
    assert len(sel.subfamily) == 0
    assert list(sel.ancestors) == [DyadicCube(0, (0,))]


def test_sparse_leaves_no_ancestor():
    F = fam(1, 2, [(2, (0,)), (2, (3,))])
    sel = melnikov_select(F, 1.0)
    assert list(sel.subfamily) == list(F) and len(sel.ancestors) == 0


def test_overlapping_family_rejected():
    with pytest.raises(GridError, match="disjoint"):
        fam(1, 3, [(1, (0,)), (2, (1,))])


@pytest.mark.parametrize("d,n,beta", [(1, 6, 0.5), (1, 6, 1.0), (2, 4, 0.5), (2, 4, 1.3)])
def test_postconditions_random(d, n, beta):
    rng = np.random.default_rng(d * 100 + int(beta * 10))
    root = RootCube(d, n)
    for _ in range(200):
        F = CubeFamily(root, tuple(_random_family(root, rng, rng.uniform(0.05, 0.5))))
        sel = melnikov_select(F, beta)
        assert not ov_postconditions(F, sel, beta)
        assert sel.packing_constant_observed <= 2 * (1 + 1e-12)


def test_checker_detects_bad_selection():
    # an empty selection leaves members uncovered; keeping all eight leaves over-packs
    F = fam(1, 3, [(3, (i,)) for i in range(8)])
    good = melnikov_select(F, 0.2)
    none = CubeFamily(F.root, ())
    bad = type(good)(none, none, 0.0)
    assert any(p.startswith("(1)") for p in ov_postconditions(F, bad, 0.2))
    bad = type(good)(F, none, 0.0)
    assert any(p.startswith("(2)") for p in ov_postconditions(F, bad, 0.2))
    assert issubclass(PostconditionError, AssertionError)


def test_packing_ratio_examples():
    root = RootCube(1, 1)
    sel = melnikov_select(fam(1, 1, [(1, (0,)), (1, (1,))]), 1.0)
    assert packing_integral_check(sel, GridFunction(root, [1.0, 1.0]), 1.0) == pytest.approx(1.0)
    # at beta = 0.5 the two leaves are heavy for the root; compare sums directly
    two = CubeFamily(root, (DyadicCube(1, (0,)), DyadicCube(1, (1,))))
    f = GridFunction(root, [1.0, 1.0])
    num = sum(choquet_integral(f, 0.5, c) for c in two)
    assert num / choquet_integral(f, 0.5) == pytest.approx(2 * 2 ** -0.5)
    single = melnikov_select(fam(1, 3, [(1, (1,))]), 0.5)
    assert packing_integral_check(single, GridFunction(RootCube(1, 3), np.arange(8.0)), 0.5) == pytest.approx(1.0)


def test_antichain_count_d2_depth2():
    lev, sums = antichain_table(2, 2, 2.0)
    # with beta = d every antichain packs; 1 root + (1 + 16 + ... ) combos
    kid = 1 + 1 + 2 ** 4 - 1           # empty, the child itself, nonempty leaf subsets
    assert len(sums) == 1 + kid ** 4 - 1


def test_packing_constant_values():
    rng = np.random.default_rng(0)
    assert measure_packing_constant(1, 0.5, 4, rng, trials=50)["cprime"] == pytest.approx(2.0)
    assert measure_packing_constant(2, 2.0, 3, rng, trials=20)["cprime"] == pytest.approx(1.0)


# -- maximal function -------------------------------------------------------------

def test_maximal_example():
    f = GridFunction(RootCube(1, 2), [4.0, 0, 0, 0])
    assert list(maximal_function(f, 1.0).values) == pytest.approx([4, 2, 1, 1])


def test_maximal_constant():
    f = GridFunction(RootCube(2, 3), np.full(64, 2.5))
    assert np.allclose(maximal_function(f, 0.7).values, 2.5)


@settings(max_examples=20, deadline=None)
@given(v=st.lists(st.integers(0, 4), min_size=8, max_size=8), beta=st.sampled_from([0.4, 1.0]))
def test_maximal_oracle_d1(v, beta):
    f = GridFunction(RootCube(1, 3), np.array(v, dtype=float))
    assert np.allclose(maximal_function(f, beta).values, oracle_maximal(f, beta), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(v=st.lists(st.integers(0, 3), min_size=16, max_size=16), beta=st.sampled_from([0.8, 1.6]))
def test_maximal_oracle_d2(v, beta):
    f = GridFunction(RootCube(2, 2), np.array(v, dtype=float))
    assert np.allclose(maximal_function(f, beta).values, oracle_maximal(f, beta), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(m=st.lists(st.booleans(), min_size=16, max_size=16), beta=st.floats(0.2, 2.0))
def test_maximal_dominates_indicator(m, beta):
    E = DyadicSet(RootCube(2, 2), np.array(m))
    assert np.all(maximal_function(E.indicator(), beta).values >= E.mask)


def test_weak_type_examples():
    f = GridFunction(RootCube(1, 2), [4.0, 0, 0, 0])
    rep = weak_type_check(f, 1.0, 1.5)
    assert rep["lhs"] == pytest.approx(0.5)
    assert rep["rhs_over_cprime"] == pytest.approx(2 / 3)
    assert rep["ratio"] == pytest.approx(0.75)
    assert weak_type_check(f, 1.0, 5.0)["lhs"] == 0.0
    one = GridFunction(RootCube(1, 2), np.ones(4))
    assert weak_type_check(one, 1.0, 0.5)["ratio"] <= 2


@settings(max_examples=30, deadline=None)
@given(v=st.lists(st.floats(0, 5), min_size=64, max_size=64), beta=st.sampled_from([0.5, 1.0]))
def test_weak_type_bounded_by_packing(v, beta):
    f = GridFunction(RootCube(1, 6), np.array(v))
    if f.values.max() == 0:
        return
    assert weak_type_check(f, beta)["ratio"] <= 2.0 + 1e-12


# -- density and differentiation ----------------------------------------------------

def test_density_full_and_half():
    root = RootCube(1, 3)
    full = DyadicSet(root, np.ones(8, dtype=bool))
    assert all(r == pytest.approx(1.0) for _, r in density_curve(full, 5, 0.5))
    half = DyadicSet.from_leaves(root, [0, 1, 2, 3])
    curve = density_curve(half, 1, 0.5)
    assert curve[0][1] == pytest.approx(2 ** -0.5)
    assert all(r == pytest.approx(1.0) for _, r in curve[1:])
    with pytest.raises(ValueError):
        density_curve(half, 6, 0.5)


def test_density_single_leaf_lebesgue():
    E = DyadicSet.from_leaves(RootCube(1, 4), [9])
    curve = [r for _, r in density_curve(E, 9, 1.0)]
    assert curve == pytest.approx([2.0 ** (m - 4) for m in range(5)])


def test_differentiation():
    root = RootCube(1, 8)
    ramp = GridFunction(root, (np.arange(256) + 0.5) / 256)
    rep = differentiation_check(ramp, 0.5)
    assert rep["leaf_average_exact"]
    assert np.all(np.diff(rep["curve"]) <= 1e-15)
    E = DyadicSet.from_leaves(root, range(128))
    avg = differentiation_check(E.indicator(), 0.5)
    assert avg["passed"]


# -- stopping-time decomposition -------------------------------------------------------

def test_cz_example():
    f = GridFunction(RootCube(1, 2), [4.0, 0, 0, 0])
    dec = cz_decompose(f, 1.0, 1.0)
    assert list(dec.cubes) == [DyadicCube(1, (0,))]
    assert dec.averages == pytest.approx((2.0,))
    assert cz_check(f, dec, 1.0)["passed"]


def test_cz_empty_cases():
    f = GridFunction(RootCube(1, 3), np.linspace(0, 1, 8))
    assert len(cz_decompose(f, 0.5, 1.0).cubes) == 0
    c = GridFunction(RootCube(1, 3), np.full(8, 3.0))
    dec = cz_decompose(c, 0.5, 3.0)
    assert len(dec.cubes) == 0 and cz_check(c, dec, 0.5)["passed"]


def test_cz_precondition():
    f = GridFunction(RootCube(1, 2), [4.0, 4, 4, 4])
    with pytest.raises(ValueError, match="below the average"):
        cz_decompose(f, 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.floats(-5, 5), min_size=64, max_size=64),
       beta=st.sampled_from([0.5, 1.0, 1.3, 2.0]), k=st.floats(1.0, 4.0))
def test_cz_sandwich_and_maximality(v, beta, k):
    f = GridFunction(RootCube(2, 3), np.array(v))
    from capkit.calculus import level_averages
    avgs = level_averages(f, beta)
    lam = max(avgs[0][0] * k, 1e-3)
    dec = cz_decompose(f, beta, lam)
    assert cz_check(f, dec, beta)["passed"]
    # independent bottom-up scan: a cube is selected iff it exceeds lam and no ancestor does
    Mf = maximal_function(f, beta)
    assert np.array_equal(dec.cubes.mask().mask, Mf.values > lam)
    for c, a in zip(dec.cubes, dec.averages):
        for m in range(c.level):
            anc = c.ancestor(m)
            assert choquet_integral(f.with_values(np.abs(f.values)), beta, anc) / \
                f.root.side_at(m) ** beta <= lam * (1 + 1e-12)
