import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from capkit.grid import DiscreteMeasure, DyadicCube, RootCube
from capkit.potential import (QUARTER_CANTOR, UNIFORM_1D, IFSSpec, adams_embedding_check,
                              construction_cubes, cube_masses, density_ratios,
                              divergence_example, format_ifs, gamma_riesz, hutchinson_measure,
                              morrey_norm, parse_ifs, riesz_potential, self_cell_constant,
                              splitting_series, uniform_spec)
from capkit.oracles import riesz_uniform_1d


# -- self-similar measures -------------------------------------------------------------

def test_uniform_measure():
    mu = hutchinson_measure(UNIFORM_1D, RootCube(1, 6))
    assert np.allclose(mu.masses, 1 / 64, rtol=1e-14)
    assert np.allclose(density_ratios(mu, 1.0), 1.0)
    mu2 = hutchinson_measure(uniform_spec(2), RootCube(2, 4))
    assert np.allclose(mu2.masses, 1 / 256)


def test_quarter_cantor_generations():
    assert QUARTER_CANTOR.similarity_dimension() == pytest.approx(0.5, abs=1e-12)
    root = RootCube(1, 10)
    mu = hutchinson_measure(QUARTER_CANTOR, root)
    masses = cube_masses(mu)
    for c, m in construction_cubes(QUARTER_CANTOR, 5):
        from capkit.grid import morton_code
        assert m == 2.0 ** -(c.level // 2)
        got = masses[c.level][morton_code(c.index, c.level)]
        assert got == pytest.approx(m, rel=1e-14)
        assert got / root.side_at(c.level) ** 0.5 == pytest.approx(1.0, rel=1e-14)
    assert mu.total == pytest.approx(1.0, rel=1e-14)


def test_quarter_cantor_density_bounds():
    mu = hutchinson_measure(QUARTER_CANTOR, RootCube(1, 12))
    r = density_ratios(mu, 0.5)
    assert r.min() >= 0.5 and r.max() <= 2.0


def test_single_map_collapses():
    spec = IFSSpec.from_tuples([(Fraction(1, 2), (0.0,), 1.0)])
    norms = []
    for n in (4, 6, 8):
        mu = hutchinson_measure(spec, RootCube(1, n))
        assert mu.masses[0] == 1.0 and mu.masses[1:].sum() == 0.0
        norms.append(morrey_norm(mu, 0.05).value)
    assert norms[0] < norms[1] < norms[2]


def test_non_dyadic_ratio_suggests():
    with pytest.raises(ValueError, match="1/4"):
        IFSSpec.from_tuples([(0.3, (0.0,), 0.5), (Fraction(1, 4), (0.75,), 0.5)])


@pytest.mark.parametrize("items,msg", [
    ([(Fraction(1, 2), (0.0,), 0.4), (Fraction(1, 2), (0.5,), 0.4)], "sum"),
    ([(Fraction(1, 2), (0.0,), 0.5), (Fraction(1, 4), (0.25,), 0.5)], "overlap"),
    ([(Fraction(1, 4), (0.1,), 1.0)], "aligned"),
])
def test_ifs_validation(items, msg):
    with pytest.raises(ValueError, match=msg):
        IFSSpec.from_tuples(items)


def test_ifs_text_round_trip():
    spec = parse_ifs("# corners\nmap r=1/4 t=0 0 w=0.25\nmap r=1/4 t=0.75 0.75 w=0.75\n")
    assert spec.d == 2
    assert parse_ifs(format_ifs(spec)) == spec
    with pytest.raises(ValueError, match=":2:"):
        parse_ifs("map r=1/2 t=0 w=1\nbogus\n", "x.txt")


# -- Morrey norms --------------------------------------------------------------------

def test_morrey_examples():
    mu = hutchinson_measure(UNIFORM_1D, RootCube(1, 5))
    mn = morrey_norm(mu, 1.0)
    assert mn.value == pytest.approx(1.0) and mn.cube == DyadicCube(0, (0,))
    cantor = hutchinson_measure(QUARTER_CANTOR, RootCube(1, 10))
    assert morrey_norm(cantor, 0.5).value == pytest.approx(1.0)
    root = RootCube(1, 6)
    point = DiscreteMeasure(root, np.eye(64)[17] * 3.0)
    mn = morrey_norm(point, 0.7)
    assert mn.value == pytest.approx(3.0 / root.leaf_side ** 0.7)
    assert mn.cube == DyadicCube(6, (17,))


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(0, 1), min_size=16, max_size=16),
       b=st.lists(st.floats(0, 1), min_size=16, max_size=16),
       s=st.floats(0.01, 100), beta=st.floats(0, 2))
def test_morrey_homogeneous_monotone(a, b, s, beta):
    root = RootCube(2, 2)
    mu, nu = DiscreteMeasure(root, a), DiscreteMeasure(root, b)
    assert morrey_norm(mu.scaled(s), beta).value == pytest.approx(s * morrey_norm(mu, beta).value,
                                                                  rel=1e-12, abs=1e-300)
    assert morrey_norm(mu + nu, beta).value >= morrey_norm(mu, beta).value * (1 - 1e-12)


# -- Riesz potentials ------------------------------------------------------------------

def test_gamma_newtonian():
    # 1/(4 pi |x|) in three dimensions
    assert gamma_riesz(2.0, 3) == pytest.approx(4 * math.pi, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_self_cell_1d(alpha):
    val, _ = integrate.quad(lambda y: abs(y) ** (alpha - 1), -0.5, 0.5, points=[0.0])
    assert self_cell_constant(alpha, 1) == pytest.approx(val, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_self_cell_2d_polar(alpha):
    # radial integral of r^(alpha-1) up to the square's boundary R(theta)
    def R(t):
        return 0.5 / max(abs(math.cos(t)), abs(math.sin(t)))
    val, _ = integrate.quad(lambda t: R(t) ** alpha / alpha, 0, 2 * math.pi,
                            points=[math.pi / 4 * k for k in range(1, 8)], limit=200)
    assert self_cell_constant(alpha, 2) == pytest.approx(val, rel=1e-9)


def test_self_cell_3d_spherical():
    alpha = 1.0

    def f(th, ph):
        w = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th))
        return (0.5 / max(w)) ** alpha / alpha * math.sin(th)

    def th_opts(ph):
        # the top face gives way to a side face where cos(th) = sin(th) max(cos, sin)(ph)
        return {"points": [math.atan(1 / max(math.cos(ph), math.sin(ph)))], "limit": 200}

    # first octant, times eight
    val, _ = integrate.nquad(f, [(0, math.pi / 2), (0, math.pi / 2)],
                             opts=[th_opts, {"points": [math.pi / 4], "limit": 200}])
    assert self_cell_constant(alpha, 3) == pytest.approx(8 * val, rel=1e-8)


def test_uniform_against_quadrature():
    alpha = 0.5
    root = RootCube(1, 8)
    mu = hutchinson_measure(UNIFORM_1D, root)
    pot = riesz_potential(mu, alpha).values
    x = root.leaf_centers()[:, 0]
    ref = np.array([riesz_uniform_1d(xi, alpha) for xi in x]) / gamma_riesz(alpha, 1)
    assert np.max(np.abs(pot - ref) / ref) < 1e-3
    assert np.argmax(pot) in (127, 128)
    assert np.allclose(pot, pot[::-1], rtol=1e-12)


def test_point_mass_far_field():
    root = RootCube(2, 4)
    alpha = 0.8
    mu = DiscreteMeasure(root, np.eye(256)[5 * 16 + 6])
    pot = riesz_potential(mu, alpha).array
    y0 = root.leaf_centers()[5 * 16 + 6]
    for leaf in [(0, 0), (12, 3), (5, 15), (9, 9)]:
        x = root.leaf_centers()[leaf[0] * 16 + leaf[1]]
        want = np.linalg.norm(x - y0) ** (alpha - 2) / gamma_riesz(alpha, 2)
        assert pot[leaf] == pytest.approx(want, rel=1e-12)


def test_translation_equivariance():
    root = RootCube(1, 7)
    rng = np.random.default_rng(0)
    m = np.zeros(128)
    m[40:60] = rng.random(20)
    a = riesz_potential(DiscreteMeasure(root, m), 0.5).values
    b = riesz_potential(DiscreteMeasure(root, np.roll(m, 1)), 0.5).values
    assert np.allclose(b[1:], a[:-1], rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(a=st.lists(st.floats(0, 1), min_size=16, max_size=16),
       b=st.lists(st.floats(0, 1), min_size=16, max_size=16), alpha=st.floats(0.1, 1.9))
def test_superposition(a, b, alpha):
    root = RootCube(2, 2)
    mu, nu = DiscreteMeasure(root, a), DiscreteMeasure(root, b)
    lhs = riesz_potential(mu + nu, alpha).values
    rhs = riesz_potential(mu, alpha).values + riesz_potential(nu, alpha).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


def test_alpha_range():
    with pytest.raises(ValueError, match="alpha"):
        riesz_potential(hutchinson_measure(UNIFORM_1D, RootCube(1, 3)), 1.0)


# -- embedding and divergence ------------------------------------------------------------

def test_splitting_series_partial_sums():
    s = splitting_series(1, 0.5, 0.25, terms=200)
    assert s["near_partial"] == pytest.approx(s["near_series"], rel=1e-12)
    assert s["far_partial"] == pytest.approx(s["far_series"], rel=1e-12)


def test_adams_uniform_and_scaling():
    mu = hutchinson_measure(UNIFORM_1D, RootCube(1, 8))
    rep = adams_embedding_check(mu, 0.5, 0.25)
    assert np.isfinite(rep["ratio"]) and rep["ratio"] > 0
    twice = adams_embedding_check(mu.scaled(2.0), 0.5, 0.25)
    assert twice["ratio"] == pytest.approx(rep["ratio"], rel=1e-9)
    with pytest.raises(ValueError, match="eps"):
        adams_embedding_check(mu, 0.5, 0.75)


def test_adams_cantor_bounded():
    ratios = [adams_embedding_check(hutchinson_measure(QUARTER_CANTOR, RootCube(1, n)), 0.5, 0.25)["ratio"]
              for n in (6, 8, 10)]
    assert max(ratios) / min(ratios) < 2


def test_divergence_cantor():
    rep = divergence_example(QUARTER_CANTOR, 0.5, (4, 6, 8, 10))
    assert rep["dimension_match"]
    e = [r["energy"] for r in rep["rows"]]
    assert all(b > a for a, b in zip(e, e[1:]))
    assert rep["diverging"]


def test_divergence_uniform_control():
    rep = divergence_example(UNIFORM_1D, 0.5, (6, 8, 10))
    assert not rep["dimension_match"]
    crit = [r["norm_critical"] for r in rep["rows"]]
    assert abs(crit[-1] - crit[-2]) / crit[-1] < 0.01
