"""Covering selection, maximal function and stopping-time decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .choquet import choquet_integral
from .content import check_beta, content_many, dyadic_content
from .grid import (DyadicCube, DyadicSet, GridError, GridFunction, RootCube,
                   level_indices, morton_code, restrict)


class PostconditionError(AssertionError):
    """A selection failed one of its guaranteed properties."""


@dataclass(frozen=True)
class CubeFamily:
    root: RootCube
    cubes: tuple[DyadicCube, ...]

    def __post_init__(self):
        cubes = tuple(sorted(self.cubes, key=lambda c: self._span(c)))
        object.__setattr__(self, "cubes", cubes)
        for c in cubes:
            self.root.validate(c)
        for a, b in zip(cubes, cubes[1:]):
            if self._span(b)[0] < self._span(a)[1]:
                raise GridError(f"family is not pairwise disjoint: {a} and {b}")

    def _span(self, c: DyadicCube) -> tuple[int, int]:
        shift = self.root.d * (self.root.n - c.level)
        code = morton_code(c.index, c.level)
        return code << shift, (code + 1) << shift

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def mask(self) -> DyadicSet:
        m = np.zeros(self.root.ncells, dtype=bool)
        for c in self.cubes:
            lo, hi = self._span(c)
            m[lo:hi] = True
        return DyadicSet.from_morton(self.root, m)

    def level_sums(self, beta: float) -> list[np.ndarray]:
        """For every dyadic cube, the sum of ``l^beta`` over members inside it."""
        r = self.root
        own = [np.zeros(1 << (r.d * m)) for m in range(r.n + 1)]
        for c in self.cubes:
            own[c.level][morton_code(c.index, c.level)] += r.side_at(c.level) ** beta
        out = [None] * (r.n + 1)
        acc = own[r.n]
        out[r.n] = acc
        for m in range(r.n - 1, -1, -1):
            acc = own[m] + acc.reshape(-1, 1 << r.d).sum(axis=1)
            out[m] = acc
        return out


@dataclass(frozen=True)
class OVSelection:
    subfamily: CubeFamily
    ancestors: CubeFamily
    packing_constant_observed: float


def _cubes_at(d: int, m: int, codes) -> list[DyadicCube]:
    idx = level_indices(d, m)
    return [DyadicCube(m, tuple(int(i) for i in idx[c])) for c in codes]


def melnikov_select(family: CubeFamily, beta: float) -> OVSelection:
    """Split a disjoint family into a packing subfamily and heavy ancestors.

    Proper ancestors ``P`` of family members with
    ``sum_{Q_j in P} l(Q_j)^beta >= l(P)^beta`` are heavy; the maximal heavy
    cubes become the ancestors and the members outside them the subfamily.
    """
    r = family.root
    beta = check_beta(beta, r.d)
    fan = 1 << r.d
    sums = family.level_sums(beta)
    member = [np.zeros(1 << (r.d * m), dtype=bool) for m in range(r.n + 1)]
    for c in family:
        member[c.level][morton_code(c.index, c.level)] = True
    blocked = np.zeros(1, dtype=bool)
    taken_codes = []
    inside = [None] * (r.n + 1)
    for m in range(r.n + 1):
        if m > 0:
            blocked = np.repeat(blocked, fan)
        inside[m] = blocked
        heavy = (~member[m]) & (sums[m] > 0) & (sums[m] >= r.side_at(m) ** beta)
        take = heavy & ~blocked
        taken_codes.append(np.flatnonzero(take))
        blocked = blocked | take
    ancestors = [c for m, codes in enumerate(taken_codes) for c in _cubes_at(r.d, m, codes)]
    sub = [c for c in family if not inside[c.level][morton_code(c.index, c.level)]]
    subfam = CubeFamily(r, tuple(sub))
    anc = CubeFamily(r, tuple(ancestors))
    sel = OVSelection(subfam, anc, _packing_max(subfam, beta))
    problems = ov_postconditions(family, sel, beta)
    if problems:
        raise PostconditionError("covering selection failed: " + "; ".join(problems))
    return sel


def _packing_max(fam: CubeFamily, beta: float) -> float:
    if not len(fam):
        return 0.0
    r = fam.root
    return max(float(np.max(s)) / r.side_at(m) ** beta for m, s in enumerate(fam.level_sums(beta)))


def ov_postconditions(family: CubeFamily, sel: OVSelection, beta: float,
                      rtol: float = 1e-12) -> list[str]:
    """Return a description of every violated property (empty when all hold)."""
    r = family.root
    problems = []
    cover = sel.subfamily.mask() | sel.ancestors.mask()
    if not family.mask() <= cover:
        problems.append("(1) members not covered by subfamily and ancestors")
    for m, s in enumerate(sel.subfamily.level_sums(beta)):
        cap = 2 * r.side_at(m) ** beta
        bad = np.flatnonzero(s > cap * (1 + rtol))
        if bad.size:
            c = _cubes_at(r.d, m, bad[:1])[0]
            problems.append(f"(2) packing sum {s[bad[0]]:.6g} exceeds {cap:.6g} on {c}")
    sums = family.level_sums(beta)
    for a in sel.ancestors:
        s = sums[a.level][morton_code(a.index, a.level)]
        if r.side_at(a.level) ** beta > s * (1 + rtol):
            problems.append(f"(3) ancestor {a} heavier than its members ({s:.6g})")
    return problems


def packing_integral_check(sel: OVSelection, f: GridFunction, beta: float) -> float:
    """``sum_k int_{Q_k} f`` divided by the integral of ``f`` over the union."""
    cubes = sel.subfamily
    num = sum(choquet_integral(f, beta, c) for c in cubes)
    union = f.with_values(np.where(cubes.mask().mask, f.values, 0.0))
    den = choquet_integral(union, beta)
    if den == 0.0:
        if num != 0.0:
            raise ArithmeticError("nonzero cube integrals over a null union")
        return 1.0
    return num / den


# -- packing constant ---------------------------------------------------------

def antichain_table(d: int, depth: int, beta: float):
    """Every nonempty antichain of a depth-``depth`` tree with the packing property.

    Returns ``(levels, sums)``: ``levels[k]`` gives, per leaf in Morton order,
    the level of the member covering it (-1 if none), and ``sums[k]`` the
    member total of ``l^beta`` on the unit cube.  All nodes of one level have
    the same option set, so it is built once per level by a Cartesian power.
    """
    fan = 1 << d
    lev = np.array([[-1], [depth]], dtype=np.int8)
    sums = np.array([0.0, 2.0 ** (-depth * beta)])
    for m in range(depth - 1, -1, -1):
        k = len(sums)
        grids = np.indices((k,) * fan).reshape(fan, -1)
        combo_sum = sums[grids].sum(axis=0)
        combo_lev = np.concatenate([lev[g] for g in grids], axis=1)
        keep = (combo_sum > 0) & (combo_sum <= 2 * 2.0 ** (-m * beta) * (1 + 1e-12))
        width = combo_lev.shape[1]
        lev = np.concatenate([np.full((1, width), -1, np.int8), np.full((1, width), m, np.int8),
                              combo_lev[keep]])
        sums = np.concatenate([[0.0, 2.0 ** (-m * beta)], combo_sum[keep]])
    return lev[1:], sums[1:]


def _family_from_levels(lev: np.ndarray, d: int, depth: int) -> list[DyadicCube]:
    out, i = [], 0
    idx = level_indices(d, depth)
    while i < lev.size:
        m = int(lev[i])
        if m < 0:
            i += 1
            continue
        out.append(DyadicCube(depth, tuple(int(v) for v in idx[i])).ancestor(m))
        i += 1 << (d * (depth - m))
    return out


def _random_family(root: RootCube, rng: np.random.Generator, p_stop: float) -> list[DyadicCube]:
    out = []
    stack = [root.top]
    while stack:
        c = stack.pop()
        u = rng.random()
        if c.level == root.n or u < p_stop:
            if rng.random() < 0.6:
                out.append(c)
        else:
            stack.extend(c.children())
    return out


def measure_packing_constant(d: int, beta: float, n: int, rng: np.random.Generator,
                             trials: int = 200, exhaustive_depth: int | None = None) -> dict:
    """Empirical sup of the packing-integral ratio for one ``(d, beta)``.

    Two sources: every antichain of a shallow tree (indicator integrands,
    where the ratio is ``sum l^beta / C(union)``), and random families at
    resolution ``n`` with random nonnegative integrands.
    """
    beta = check_beta(beta, d)
    if exhaustive_depth is None:
        exhaustive_depth = {1: 3, 2: 2, 3: 1}[d]
    depth = min(exhaustive_depth, n)
    lev, sums = antichain_table(d, depth, beta)
    leaf = 2.0 ** -depth
    cont = _engine.content_tree(lev >= 0, d, depth, beta, leaf)[-1][:, 0]
    ratios = sums / cont
    k = int(np.argmax(ratios))
    best, arg = float(ratios[k]), [str(c) for c in _family_from_levels(lev[k], d, depth)]
    nfam = len(sums)
    root = RootCube(d, n)
    for _ in range(trials):
        fam = _random_family(root, rng, p_stop=rng.uniform(0.1, 0.5))
        if not fam:
            continue
        sel = melnikov_select(CubeFamily(root, tuple(fam)), beta)
        if not len(sel.subfamily):
            continue
        f = GridFunction(root, rng.random(root.ncells) ** 3)
        r = packing_integral_check(sel, f, beta)
        if r > best:
            best, arg = r, [str(c) for c in sel.subfamily]
    return {"d": d, "beta": beta, "n": n, "cprime": best, "witness": arg,
            "antichains": nfam, "random_trials": trials}


# -- maximal function -----------------------------------------------------------

def level_averages(f: GridFunction, beta: float) -> list[np.ndarray]:
    """Normalized integrals of ``|f|`` over every dyadic cube, level 0 first.

    The leaf level is ``|f|`` itself.
    """
    r = f.root
    beta = check_beta(beta, r.d)
    h = np.abs(f.morton)[None, :]
    _, per = _engine.choquet_rows(h, r.d, r.n, beta, r.leaf_side, levels=True)
    out = []
    for k, arr in enumerate(per):
        m = r.n - k
        out.append(h[0].copy() if k == 0 else arr[0] / r.side_at(m) ** beta)
    return out[::-1]


def maximal_function(f: GridFunction, beta: float) -> GridFunction:
    """Per leaf, the largest normalized average over the cubes containing it."""
    r = f.root
    avgs = level_averages(f, beta)
    best = np.zeros(1)
    for m, a in enumerate(avgs):
        best = np.maximum(np.repeat(best, 1 << r.d) if m else best, a)
    return GridFunction.from_morton(r, best)


def weak_type_check(f: GridFunction, beta: float, t: float | None = None) -> dict:
    """Compare ``t * C({Mf > t})`` with the integral of ``f``.

    With ``t`` omitted the ratio is maximized over all ``t > 0``; the sup is
    approached from below each distinct value of ``Mf``.
    """
    if np.any(f.values < 0):
        raise ValueError("weak_type_check needs f >= 0")
    Mf = maximal_function(f, beta)
    total = choquet_integral(f, beta)
    if t is not None:
        if not t > 0:
            raise ValueError(f"t must be positive, got {t}")
        lhs = dyadic_content(DyadicSet(f.root, Mf.values > t), beta)
        return {"t": t, "lhs": lhs, "rhs_over_cprime": total / t,
                "ratio": lhs * t / total if total > 0 else 0.0}
    best, tb = 0.0, None
    for v in np.unique(Mf.values[Mf.values > 0]):
        lhs = dyadic_content(DyadicSet(f.root, Mf.values >= v), beta)
        if v * lhs / total > best:
            best, tb = v * lhs / total, float(v)
    return {"t": tb, "ratio": best, "integral": total}


def density_curve(E: DyadicSet, x, beta: float) -> list[tuple[int, float]]:
    """``C(E n Q_m) / l(Q_m)^beta`` along the cubes ``Q_m`` containing leaf ``x``."""
    from .content import content_levels
    r = E.root
    x = tuple(int(i) for i in np.atleast_1d(x))
    if not E.array[x]:
        raise ValueError(f"leaf {x} is not in E")
    lv = content_levels(E, beta)
    leaf = DyadicCube(r.n, x)
    out = []
    for m in range(r.n + 1):
        a = leaf.ancestor(m)
        out.append((m, float(lv[m][morton_code(a.index, m)]) / r.side_at(m) ** beta))
    return out


def differentiation_check(f: GridFunction, beta: float) -> dict:
    """Tail maxima of the cube averages against ``|f|`` at each leaf.

    Entry ``m0`` of the curve is the largest deviation over leaves of
    ``max_{m >= m0} avg_m(x)`` from ``|f(x)|``.
    """
    r = f.root
    avgs = level_averages(f, beta)
    fan = 1 << r.d
    expanded = [np.repeat(a, fan ** (r.n - m)) for m, a in enumerate(avgs)]
    h = np.abs(f.morton)
    tail = expanded[r.n].copy()
    curve = [0.0] * (r.n + 1)
    for m0 in range(r.n, -1, -1):
        tail = np.maximum(tail, expanded[m0])
        curve[m0] = float(np.max(np.abs(tail - h)))
    exact = bool(np.array_equal(expanded[r.n], h))
    return {"leaf_average_exact": exact, "curve": curve, "passed": exact}


# -- Calderon-Zygmund ------------------------------------------------------------

@dataclass(frozen=True)
class CZDecomposition:
    lam: float
    cubes: CubeFamily
    averages: tuple[float, ...] = field(default=())


def cz_decompose(f: GridFunction, beta: float, lam: float,
                 cube: DyadicCube | None = None) -> CZDecomposition:
    """Maximal dyadic cubes whose normalized integral of ``|f|`` exceeds ``lam``."""
    r = f.root
    base = cube if cube is not None else r.top
    r.validate(base)
    g = restrict(f, base) if cube is not None else f
    beta = check_beta(beta, r.d)
    avgs = level_averages(g, beta)
    if avgs[0][0] > lam:
        raise ValueError(f"lambda={lam} is below the average {avgs[0][0]:.17g} over {base}")
    sub = g.root
    fan = 1 << sub.d
    blocked = np.zeros(1, dtype=bool)
    picked, values = [], []
    for m, a in enumerate(avgs):
        if m:
            blocked = np.repeat(blocked, fan)
        take = (a > lam) & ~blocked
        codes = np.flatnonzero(take)
        for c, code in zip(_cubes_at(sub.d, m, codes), codes):
            picked.append(_absolute(base, c))
            values.append(float(a[code]))
        blocked = blocked | take
    fam = CubeFamily(r, tuple(picked))
    order = {c: v for c, v in zip(picked, values)}
    return CZDecomposition(float(lam), fam, tuple(order[c] for c in fam.cubes))


def _absolute(base: DyadicCube, c: DyadicCube) -> DyadicCube:
    from .grid import compose
    return compose(base, c)


def cz_check(f: GridFunction, dec: CZDecomposition, beta: float, rtol: float = 1e-12) -> dict:
    """Sandwich and complement bounds of a decomposition."""
    lam = dec.lam
    upper = 2.0 ** beta * lam
    sandwich = [(str(c), a) for c, a in zip(dec.cubes, dec.averages)
                if not (lam < a <= upper * (1 + rtol))]
    outside = ~dec.cubes.mask().mask
    comp = int(np.sum(np.abs(f.values[outside]) > lam))
    return {"cubes": len(dec.cubes), "sandwich_violations": sandwich,
            "complement_violations": comp, "passed": not sandwich and comp == 0}
