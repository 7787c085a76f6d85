"""Slow reference computations used to cross-check the fast paths.

Nothing here shares code with the tree kernels: covers are enumerated or
solved as integer programs directly from the definition.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, sparse


def _leaf_bits(d: int, n: int, level: int, index) -> int:
    """Bitmask (row-major leaf numbering) of the leaves inside a cube."""
    w = 1 << (n - level)
    N = 1 << n
    rng = [range(i * w, (i + 1) * w) for i in index]
    bits = 0
    for leaf in np.ndindex(*(w,) * d):
        flat = 0
        for ax in range(d):
            flat = flat * N + rng[ax][leaf[ax]]
        bits |= 1 << flat
    return bits


def all_cubes(d: int, n: int):
    for m in range(n + 1):
        for idx in np.ndindex(*(1 << m,) * d):
            yield m, idx


@lru_cache(maxsize=None)
def antichain_covers(d: int, n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Every antichain of the tree as ``(covered-leaf bitmask, cost)``."""
    def rec(m, idx):
        here = (_leaf_bits(d, n, m, idx), (2.0 ** -m) ** beta)
        opts = [(0, 0.0), here]
        if m < n:
            kids = []
            for off in np.ndindex(*(2,) * d):
                kids.append(rec(m + 1, tuple(2 * i + o for i, o in zip(idx, off))))
            combos = [(0, 0.0)]
            for kid in kids:
                combos = [(b1 | b2, c1 + c2) for b1, c1 in combos for b2, c2 in kid]
            opts.extend(c for c in combos if c[0])
        return opts
    items = rec(0, (0,) * d)
    bits = np.array([b for b, _ in items], dtype=object)
    cost = np.array([c for _, c in items])
    return bits, cost


def brute_content(mask, d: int, n: int, beta: float) -> float:
    """Minimum cost over all antichain covers of the set (row-major mask)."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    target = 0
    for i in np.flatnonzero(mask):
        target |= 1 << int(i)
    if target == 0:
        return 0.0
    bits, cost = antichain_covers(d, n, float(beta))
    best = np.inf
    for b, c in zip(bits, cost):
        if c < best and target & ~b == 0:
            best = c
    return float(best)


@lru_cache(maxsize=None)
def _incidence(d: int, n: int):
    cubes = list(all_cubes(d, n))
    N = 1 << n
    rows, cols = [], []
    for j, (m, idx) in enumerate(cubes):
        w = 1 << (n - m)
        for leaf in np.ndindex(*(w,) * d):
            flat = np.ravel_multi_index(tuple(i * w + o for i, o in zip(idx, leaf)), (N,) * d)
            rows.append(flat)
            cols.append(j)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(N ** d, len(cubes)))
    return cubes, A


def ilp_content(mask, d: int, n: int, beta: float) -> float:
    """Set-cover integer program over all dyadic cubes, solved to optimality."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if not mask.any():
        return 0.0
    cubes, A = _incidence(d, n)
    cost = np.array([(2.0 ** -m) ** beta for m, _ in cubes])
    rows = A[np.flatnonzero(mask)]
    res = optimize.milp(cost, constraints=optimize.LinearConstraint(rows, lb=1, ub=np.inf),
                        integrality=np.ones(len(cubes)), bounds=optimize.Bounds(0, 1),
                        options={"mip_rel_gap": 0.0})
    if not res.success:
        raise RuntimeError(f"integer program failed: {res.message}")
    chosen = np.round(res.x) > 0.5
    return float(np.sum(cost[chosen]))


def riesz_uniform_1d(x: float, alpha: float) -> float:
    """Unnormalized potential of Lebesgue measure on [0, 1] at ``x``, by quadrature."""
    f = lambda y: abs(x - y) ** (alpha - 1)  # noqa: E731
    a, _ = integrate.quad(f, 0.0, x, limit=200) if x > 0 else (0.0, 0)
    b, _ = integrate.quad(f, x, 1.0, limit=200) if x < 1 else (0.0, 0)
    return a + b


def choquet_by_riemann(values, content_of, oversample: int = 10) -> float:
    """Integrate ``t -> content_of(t)`` on a grid refined at every breakpoint."""
    v = np.unique(np.concatenate([[0.0], np.asarray(values, dtype=float)]))
    total = 0.0
    for lo, hi in zip(v[:-1], v[1:]):
        ts = np.linspace(lo, hi, oversample + 1)
        mids = 0.5 * (ts[:-1] + ts[1:])
        total += sum(content_of(t) for t in mids) * (hi - lo) / oversample
    return total
