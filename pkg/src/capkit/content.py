"""Dyadic Hausdorff content of leaf-cell sets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .grid import DyadicCube, DyadicSet, GridError, RootCube, level_indices, restrict


def check_beta(beta: float, d: int) -> float:
    beta = float(beta)
    if not (0.0 < beta <= d):
        raise ValueError(f"beta must lie in (0, d] with d={d}, got {beta}")
    return beta


def omega(beta: float) -> float:
    """Volume normalization pi**(b/2) / Gamma(b/2 + 1)."""
    return math.pi ** (beta / 2) / math.gamma(beta / 2 + 1)


def _local(E: DyadicSet, cube: DyadicCube | None) -> DyadicSet:
    if cube is None:
        return E
    E.root.validate(cube)
    return restrict(E, cube)


def content_levels(E: DyadicSet, beta: float) -> list[np.ndarray]:
    """Content of every dyadic cube, indexed by level (0 = root).

    Entry ``m`` lists the cubes of level ``m`` in Morton order; their indices
    are ``grid.level_indices(d, m)``.
    """
    r = E.root
    beta = check_beta(beta, r.d)
    tree = _engine.content_tree(E.morton[None, :], r.d, r.n, beta, r.leaf_side)
    return [t[0] for t in reversed(tree)]


def dyadic_content(E: DyadicSet, beta: float, cube: DyadicCube | None = None) -> float:
    """Minimal sum of ``l(Q)**beta`` over dyadic covers of ``E`` inside ``cube``.

    The cover is taken from the dyadic subcubes of ``cube`` (the whole root
    by default).
    """
    E = _local(E, cube)
    return float(content_levels(E, beta)[0][0])


def content_many(masks: np.ndarray, root: RootCube, beta: float) -> np.ndarray:
    """Content of a batch of row-major masks, shape ``(R, ncells)``."""
    from .grid import morton_perm
    beta = check_beta(beta, root.d)
    masks = np.asarray(masks, dtype=bool)
    m = masks[:, morton_perm(root.d, root.n)]
    return _engine.content_tree(m, root.d, root.n, beta, root.leaf_side)[-1][:, 0]


def optimal_cover(E: DyadicSet, beta: float) -> list[DyadicCube]:
    """Cubes of an optimal cover; a cube beats its children on ties."""
    r = E.root
    lv = content_levels(E, beta)
    cover = []
    stack = [(0, 0)]
    while stack:
        m, code = stack.pop()
        val = lv[m][code]
        if val == 0.0:
            continue
        if m == r.n or val == r.side_at(m) ** beta:
            cover.append(DyadicCube(m, tuple(int(i) for i in level_indices(r.d, m)[code])))
            continue
        fan = 1 << r.d
        stack.extend((m + 1, code * fan + k) for k in reversed(range(fan)))
    return cover


def is_null(E: DyadicSet) -> bool:
    """Content-null test; at finite resolution only the empty set is null."""
    return bool(E.empty)


@dataclass(frozen=True)
class ContentBracket:
    lower: float
    upper: float
    dyadic_value: float
    c_beta_equiv: float


def equivalence_constant(beta: float, d: int) -> float:
    return omega(beta) * (math.sqrt(d) / 2) ** beta * 2.0 ** beta


def spherical_bracket(E: DyadicSet, beta: float) -> ContentBracket:
    """Bracket for the ball-cover content of ``E``.

    The upper end circumscribes a ball about each cube of an optimal dyadic
    cover.  The lower end divides the dyadic value by the declared constant
    ``equivalence_constant``; it is only as sharp as that constant.
    """
    d = E.root.d
    val = dyadic_content(E, beta)
    upper = omega(beta) * (math.sqrt(d) / 2) ** beta * val
    cb = equivalence_constant(beta, d)
    return ContentBracket(val / cb, upper, val, cb)


def capacity_axiom_report(pairs, beta: float, rtol: float = 1e-9) -> dict:
    """Check monotonicity and (strong) subadditivity on pairs of sets."""
    counts = {"monotone": 0, "subadditive": 0, "strong_subadditive": 0}
    violations = []
    for k, (E, F) in enumerate(pairs):
        if E.root != F.root:
            raise GridError(f"pair {k}: sets live on different root cubes")
        cE, cF = dyadic_content(E, beta), dyadic_content(F, beta)
        cU, cI = dyadic_content(E | F, beta), dyadic_content(E & F, beta)
        tol = rtol * max(1.0, cE + cF)
        checks = {
            "monotone": cI <= min(cE, cF) + tol and max(cE, cF) <= cU + tol
            and (not (E <= F) or cE <= cF + tol),
            "subadditive": cU <= cE + cF + tol,
            "strong_subadditive": cU + cI <= cE + cF + tol,
        }
        for name, ok in checks.items():
            if not ok:
                counts[name] += 1
                violations.append({"pair": k, "axiom": name, "E": cE, "F": cF,
                                   "union": cU, "intersection": cI})
    return {"pairs": len(pairs), "violations": counts, "details": violations,
            "passed": not violations}
