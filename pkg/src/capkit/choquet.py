"""Choquet integrals against the dyadic content."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from .content import check_beta
from .grid import DiscreteMeasure, DyadicCube, GridError, GridFunction, restrict


@dataclass(frozen=True)
class LayerCake:
    """Distinct positive values of f and the content of ``{f >= t}`` at each."""
    thresholds: np.ndarray
    contents: np.ndarray

    def integral(self) -> float:
        steps = np.diff(np.concatenate([[0.0], self.thresholds]))
        return float(np.sum(steps * self.contents))


def _local(f, cube):
    if cube is None:
        return f
    f.root.validate(cube)
    return restrict(f, cube)


def _events(f: GridFunction, beta: float):
    r = f.root
    beta = check_beta(beta, r.d)
    total, ev = _engine.choquet_rows(f.morton[None, :], r.d, r.n, beta, r.leaf_side,
                                     events=True)
    V, W = ev
    return float(total[0]), _engine.LayerEvents(V[0], W[0])


def _require_nonnegative(f: GridFunction):
    if np.any(f.values < 0):
        raise ValueError("choquet_integral needs f >= 0; use l1_norm for signed data")


def choquet_integral(f: GridFunction, beta: float, cube: DyadicCube | None = None) -> float:
    """Integral of ``t -> C({f > t})`` over ``t > 0``, restricted to ``cube``."""
    f = _local(f, cube)
    _require_nonnegative(f)
    return _events(f, beta)[0]


def layer_cake(f: GridFunction, beta: float, cube: DyadicCube | None = None) -> LayerCake:
    f = _local(f, cube)
    _require_nonnegative(f)
    _, ev = _events(f, beta)
    t = np.unique(f.values[f.values > 0])
    csum = np.cumsum(ev.weights)
    # events come in nonincreasing value order
    k = np.searchsorted(-ev.values, -t, side="right")
    return LayerCake(t, np.where(k > 0, csum[np.maximum(k - 1, 0)], 0.0))


def superlevel_contents(f: GridFunction, beta: float, t) -> np.ndarray:
    """Content of ``{f > t}`` for each threshold in ``t``."""
    _require_nonnegative(f)
    return _events(f, beta)[1].content_above(t)


def l1_norm(f: GridFunction, beta: float, cube: DyadicCube | None = None) -> float:
    f = _local(f, cube)
    return _events(f.with_values(np.abs(f.values)), beta)[0]


def sublinearity_report(samples, beta: float, c: float = 2.0, rtol: float = 1e-9) -> dict:
    """Homogeneity, subadditivity and truncation limits on pairs ``(f, g)``."""
    issues = []
    worst = 0.0
    for k, (f, g) in enumerate(samples):
        If, Ig = choquet_integral(f, beta), choquet_integral(g, beta)
        Ic = choquet_integral(f.with_values(c * f.values), beta)
        if abs(Ic - c * If) > 1e-12 * max(1.0, abs(c * If)):
            issues.append({"sample": k, "property": "homogeneity", "lhs": Ic, "rhs": c * If})
        Is = choquet_integral(f.with_values(f.values + g.values), beta)
        worst = max(worst, Is - If - Ig)
        if Is > If + Ig + rtol * max(1.0, If + Ig):
            issues.append({"sample": k, "property": "subadditivity", "lhs": Is, "rhs": If + Ig})
        chain = [choquet_integral(f.with_values(np.minimum(f.values, m)), beta)
                 for m in np.unique(f.values)]
        if chain and (np.any(np.diff(chain) < -rtol) or abs(chain[-1] - If) > rtol * max(1.0, If)):
            issues.append({"sample": k, "property": "monotone_limit", "chain": chain, "limit": If})
    return {"samples": len(samples), "max_subadditivity_excess": worst,
            "issues": issues, "passed": not issues}


def dual_pairing_check(f: GridFunction, nu: DiscreteMeasure, beta: float) -> dict:
    """Ratio of ``sum |f| dnu`` to the Choquet norm of ``f``."""
    from .potential import morrey_norm
    if f.root != nu.root:
        raise GridError("function and measure live on different root cubes")
    mn = morrey_norm(nu, beta).value
    pairing = float(np.dot(np.abs(f.values), nu.masses))
    norm = l1_norm(f, beta)
    if norm == 0.0:
        if pairing != 0.0:
            raise ArithmeticError("nonzero pairing against a function of zero norm")
        ratio = 0.0
    else:
        ratio = pairing / norm
    return {"pairing": pairing, "l1_norm": norm, "ratio": ratio,
            "morrey_norm": mn, "normalized": mn <= 1.0 + 1e-12}
