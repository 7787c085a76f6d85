"""Seeded test inputs: singular, fractal, piecewise constant and smooth."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .grid import DyadicSet, GridFunction, RootCube
from .potential import IFSSpec

KINDS = ("log-singularity", "cantor-indicator", "random-step", "ramp")


def log_singularity(root: RootCube, rng: np.random.Generator) -> GridFunction:
    """``-log|x - x0|`` with ``x0`` a random interior vertex of the leaf grid."""
    N = 1 << root.n
    if N < 2:
        x0 = np.asarray(root.origin) + 0.5 * root.side
    else:
        k = rng.integers(1, N, size=root.d)
        x0 = np.asarray(root.origin) + k * root.leaf_side
    dist = np.linalg.norm(root.leaf_centers() - x0, axis=1)
    return GridFunction(root, -np.log(dist))


def cantor_mask(root: RootCube) -> DyadicSet:
    """Leaves whose base-4 digits are all 0 or 3 on every axis.

    An odd resolution leaves the last binary digit free.
    """
    idx = np.indices(root.shape).reshape(root.d, -1)
    keep = np.ones(root.ncells, dtype=bool)
    for b in range(root.n // 2):
        shift = root.n - 2 * (b + 1)
        digit = (idx >> shift) & 3
        keep &= np.all((digit == 0) | (digit == 3), axis=0)
    return DyadicSet(root, keep)


def random_step(root: RootCube, rng: np.random.Generator, p_split: float = 0.7) -> GridFunction:
    """Uniform random values on a random partition into dyadic cubes."""
    out = np.zeros(root.shape)
    stack = [root.top]
    while stack:
        c = stack.pop()
        if c.level < root.n and (c.level == 0 or rng.random() < p_split):
            stack.extend(c.children())
        else:
            out[c.leaf_slices(root.n)] = rng.random()
    return GridFunction(root, out.reshape(-1))


def ramp(root: RootCube) -> GridFunction:
    return GridFunction(root, (np.arange(root.ncells) + 0.5) / root.ncells)


def corpus_generate(seed: int, kind: str, root: RootCube):
    rng = np.random.default_rng(seed)
    if kind == "log-singularity":
        return log_singularity(root, rng)
    if kind == "cantor-indicator":
        return cantor_mask(root)
    if kind == "random-step":
        return random_step(root, rng)
    if kind == "ramp":
        return ramp(root)
    raise ValueError(f"unknown corpus kind {kind!r}; choose from {', '.join(KINDS)}")


def as_function(obj) -> GridFunction:
    return obj.indicator() if isinstance(obj, DyadicSet) else obj


def jn_corpus(root: RootCube, seed: int) -> dict[str, GridFunction]:
    """Unbounded, fractal and piecewise-constant members used by the decay checks."""
    return {
        "log-singularity": log_singularity(root, np.random.default_rng(seed)),
        "cantor-indicator": cantor_mask(root).indicator(),
        "random-step": random_step(root, np.random.default_rng(seed + 1)),
    }


def random_ifs(rng: np.random.Generator) -> IFSSpec:
    """Three quarter-scale maps on distinct cells, no weight above one half."""
    cells = rng.choice(4, size=3, replace=False)
    while True:
        w = rng.dirichlet(np.ones(3))
        if w.max() <= 0.5:
            break
    w = w / w.sum()
    items = [(Fraction(1, 4), (c / 4,), float(x)) for c, x in zip(sorted(cells), w)]
    # absorb rounding in the last weight so the sum is exactly 1
    last = 1.0 - sum(x for _, _, x in items[:-1])
    items[-1] = (items[-1][0], items[-1][1], last)
    return IFSSpec.from_tuples(items)
