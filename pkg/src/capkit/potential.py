"""Self-similar measures, Morrey norms and Riesz potentials on the grid."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, signal

from .choquet import choquet_integral
from .grid import (DiscreteMeasure, DyadicCube, GridFunction, RootCube, level_indices)


@dataclass(frozen=True)
class IFSMap:
    ratio: Fraction
    translation: tuple[float, ...]
    weight: float

    @property
    def depth(self) -> int:
        return self.ratio.denominator.bit_length() - 1


def _dyadic_ratio(r) -> Fraction:
    fr = Fraction(r).limit_denominator(1 << 30)
    if not (0 < fr < 1):
        raise ValueError(f"ratio {r} must lie in (0, 1)")
    den = fr.denominator
    if fr.numerator != 1 or den & (den - 1):
        j = max(1, round(-math.log2(float(fr))))
        raise ValueError(f"ratio {r} is not of the form 2^-j; nearest dyadic choice is r=1/{1 << j}")
    return fr


@dataclass(frozen=True)
class IFSSpec:
    """Similarity maps ``x -> r x + t`` of the unit cube, with weights."""
    maps: tuple[IFSMap, ...]

    def __post_init__(self):
        if not self.maps:
            raise ValueError("IFS needs at least one map")
        d = len(self.maps[0].translation)
        total = sum(m.weight for m in self.maps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")
        cells = set()
        for k, m in enumerate(self.maps):
            if len(m.translation) != d:
                raise ValueError(f"map {k}: translation has {len(m.translation)} coordinates, expected {d}")
            if m.weight < 0:
                raise ValueError(f"map {k}: negative weight")
            scale = 1 << m.depth
            idx = []
            for t in m.translation:
                v = t * scale
                if abs(v - round(v)) > 1e-12 or not 0 <= round(v) < scale:
                    raise ValueError(f"map {k}: translation {m.translation} is not aligned to side {m.ratio}")
                idx.append(int(round(v)))
            cells.add((m.depth, tuple(idx)))
        cubes = [DyadicCube(j, i) for j, i in cells]
        if len(cubes) != len(self.maps):
            raise ValueError("two maps have the same image")
        for a in cubes:
            for b in cubes:
                if a != b and a.contains(b):
                    raise ValueError(f"map images overlap: {a} contains {b}")

    @property
    def d(self) -> int:
        return len(self.maps[0].translation)

    @classmethod
    def from_tuples(cls, items) -> "IFSSpec":
        return cls(tuple(IFSMap(_dyadic_ratio(r), tuple(float(x) for x in t), float(w))
                         for r, t, w in items))

    def similarity_dimension(self) -> float:
        rs = [float(m.ratio) for m in self.maps]
        if len(rs) == 1:
            return 0.0
        return float(optimize.brentq(lambda s: sum(r ** s for r in rs) - 1.0, 0.0, 64.0))


_MAP_LINE = re.compile(r"^map\s+r=(\S+)\s+t=(.*?)\s+w=(\S+)\s*$")


def parse_ifs(text: str, source: str = "<spec>") -> IFSSpec:
    items = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _MAP_LINE.match(line)
        if not m:
            raise ValueError(f"{source}:{lineno}: expected 'map r=<ratio> t=<coords> w=<weight>'")
        try:
            r = Fraction(m.group(1))
            t = tuple(float(x) for x in m.group(2).split())
            w = float(m.group(3))
        except ValueError:
            raise ValueError(f"{source}:{lineno}: cannot parse numbers in {line!r}") from None
        items.append((r, t, w))
    return IFSSpec.from_tuples(items)


def read_ifs(path) -> IFSSpec:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None
    return parse_ifs(text, str(path))


def format_ifs(spec: IFSSpec) -> str:
    return "".join(f"map r={m.ratio} t={' '.join(repr(x) for x in m.translation)} w={m.weight!r}\n"
                   for m in spec.maps)


QUARTER_CANTOR = IFSSpec.from_tuples([(Fraction(1, 4), (0.0,), 0.5), (Fraction(1, 4), (0.75,), 0.5)])
UNIFORM_1D = IFSSpec.from_tuples([(Fraction(1, 2), (0.0,), 0.5), (Fraction(1, 2), (0.5,), 0.5)])


def uniform_spec(d: int) -> IFSSpec:
    corners = np.indices((2,) * d).reshape(d, -1).T * 0.5
    return IFSSpec.from_tuples([(Fraction(1, 2), tuple(c), 1.0 / len(corners)) for c in corners])


def hutchinson_measure(spec: IFSSpec, root: RootCube) -> DiscreteMeasure:
    """Unit mass pushed through the maps until every piece is a leaf or smaller."""
    if spec.d != root.d:
        raise ValueError(f"IFS is {spec.d}-dimensional, root is {root.d}-dimensional")
    d, n = root.d, root.n
    depth = np.array([m.depth for m in spec.maps])
    shift = np.array([[int(round(t * (1 << m.depth))) for t in m.translation] for m in spec.maps])
    w = np.array([m.weight for m in spec.maps])
    out = np.zeros(root.shape)
    lev = np.zeros(1, dtype=np.int64)
    idx = np.zeros((1, d), dtype=np.int64)
    mass = np.ones(1)
    while lev.size:
        done = lev >= n
        if done.any():
            leaf = idx[done] >> (lev[done] - n)[:, None]
            np.add.at(out, tuple(leaf.T), mass[done])
            lev, idx, mass = lev[~done], idx[~done], mass[~done]
        if not lev.size:
            break
        # map k sends cube (L, I) to (L + j_k, I + T_k 2^L)
        lev2 = (lev[:, None] + depth[None, :]).reshape(-1)
        idx2 = (idx[:, None, :] + (shift[None, :, :] << lev[:, None, None])).reshape(-1, d)
        mass2 = (mass[:, None] * w[None, :]).reshape(-1)
        keep = mass2 > 0
        lev, idx, mass = lev2[keep], idx2[keep], mass2[keep]
    return DiscreteMeasure(root, out.reshape(-1))


def construction_cubes(spec: IFSSpec, generations: int) -> list[tuple[DyadicCube, float]]:
    cubes = [(DyadicCube(0, (0,) * spec.d), 1.0)]
    for _ in range(generations):
        nxt = []
        for c, m in cubes:
            for mp in spec.maps:
                T = [int(round(t * (1 << mp.depth))) for t in mp.translation]
                nxt.append((DyadicCube(c.level + mp.depth,
                                       tuple(i + (t << c.level) for i, t in zip(c.index, T))), m * mp.weight))
        cubes = nxt
    return cubes


@dataclass(frozen=True)
class MorreyNorm:
    value: float
    cube: DyadicCube


def cube_masses(mu: DiscreteMeasure) -> list[np.ndarray]:
    """Mass of every dyadic cube, level 0 first, Morton order."""
    r = mu.root
    acc = mu.morton.astype(np.float64)
    out = [acc]
    for _ in range(r.n):
        acc = acc.reshape(-1, 1 << r.d).sum(axis=1)
        out.append(acc)
    return out[::-1]


def morrey_norm(mu: DiscreteMeasure, beta: float) -> MorreyNorm:
    """Largest ``mu(Q) / l(Q)^beta`` over dyadic cubes (coarsest cube on ties)."""
    r = mu.root
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    best, where = -1.0, None
    for m, s in enumerate(cube_masses(mu)):
        vals = s / r.side_at(m) ** beta
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            where = DyadicCube(m, tuple(int(x) for x in level_indices(r.d, m)[i]))
    return MorreyNorm(best, where)


def density_ratios(mu: DiscreteMeasure, beta: float) -> np.ndarray:
    """``mu(Q)/l(Q)^beta`` over every dyadic cube with positive mass."""
    r = mu.root
    return np.concatenate([s[s > 0] / r.side_at(m) ** beta for m, s in enumerate(cube_masses(mu))])


# -- Riesz potentials -----------------------------------------------------------------

def gamma_riesz(alpha: float, d: int) -> float:
    """``pi^(d/2) 2^alpha Gamma(alpha/2) / Gamma((d - alpha)/2)``."""
    return math.pi ** (d / 2) * 2.0 ** alpha * math.gamma(alpha / 2) / math.gamma((d - alpha) / 2)


@lru_cache(maxsize=None)
def self_cell_constant(alpha: float, d: int) -> float:
    """``int |y|^(alpha-d) dy`` over the unit cube centered at 0.

    Splitting the cube into ``2d`` pyramids with apex at the center reduces
    it to a smooth integral over one face.
    """
    if d == 1:
        return 0.5 ** (alpha - 1) / alpha
    e = (alpha - d) / 2

    def face(*w):
        return (sum(x * x for x in w) + 0.25) ** e

    if d == 2:
        val, _ = integrate.quad(face, -0.5, 0.5, epsabs=1e-14, epsrel=1e-13)
    else:
        val, _ = integrate.dblquad(lambda y, x: face(x, y), -0.5, 0.5, -0.5, 0.5,
                                   epsabs=1e-14, epsrel=1e-13)
    return 2 * d * val / (2 * alpha)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def kernel_table(d: int, n: int, alpha: float, h: float) -> np.ndarray:
    """Cell-averaged kernel ``|x - y|^(alpha - d)`` indexed by leaf offset ``+ (2^n - 1)``."""
    N = 1 << n
    off = np.arange(-(N - 1), N)
    grids = np.meshgrid(*([off] * d), indexing="ij")
    dist = np.sqrt(sum((g * h) ** 2 for g in grids))
    with np.errstate(divide="ignore"):
        K = dist ** (alpha - d)
    centre = (N - 1,) * d
    K[centre] = self_cell_constant(alpha, d) * h ** (alpha - d)
    # 4-point Gauss-Legendre average over the neighbouring cells
    nodes = 0.5 * _GL_X
    wts = 0.5 * _GL_W
    mesh = np.meshgrid(*([nodes] * d), indexing="ij")
    wmesh = np.prod(np.meshgrid(*([wts] * d), indexing="ij"), axis=0)
    for o in np.ndindex(*(3,) * d):
        o = tuple(v - 1 for v in o)
        if not any(o) or N == 1:
            continue
        r2 = sum(((oi + m) * h) ** 2 for oi, m in zip(o, mesh))
        K[tuple(c + oi for c, oi in zip(centre, o))] = float(np.sum(wmesh * r2 ** ((alpha - d) / 2)))
    return K


def riesz_potential(mu: DiscreteMeasure, alpha: float) -> GridFunction:
    """``I_alpha mu`` at leaf centers, each cell's mass spread uniformly over the cell."""
    r = mu.root
    if not 0 < alpha < r.d:
        raise ValueError(f"alpha must lie in (0, d) with d={r.d}, got {alpha}")
    K = kernel_table(r.d, r.n, alpha, r.leaf_side)
    m = mu.array
    full = signal.convolve(m, K, mode="full", method="direct")
    N = 1 << r.n
    sl = tuple(slice(N - 1, 2 * N - 1) for _ in range(r.d))
    return GridFunction(r, full[sl].reshape(-1) / gamma_riesz(alpha, r.d))


def splitting_series(d: int, alpha: float, eps: float, terms: int | None = None) -> dict:
    """Closed forms (and partial sums) of the two geometric series in the embedding bound."""
    a = d - alpha
    first = 2.0 ** (a + eps) / (2.0 ** eps - 1.0)
    second = 2.0 ** a
    out = {"near_series": first, "far_series": second}
    if terms is not None:
        k = np.arange(1, terms + 1)
        out["near_partial"] = float(np.sum(2.0 ** (k * a) * 2.0 ** ((1 - k) * (a + eps))))
        out["far_partial"] = float(np.sum(2.0 ** (-k * (a + 1)) * 2.0 ** ((k + 1) * a)))
    return out


def adams_embedding_check(mu: DiscreteMeasure, alpha: float, eps: float) -> dict:
    """Ratio of the ``(d - alpha + eps)``-seminorm of ``I_alpha mu`` to the Morrey norm of ``mu``."""
    from .bmo import seminorm_dyadic
    r = mu.root
    if not 0 < eps <= alpha:
        raise ValueError(f"eps must lie in (0, alpha], got {eps}")
    pot = riesz_potential(mu, alpha)
    beta = r.d - alpha + eps
    osc = seminorm_dyadic(pot, beta)
    mn = morrey_norm(mu, r.d - alpha)
    ratio = osc / mn.value if mn.value > 0 else 0.0
    rep = {"n": r.n, "alpha": alpha, "eps": eps, "beta": beta, "seminorm": osc,
           "morrey_norm": mn.value, "morrey_cube": str(mn.cube), "ratio": ratio,
           "gamma": gamma_riesz(alpha, r.d)}
    rep.update(splitting_series(r.d, alpha, eps, terms=r.n))
    return rep


def divergence_example(spec: IFSSpec, alpha: float, n_sweep, eps: float = 0.25) -> dict:
    """Energy and Choquet norms of ``I_alpha mu`` as the resolution grows."""
    d = spec.d
    target = d - alpha
    dim = spec.similarity_dimension()
    rows = []
    for n in n_sweep:
        mu = hutchinson_measure(spec, RootCube(d, n))
        pot = riesz_potential(mu, alpha)
        rows.append({"n": n,
                     "energy": float(np.dot(pot.values, mu.masses)),
                     "norm_critical": choquet_integral(pot, target),
                     "norm_eps": choquet_integral(pot, target + eps)})

    def trend(key):
        v = [row[key] for row in rows]
        inc = np.diff(v)
        rising = bool(np.all(inc > 0))
        steady = bool(len(inc) < 2 or inc[-1] >= 0.5 * inc[-2])
        return rising, steady

    e_up, e_steady = trend("energy")
    c_up, c_steady = trend("norm_critical")
    last = [row["norm_eps"] for row in rows[-2:]]
    change = abs(last[-1] - last[0]) / abs(last[0]) if len(last) == 2 and last[0] else 0.0
    return {"alpha": alpha, "eps": eps, "dimension": dim, "dimension_match": abs(dim - target) < 1e-9,
            "rows": rows, "energy_increasing": e_up, "energy_non_collapsing": e_steady,
            "norm_increasing": c_up, "norm_non_collapsing": c_steady,
            "eps_last_change": change,
            "diverging": e_up and e_steady and c_up and c_steady}
