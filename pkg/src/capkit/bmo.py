"""Mean oscillation against the dyadic content and exponential decay checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .content import check_beta
from .grid import DyadicCube, GridFunction, RootCube, level_indices, morton_perm, restrict

_INVPHI = (math.sqrt(5) - 1) / 2


def _rows_integral(H, d, depth, beta, leaf_side):
    return _engine.choquet_rows(H, d, depth, beta, leaf_side)


def _row_searchsorted(V: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Left insertion points of ``T[r, i]`` into the sorted row ``V[r]``."""
    R, L = V.shape
    lo = np.zeros(T.shape, dtype=np.int64)
    hi = np.full(T.shape, L, dtype=np.int64)
    rows = np.arange(R)[:, None]
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        go = (lo < hi) & (V[rows, np.minimum(mid, L - 1)] < T)
        lo = np.where(go, mid + 1, lo)
        hi = np.where(go | (lo >= hi), hi, mid)
    return lo


def _golden(U, d, depth, beta, leaf_side, power=1.0, rtol=1e-10):
    """Row-wise golden-section search for the minimizer of ``int |U - c|^power``.

    Returns the final brackets and the best point found.
    """
    R = U.shape[0]
    a = U.min(axis=1)
    b = U.max(axis=1)
    tol = rtol * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))

    def g(c):
        return _rows_integral(np.abs(U - c[:, None]) ** power, d, depth, beta, leaf_side)

    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(400):
        live = (b - a) > tol
        if not live.any():
            break
        left = f1 <= f2
        # minimizer in [a, x2] when f1 <= f2, else in [x1, b]
        na = np.where(left, a, x1)
        nb = np.where(left, x2, b)
        nx1 = np.where(left, nb - _INVPHI * (nb - na), x2)
        nx2 = np.where(left, x1, na + _INVPHI * (nb - na))
        newc = np.where(left, nx1, nx2)
        fn = g(newc)
        nf1 = np.where(left, fn, f2)
        nf2 = np.where(left, f1, fn)
        a, b = np.where(live, na, a), np.where(live, nb, b)
        x1, x2 = np.where(live, nx1, x1), np.where(live, nx2, x2)
        f1, f2 = np.where(live, nf1, f1), np.where(live, nf2, f2)
    return a, b, g


def _nearest_kink(V, x, a, b):
    """Per row, the pair midpoint of sorted values ``V`` nearest ``x``, if within ``[a, b]``."""
    R, L = V.shape
    k = _row_searchsorted(V, 2.0 * x[:, None] - V)
    rows = np.arange(R)[:, None]
    best = np.full(R, np.inf)
    kink = x.copy()
    for j in (k - 1, k):
        jj = np.clip(j, 0, L - 1)
        m = 0.5 * (V + V[rows, jj])
        dist = np.abs(m - x[:, None])
        i = np.argmin(dist, axis=1)
        dm = dist[np.arange(R), i]
        better = dm < best
        best = np.where(better, dm, best)
        kink = np.where(better, m[np.arange(R), i], kink)
    slack = 1e-12 * np.maximum(1.0, np.abs(x))
    return kink, (kink >= a - slack) & (kink <= b + slack)


def _leftmost(U, V, c, val, d, depth, beta, leaf_side):
    """Left end of the flat piece of a piecewise-linear convex ``g`` that contains ``c``."""
    def g(x):
        return _rows_integral(np.abs(U - x[:, None]), d, depth, beta, leaf_side)

    tol = 1e-12 * np.maximum(np.abs(val), 1e-300)
    lo, hi = V[:, 0].copy(), c.copy()
    at_lo = g(lo) <= val + tol
    scale = np.maximum(1.0, np.abs(V).max(axis=1))
    for _ in range(200):
        live = ~at_lo & (hi - lo > 1e-13 * scale)
        if not live.any():
            break
        mid = 0.5 * (lo + hi)
        flat = g(mid) <= val + tol
        hi = np.where(live & flat, mid, hi)
        lo = np.where(live & ~flat, mid, lo)
    kink, ok = _nearest_kink(V, hi, lo, hi)
    ok &= ~at_lo
    gk = g(np.where(ok, kink, hi))
    out = np.where(ok & (gk <= val + tol), kink, hi)
    return np.where(at_lo, V[:, 0], out)


def _best_rows(U, d, depth, beta, leaf_side):
    """Smallest minimizer of ``c -> int |U_r - c|`` for each row, and the minimum.

    The function is convex and piecewise linear with kinks only at midpoints
    of pairs of values, so after bracketing, the kink nearest the bracket
    center is tried alongside the center itself.  Rows where the minimum is
    attained on a whole interval are then walked to its left end.
    """
    U = np.asarray(U, dtype=np.float64)
    R, L = U.shape
    a, b, g = _golden(U, d, depth, beta, leaf_side)
    mid = 0.5 * (a + b)
    V = np.sort(U, axis=1)
    kink, use_kink = _nearest_kink(V, mid, a - (b - a), b + (b - a))
    gm = g(mid)
    gk = np.where(use_kink, g(np.where(use_kink, kink, mid)), np.inf)
    tie = np.abs(gk - gm) <= 1e-12 * np.maximum(1e-300, np.abs(gm))
    pick_k = (gk < gm) | (tie & (kink < mid))
    c = np.where(pick_k, kink, mid)
    val = np.where(pick_k, gk, gm)
    const = V[:, 0] == V[:, -1]
    # a flat minimum extends left of c when g is still minimal a few tolerances away
    step = 4e-10 * np.maximum(1.0, np.abs(V).max(axis=1))
    probe = np.maximum(c - step, V[:, 0])
    flat = ~const & (c > V[:, 0]) & (g(probe) <= val + 1e-12 * np.maximum(np.abs(val), 1e-300))
    if flat.any():
        c[flat] = _leftmost(U[flat], V[flat], c[flat], val[flat], d, depth, beta, leaf_side)
    c = np.where(const, V[:, 0], c)
    val = np.where(const, 0.0, val)
    return c, val


@dataclass(frozen=True)
class OscillationResult:
    cube: DyadicCube
    c_Q: float
    oscillation: float


def best_constant(u: GridFunction, beta: float, cube: DyadicCube | None = None) -> OscillationResult:
    """Minimizing constant of ``c -> int_Q |u - c|`` and the normalized minimum."""
    r = u.root
    beta = check_beta(beta, r.d)
    cube = cube if cube is not None else r.top
    r.validate(cube)
    sub = restrict(u, cube).root if cube.level else r
    w = restrict(u, cube) if cube.level else u
    c, val = _best_rows(w.morton[None, :], r.d, sub.n, beta, sub.leaf_side)
    return OscillationResult(cube, float(c[0]), float(val[0]) / sub.side ** beta)


def oscillation_table(u: GridFunction, beta: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(c_Q, oscillation)`` for every dyadic cube, level 0 first, Morton order."""
    r = u.root
    beta = check_beta(beta, r.d)
    out = []
    for m in range(r.n + 1):
        U = _engine.blocks(u.morton, r.d, r.n, m)
        if m == r.n:
            out.append((U[:, 0].copy(), np.zeros(U.shape[0])))
            continue
        c, val = _best_rows(U, r.d, r.n - m, beta, r.leaf_side)
        out.append((c, val / r.side_at(m) ** beta))
    return out


def seminorm_dyadic(u: GridFunction, beta: float) -> float:
    """Largest normalized oscillation over all dyadic subcubes of the root."""
    return max(float(osc.max()) for _, osc in oscillation_table(u, beta))


def argmax_cube(u: GridFunction, beta: float) -> tuple[DyadicCube, float]:
    best, where = -1.0, None
    for m, (_, osc) in enumerate(oscillation_table(u, beta)):
        i = int(np.argmax(osc))
        if osc[i] > best:
            best, where = float(osc[i]), DyadicCube(m, tuple(int(x) for x in level_indices(u.root.d, m)[i]))
    return where, best


def lattice_offsets(d: int, n: int, shifts: int) -> list[tuple[int, ...]]:
    """Leaf-aligned lattice origins; the first is the unshifted lattice."""
    # additive recurrence on the generalized golden ratio of dimension d
    phi = 2.0
    for _ in range(64):
        phi = (1 + phi) ** (1.0 / (d + 1))
    alpha = [phi ** -(j + 1) for j in range(d)]
    N = 1 << n
    return [tuple(int(((k * a) % 1.0) * N) for a in alpha) for k in range(shifts)]


def _shifted_blocks(arr: np.ndarray, d: int, n: int, level: int, offset) -> np.ndarray:
    w = 1 << (n - level)
    N = 1 << n
    starts = [np.arange(o % w, N - w + 1, w) for o in offset]
    if any(s.size == 0 for s in starts):
        return np.empty((0, w ** d))
    win = np.lib.stride_tricks.sliding_window_view(arr, (w,) * d)
    sel = win[np.ix_(*starts)]
    flat = sel.reshape(-1, w ** d)
    return flat[:, morton_perm(d, n - level)]


def seminorm_sampled(u: GridFunction, beta: float, shifts: int = 8) -> dict:
    """Dyadic seminorm and its max over shifted lattices inside the root."""
    r = u.root
    beta = check_beta(beta, r.d)
    if shifts < 1:
        raise ValueError(f"shifts must be >= 1, got {shifts}")
    dyadic = seminorm_dyadic(u, beta)
    best = dyadic
    per_shift = [dyadic]
    for off in lattice_offsets(r.d, r.n, shifts)[1:]:
        s = 0.0
        for m in range(r.n):
            U = _shifted_blocks(u.array, r.d, r.n, m, off)
            if U.shape[0] == 0:
                continue
            _, val = _best_rows(U, r.d, r.n - m, beta, r.leaf_side)
            s = max(s, float(val.max()) / r.side_at(m) ** beta)
        per_shift.append(s)
        best = max(best, s)
    return {"dyadic": dyadic, "sampled": best, "per_shift": per_shift,
            "offsets": lattice_offsets(r.d, r.n, shifts)}


# -- exponential decay -------------------------------------------------------------

@dataclass(frozen=True)
class JNConstants:
    beta: float
    c_beta: float
    Cprime: float
    C_equiv: float
    C: float
    c: float


def jn_constants(beta: float, cprime: float, c_equiv: float = 1.0) -> JNConstants:
    if not cprime > 1:
        raise ValueError(f"packing constant must exceed 1, got {cprime}")
    c_beta = 1.0 + 2.0 ** beta
    C = c_equiv * math.exp(1.0 / (cprime * math.e) + 1.0)
    c = (1.0 / c_equiv) / (cprime * c_beta * math.e)
    return JNConstants(beta, c_beta, cprime, c_equiv, C, c)


@dataclass(frozen=True)
class DecayFit:
    thresholds: np.ndarray
    contents: np.ndarray
    c_fit: float
    C_fit: float
    r2: float
    c_Q: float
    norm: float


def decay_curve(u: GridFunction, beta: float, cube: DyadicCube | None = None,
                norm: float | None = None) -> DecayFit:
    """Contents of ``{|u - c_Q| > t}`` at ``t = 0`` and every breakpoint, plus a log-linear fit.

    The fit uses thresholds ``t >= (1 + 2^beta) * norm`` with positive content,
    or every positive point when that tail has fewer than two.
    """
    r = u.root
    norm = seminorm_dyadic(u, beta) if norm is None else norm
    if norm <= 0:
        raise ValueError("zero seminorm: u is constant on the root up to rounding")
    res = best_constant(u, beta, cube)
    w = restrict(u, res.cube) if res.cube.level else u
    h = np.abs(w.morton - res.c_Q)
    sub = w.root
    _, (V, W) = _engine.choquet_rows(h[None, :], r.d, sub.n, beta, sub.leaf_side, events=True)
    ev = _engine.LayerEvents(V[0], W[0])
    t = np.concatenate([[0.0], np.unique(h[h > 0])])
    cont = ev.content_above(t)
    scale = sub.side ** beta
    pos = cont > 0
    tail = pos & (t >= (1 + 2.0 ** beta) * norm)
    if tail.sum() < 2:
        tail = pos
    c_fit = C_fit = r2 = float("nan")
    if tail.sum() >= 2 and np.ptp(t[tail]) > 0:
        x = t[tail] / norm
        y = np.log(cont[tail] / scale)
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        ss = np.sum((y - y.mean()) ** 2)
        c_fit, C_fit = float(-slope), float(math.exp(icpt))
        r2 = float(1 - np.sum(resid ** 2) / ss) if ss > 0 else 1.0
    return DecayFit(t, cont, c_fit, C_fit, r2, res.c_Q, norm)


def jn_verify(u: GridFunction, beta: float, consts: JNConstants, norm: float | None = None) -> dict:
    """Check the exponential bound on every dyadic cube and every threshold.

    On ``[v_{j+1}, v_j)`` the content of ``{|u - c_Q| > t}`` is constant and
    the bound decreases, so comparing the content of ``{|u - c_Q| >= v_j}``
    against the bound at ``v_j`` covers every ``t``.
    """
    r = u.root
    beta = check_beta(beta, r.d)
    table = oscillation_table(u, beta)
    norm = max(float(o.max()) for _, o in table) if norm is None else norm
    if norm <= 0:
        raise ValueError("zero seminorm: u is constant on the root up to rounding")
    worst = 0.0
    where = None
    pairs = 0
    for m, (c, _) in enumerate(table):
        U = _engine.blocks(u.morton, r.d, r.n, m)
        H = np.abs(U - c[:, None])
        _, (V, W) = _engine.choquet_rows(H, r.d, r.n - m, beta, r.leaf_side, events=True)
        S = np.cumsum(W, axis=1)
        bound = consts.C * r.side_at(m) ** beta * np.exp(-consts.c * V / norm)
        ratio = np.where(V > 0, S / bound, 0.0)
        # t = 0 side: content of {h > 0} against C l^beta
        ratio0 = S[:, -1] / (consts.C * r.side_at(m) ** beta)
        ratio = np.maximum(ratio.max(axis=1), ratio0)
        pairs += int(np.count_nonzero(V > 0)) + U.shape[0]
        i = int(np.argmax(ratio))
        if ratio[i] > worst:
            worst = float(ratio[i])
            where = DyadicCube(m, tuple(int(x) for x in level_indices(r.d, m)[i]))
    return {"max_ratio": worst, "worst_cube": str(where) if where else None,
            "log_slack": -math.log(worst) if worst > 0 else float("inf"),
            "pairs_checked": pairs, "norm": norm, "passed": worst <= 1.0,
            "constants": consts.__dict__}


def exp_bound_constant(consts: JNConstants, cprime: float) -> float:
    """``1 + C * int_1^inf t^(-c/c') dt``."""
    q = consts.c / cprime
    if q <= 1:
        raise ValueError(f"need c' < c = {consts.c:.6g}, got {cprime}")
    return 1.0 + consts.C / (q - 1.0)


def exp_integrability(u: GridFunction, beta: float, consts: JNConstants, cprime: float,
                      norm: float | None = None) -> dict:
    """Integral of ``exp(c' |u - c_Q| / ||u||)`` over every dyadic cube, normalized by ``l^beta``."""
    r = u.root
    K = exp_bound_constant(consts, cprime)
    table = oscillation_table(u, beta)
    norm = max(float(o.max()) for _, o in table) if norm is None else norm
    if norm <= 0:
        norm = 1.0
    worst, where = 0.0, None
    for m, (c, _) in enumerate(table):
        U = _engine.blocks(u.morton, r.d, r.n, m)
        H = np.exp(cprime * np.abs(U - c[:, None]) / norm)
        val = _engine.choquet_rows(H, r.d, r.n - m, beta, r.leaf_side) / r.side_at(m) ** beta
        i = int(np.argmax(val))
        if val[i] > worst:
            worst, where = float(val[i]), (m, i)
    cube = DyadicCube(where[0], tuple(int(x) for x in level_indices(r.d, where[0])[where[1]]))
    return {"max_normalized_integral": worst, "bound": K, "worst_cube": str(cube),
            "cprime": cprime, "passed": worst <= K}


def p_oscillation_table(u: GridFunction, beta: float, p: float) -> list[np.ndarray]:
    r = u.root
    beta = check_beta(beta, r.d)
    out = []
    for m in range(r.n):
        U = _engine.blocks(u.morton, r.d, r.n, m)
        a, b, g = _golden(U, r.d, r.n - m, beta, r.leaf_side, power=p)
        mid = 0.5 * (a + b)
        val = np.minimum(g(mid), np.minimum(g(a), g(b)))
        out.append((np.maximum(val, 0.0) / r.side_at(m) ** beta) ** (1.0 / p))
    out.append(np.zeros(1 << (r.d * r.n)))
    return out


def p_seminorm(u: GridFunction, beta: float, p: float) -> float:
    """Sup over dyadic cubes of ``inf_c (l^-beta int |u - c|^p)^(1/p)``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 1:
        return seminorm_dyadic(u, beta)
    return max(float(t.max()) for t in p_oscillation_table(u, beta, p))


# -- composition, restriction, nesting -------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear map through the origin.

    ``slopes[0]`` applies left of ``knots[0]``, ``slopes[i]`` between
    ``knots[i-1]`` and ``knots[i]``, and ``slopes[-1]`` right of the last knot.
    """
    knots: tuple[float, ...]
    slopes: tuple[float, ...]

    def __post_init__(self):
        if len(self.slopes) != len(self.knots) + 1:
            raise ValueError("need one more slope than knots")
        if list(self.knots) != sorted(set(self.knots)):
            raise ValueError("knots must be strictly increasing")

    @property
    def lip(self) -> float:
        return max(abs(s) for s in self.slopes)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = np.asarray(self.knots, dtype=np.float64)
        s = np.asarray(self.slopes, dtype=np.float64)
        pts = np.concatenate([[0.0], k])
        order = np.argsort(pts, kind="stable")
        pts = pts[order]
        # value at each knot, integrating the slope from 0
        vals = np.zeros_like(pts)
        z = int(np.flatnonzero(order == 0)[0])
        piece = np.searchsorted(k, pts, side="right")  # slope index right of each point
        for i in range(z + 1, len(pts)):
            vals[i] = vals[i - 1] + s[piece[i - 1]] * (pts[i] - pts[i - 1])
        for i in range(z - 1, -1, -1):
            vals[i] = vals[i + 1] - s[piece[i]] * (pts[i + 1] - pts[i])
        j = np.searchsorted(pts, x, side="right") - 1
        jc = np.clip(j, 0, len(pts) - 1)
        slope_here = np.where(j < 0, s[0], s[np.searchsorted(k, pts[jc], side="right")])
        base = np.where(j < 0, pts[0], pts[jc])
        bval = np.where(j < 0, vals[0], vals[jc])
        return bval + slope_here * (x - base)


def compose_lipschitz(u: GridFunction, phi: PiecewiseLinear, beta: float,
                      base: float | None = None) -> dict:
    if abs(float(phi(0.0))) != 0.0:
        raise ValueError("phi(0) must be 0")
    lhs = seminorm_dyadic(u.with_values(phi(u.values)), beta)
    base = seminorm_dyadic(u, beta) if base is None else base
    rhs = phi.lip * base
    return {"lhs": lhs, "lip": phi.lip, "rhs": rhs, "passed": lhs <= rhs + 1e-9}


def lebesgue_bmo(u: GridFunction) -> float:
    """Classical dyadic mean oscillation: sup over cubes of ``inf_c`` mean ``|u - c|``."""
    r = u.root
    best = 0.0
    for m in range(r.n):
        U = np.sort(_engine.blocks(u.morton, r.d, r.n, m), axis=1)
        med = U[:, (U.shape[1] - 1) // 2]
        best = max(best, float(np.abs(U - med[:, None]).mean(axis=1).max()))
    return best


def restrict_hyperplane(u: GridFunction, k: int, offset=()) -> tuple[GridFunction, dict]:
    """Slice ``u`` along its first ``k`` axes at leaf position ``offset`` of the others."""
    r = u.root
    if not 1 <= k <= r.d:
        raise ValueError(f"k must lie in [1, {r.d}], got {k}")
    offset = tuple(int(o) for o in offset)
    if len(offset) != r.d - k:
        raise ValueError(f"offset needs {r.d - k} leaf coordinates, got {len(offset)}")
    N = 1 << r.n
    if any(not 0 <= o < N for o in offset):
        raise ValueError(f"offset {offset} outside the leaf range [0, {N})")
    sl = u.array[(Ellipsis,) + offset] if offset else u.array
    root = RootCube(k, r.n, r.origin[:k], r.side)
    g = GridFunction(root, np.ascontiguousarray(sl).reshape(-1))
    slice_bmo = lebesgue_bmo(g)
    full = seminorm_dyadic(u, float(k))
    rep = {"k": k, "offset": list(offset), "slice_bmo": slice_bmo, "full_seminorm": full,
           "ratio": slice_bmo / full if full > 0 else (0.0 if slice_bmo == 0 else math.inf)}
    if k == r.d:
        rep["classical"] = lebesgue_bmo(u)
    return g, rep


def nesting_bound(alpha: float, beta: float, consts_alpha: JNConstants) -> float:
    """Constant from integrating the decay bound raised to ``beta/alpha``."""
    q = beta / alpha
    return consts_alpha.C ** q / (consts_alpha.c * q)


def nesting_check(u: GridFunction, alpha: float, beta: float, cprime_alpha: float) -> dict:
    r = u.root
    if alpha > beta:
        raise ValueError(f"need alpha <= beta, got {alpha} > {beta}")
    check_beta(beta, r.d)
    check_beta(alpha, r.d)
    na = seminorm_dyadic(u, alpha)
    nb = seminorm_dyadic(u, beta)
    consts = jn_constants(alpha, cprime_alpha)
    K = nesting_bound(alpha, beta, consts)
    # power inequality on the superlevel sets of |u - c| at the root
    c0 = best_constant(u, alpha).c_Q
    h = np.abs(u.morton - c0)
    _, (Va, Wa) = _engine.choquet_rows(h[None, :], r.d, r.n, alpha, r.leaf_side, events=True)
    _, (Vb, Wb) = _engine.choquet_rows(h[None, :], r.d, r.n, beta, r.leaf_side, events=True)
    t = np.concatenate([[0.0], np.unique(h[h > 0])])
    ca = _engine.LayerEvents(Va[0], Wa[0]).content_above(t)
    cb = _engine.LayerEvents(Vb[0], Wb[0]).content_above(t)
    power_viol = int(np.sum(cb > ca ** (beta / alpha) * (1 + 1e-12) + 1e-300))
    ratio = nb / na if na > 0 else 0.0
    return {"alpha": alpha, "beta": beta, "norm_alpha": na, "norm_beta": nb,
            "ratio": ratio, "bound": K, "power_violations": power_viol,
            "passed": ratio <= K and power_viol == 0}
