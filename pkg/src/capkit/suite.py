"""The acceptance battery: fourteen numbered checks with fixed tolerances."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import oracles
from .bmo import (PiecewiseLinear, compose_lipschitz, exp_integrability, jn_constants,
                  jn_verify, lebesgue_bmo, p_seminorm, seminorm_dyadic)
from .calculus import (CubeFamily, PostconditionError, _random_family, cz_check,
                       cz_decompose, level_averages, measure_packing_constant,
                       melnikov_select, weak_type_check)
from .content import content_many, dyadic_content
from .corpus import jn_corpus, random_ifs, random_step
from .grid import DyadicSet, GridFunction, RootCube
from .potential import (QUARTER_CANTOR, UNIFORM_1D, adams_embedding_check, density_ratios,
                        divergence_example, hutchinson_measure)

# (d, beta) grid for the structural checks; beta must not exceed d
STRUCT_CONFIGS = ((1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0), (2, 1.3))
STRUCT_N = {1: 6, 2: 4}
JN_CONFIGS = ((1, 10, 0.5), (1, 10, 1.0), (2, 6, 1.0), (2, 6, 1.5))
PACKING_NS = (4, 6, 8)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:02d} {self.title}: {self.summary} ({self.seconds:.1f}s)"


def _timed(number, title):
    def wrap(fn):
        def run(seed: int = 0) -> CriterionResult:
            t = time.perf_counter()
            passed, summary, details = fn(seed)
            return CriterionResult(number, title, bool(passed), summary, details,
                                   time.perf_counter() - t)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def _random_mask(rng, size):
    return rng.random(size) < rng.uniform(0.05, 0.95)


@_timed(1, "content oracle")
def criterion_01(seed):
    """Tree recursion against exhaustive and integer-program covers."""
    worst = 0.0
    count = 0
    beta1 = 0.6
    for n in range(4):
        root = RootCube(1, n)
        masks = np.array([[(k >> i) & 1 for i in range(root.ncells)]
                          for k in range(1 << root.ncells)], dtype=bool)
        fast = content_many(masks, root, beta1)
        for m, v in zip(masks, fast):
            worst = max(worst, abs(v - oracles.brute_content(m, 1, n, beta1)))
            count += 1
    rng = np.random.default_rng(seed)
    root = RootCube(2, 3)
    beta2 = 1.3
    for _ in range(500):
        m = _random_mask(rng, root.ncells)
        v = dyadic_content(DyadicSet(root, m), beta2)
        worst = max(worst, abs(v - oracles.ilp_content(m, 2, 3, beta2)))
        count += 1
    return worst <= 1e-12, f"{count} sets, max |diff| = {worst:.2e}", {"max_diff": worst}


@_timed(2, "capacity axioms")
def criterion_02(seed):
    rng = np.random.default_rng(seed)
    total = 0
    for d, beta in STRUCT_CONFIGS:
        root = RootCube(d, STRUCT_N[d])
        for k in range(500):
            E = _random_mask(rng, root.ncells)
            F = E | _random_mask(rng, root.ncells) if k % 3 == 0 else _random_mask(rng, root.ncells)
            masks = np.array([E, F, E | F, E & F])
            cE, cF, cU, cI = content_many(masks, root, beta)
            tol = 1e-9 * max(1.0, cE + cF)
            bad = (cI > min(cE, cF) + tol) or (max(cE, cF) > cU + tol) \
                or (cU > cE + cF + tol) or (cU + cI > cE + cF + tol)
            total += bad
    return total == 0, f"{total} violations over {500 * len(STRUCT_CONFIGS)} pairs", {"violations": total}


POWER_PAIRS = ((1, 0.25, 0.5), (1, 0.5, 1.0), (1, 0.25, 1.0),
               (2, 0.5, 1.0), (2, 1.0, 1.5), (2, 0.5, 2.0), (2, 1.3, 2.0))


@_timed(3, "power inequality")
def criterion_03(seed):
    rng = np.random.default_rng(seed)
    viol = 0
    for d, a, b in POWER_PAIRS:
        root = RootCube(d, STRUCT_N[d])
        masks = np.array([_random_mask(rng, root.ncells) for _ in range(500)])
        ca = content_many(masks, root, a)
        cb = content_many(masks, root, b)
        viol += int(np.sum(cb > ca ** (b / a) * (1 + 1e-12)))
    return viol == 0, f"{viol} violations over {500 * len(POWER_PAIRS)} sets", {"violations": viol}


@_timed(4, "covering selection")
def criterion_04(seed):
    rng = np.random.default_rng(seed)
    fired = 0
    worst = 0.0
    for d, beta in STRUCT_CONFIGS:
        root = RootCube(d, STRUCT_N[d])
        done = 0
        while done < 1000:
            fam = _random_family(root, rng, p_stop=rng.uniform(0.05, 0.6))
            if not fam:
                continue
            done += 1
            try:
                sel = melnikov_select(CubeFamily(root, tuple(fam)), beta)
                worst = max(worst, sel.packing_constant_observed)
            except PostconditionError:
                fired += 1
    return fired == 0 and worst <= 2.0, \
        f"checker fired {fired} times; max packing sum / l^beta = {worst:.4g} (limit 2)", \
        {"fired": fired, "max_packing": worst}


@lru_cache(maxsize=None)
def packing_constant(d: int, beta: float, n: int, seed: int = 0) -> float:
    trials = 100 if d == 1 or n < 8 else 20
    return measure_packing_constant(d, beta, n, np.random.default_rng(seed + n), trials=trials)["cprime"]


def jn_cprime(d: int, beta: float, seed: int = 0) -> float:
    """Measured packing constant for the decay checks, kept strictly above 1."""
    return max(packing_constant(d, beta, PACKING_NS[-1], seed), 1.0 + 1e-9)


@_timed(5, "weak-type bound")
def criterion_05(seed):
    ok = True
    rows = {}
    for d, _, beta in JN_CONFIGS:
        cps, ratios = [], []
        for n in PACKING_NS:
            cp = packing_constant(d, beta, n, seed)
            root = RootCube(d, n)
            wt = max(weak_type_check(f.with_values(np.abs(f.values)), beta)["ratio"]
                     for f in jn_corpus(root, seed + 7).values())
            cps.append(cp)
            ratios.append(wt)
            ok &= wt <= cp * (1 + 1e-12)
        ref = cps[-1]
        stable = all(abs(c - ref) <= 0.1 * ref for c in cps)
        ok &= stable
        rows[f"d={d},beta={beta}"] = {"cprime": cps, "weak_ratio": ratios, "stable": stable}
    summary = "; ".join(f"{k}: C'={min(v['cprime']):.4g}..{max(v['cprime']):.4g}, "
                        f"ratio<={max(v['weak_ratio']):.4g}" for k, v in rows.items())
    return ok, summary, rows


@_timed(6, "stopping-time decomposition")
def criterion_06(seed):
    rng = np.random.default_rng(seed)
    bad = 0
    count = 0
    for d, beta in STRUCT_CONFIGS:
        root = RootCube(d, STRUCT_N[d])
        for k in range(200):
            if k % 2:
                f = random_step(root, rng)
            else:
                f = GridFunction(root, rng.standard_normal(root.ncells) * rng.random(root.ncells) ** 4)
            top = level_averages(f, beta)[0][0]
            lam = top * rng.uniform(1.0, 4.0)
            dec = cz_decompose(f, beta, lam)
            bad += not cz_check(f, dec, beta)["passed"]
            count += 1
    return bad == 0, f"{bad} failures over {count} decompositions", {"failures": bad}


def _jn_inputs(seed):
    for d, n, beta in JN_CONFIGS:
        root = RootCube(d, n)
        for name, u in jn_corpus(root, seed + 7).items():
            yield d, n, beta, name, u


@lru_cache(maxsize=None)
def _norms(seed):
    return {(d, n, beta, name): seminorm_dyadic(u, beta) for d, n, beta, name, u in _jn_inputs(seed)}


@_timed(7, "exponential decay bound")
def criterion_07(seed):
    worst = 0.0
    rows = {}
    norms = _norms(seed)
    for d, n, beta, name, u in _jn_inputs(seed):
        consts = jn_constants(beta, jn_cprime(d, beta, seed))
        rep = jn_verify(u, beta, consts, norms[(d, n, beta, name)])
        rows[f"d={d},n={n},beta={beta},{name}"] = rep["max_ratio"]
        worst = max(worst, rep["max_ratio"])
    return worst <= 1.0, f"{len(rows)} inputs, max content/bound = {worst:.4f}", rows


@_timed(8, "exponential integrability")
def criterion_08(seed):
    worst = 0.0
    rows = {}
    norms = _norms(seed)
    for d, n, beta, name, u in _jn_inputs(seed):
        consts = jn_constants(beta, jn_cprime(d, beta, seed))
        rep = exp_integrability(u, beta, consts, consts.c / 2, norms[(d, n, beta, name)])
        frac = rep["max_normalized_integral"] / rep["bound"]
        rows[f"d={d},n={n},beta={beta},{name}"] = frac
        worst = max(worst, frac)
    return worst <= 1.0, f"max integral / ((1+C) l^beta) = {worst:.4f}", rows


@_timed(9, "p-seminorm equivalence")
def criterion_09(seed):
    norms = _norms(seed)
    sup = {p: 0.0 for p in (1, 2, 3, 4)}
    holder = 0.0
    for d, n, beta, name, u in _jn_inputs(seed):
        s = norms[(d, n, beta, name)]
        for p in sup:
            ps = p_seminorm(u, beta, p)
            sup[p] = max(sup[p], ps / (p * s))
            holder = max(holder, s / ps)
    vals = list(sup.values())
    spread = max(vals) / min(vals)
    finite = all(math.isfinite(v) for v in vals)
    ok = finite and spread < 2.0 and holder <= 1.0 + 1e-9
    summary = ("sup p_sem/(p sem) = " + ", ".join(f"p={p}: {v:.4f}" for p, v in sup.items())
               + f"; spread {spread:.3f}x (limit 2); Holder constant {holder:.6f}")
    return ok, summary, {"sup": sup, "spread": spread, "holder_constant": holder}


COMPOSE_CONFIGS = ((1, 6, 0.5), (1, 6, 1.0), (2, 3, 1.0), (2, 3, 1.5))


def random_phi(rng, lo, hi) -> PiecewiseLinear:
    k = int(rng.integers(1, 5))
    knots = np.unique(rng.uniform(lo, hi, size=k))
    slopes = rng.uniform(-3, 3, size=len(knots) + 1)
    return PiecewiseLinear(tuple(float(x) for x in knots), tuple(float(s) for s in slopes))


@_timed(10, "Lipschitz composition")
def criterion_10(seed):
    rng = np.random.default_rng(seed)
    viol = 0
    lin_err = 0.0
    count = 0
    for d, n, beta in COMPOSE_CONFIGS:
        root = RootCube(d, n)
        for name, u in jn_corpus(root, seed + 7).items():
            base = seminorm_dyadic(u, beta)
            lo, hi = float(u.values.min()), float(u.values.max())
            for _ in range(100):
                rep = compose_lipschitz(u, random_phi(rng, lo, hi), beta, base)
                viol += not rep["passed"]
                count += 1
            for a in (3.0, -2.0, 0.5):
                lhs = seminorm_dyadic(u.with_values(a * u.values), beta)
                lin_err = max(lin_err, abs(lhs - abs(a) * base))
    ok = viol == 0 and lin_err <= 1e-12
    return ok, f"{viol} violations over {count} maps; linear maps max |diff| = {lin_err:.2e}", \
        {"violations": viol, "linear_error": lin_err}


@_timed(11, "restriction, full dimension")
def criterion_11(seed):
    worst = 0.0
    rows = {}
    for d, n, _ in JN_CONFIGS:
        root = RootCube(d, n)
        for name, u in jn_corpus(root, seed + 7).items():
            key = f"d={d},n={n},{name}"
            if key in rows:
                continue
            a = seminorm_dyadic(u, float(d))
            b = lebesgue_bmo(u)
            rows[key] = a / b
            worst = max(worst, abs(a / b - 1))
    return worst <= 1e-9, f"max |ratio - 1| = {worst:.2e} over {len(rows)} inputs", rows


ADAMS_NS = (6, 8, 10)


def adams_measures(seed):
    return {"uniform": UNIFORM_1D, "quarter-cantor": QUARTER_CANTOR,
            "random-ifs": random_ifs(np.random.default_rng(seed + 11))}


@_timed(12, "potential embedding")
def criterion_12(seed):
    ok = True
    rows = {}
    for eps in (0.125, 0.25):
        for name, spec in adams_measures(seed).items():
            rs = [adams_embedding_check(hutchinson_measure(spec, RootCube(1, n)), 0.5, eps)["ratio"]
                  for n in ADAMS_NS]
            spread = max(rs) / min(rs)
            ok &= all(math.isfinite(r) for r in rs) and spread < 2.0
            rows[f"eps={eps},{name}"] = {"ratios": rs, "spread": spread}
    worst = max(v["spread"] for v in rows.values())
    return ok, f"max spread over n in {ADAMS_NS} = {worst:.3f}x (limit 2)", rows


@_timed(13, "endpoint divergence")
def criterion_13(seed):
    rep = divergence_example(QUARTER_CANTOR, 0.5, (6, 8, 10, 12), eps=0.25)
    ok = (rep["dimension_match"] and rep["energy_increasing"] and rep["energy_non_collapsing"]
          and rep["norm_increasing"] and rep["norm_non_collapsing"] and rep["eps_last_change"] < 0.05)
    e = [r["energy"] for r in rep["rows"]]
    return ok, (f"energy {e[0]:.4f} -> {e[-1]:.4f}, increments "
                + ", ".join(f"{x:.4f}" for x in np.diff(e))
                + f"; eps-norm last change {100 * rep['eps_last_change']:.2f}% (limit 5%)"), rep


@_timed(14, "self-similar regularity")
def criterion_14(seed):
    lo, hi = math.inf, -math.inf
    for n in range(1, 13):
        r = density_ratios(hutchinson_measure(QUARTER_CANTOR, RootCube(1, n)), 0.5)
        lo, hi = min(lo, r.min()), max(hi, r.max())
    ok = lo >= 0.5 and hi <= 2.0
    return ok, f"density ratios in [{lo:.4f}, {hi:.4f}] for n <= 12", {"min": lo, "max": hi}


CRITERIA = (criterion_01, criterion_02, criterion_03, criterion_04, criterion_05, criterion_06,
            criterion_07, criterion_08, criterion_09, criterion_10, criterion_11, criterion_12,
            criterion_13, criterion_14)


def run_all(seed: int = 0, only=None, echo=None) -> list[CriterionResult]:
    out = []
    for crit in CRITERIA:
        num = int(crit.__name__.rsplit("_", 1)[1])
        if only and num not in only:
            continue
        res = crit(seed)
        if echo:
            echo(res.line())
        out.append(res)
    return out
