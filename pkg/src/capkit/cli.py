"""``capkit`` command line.

Every command writes a JSON report ``<command>-<hash>.json`` to ``--out-dir``.
Exit status: 0 when every check passes, 1 on unreadable or malformed input
files, 2 on invalid parameters, 3 when a checked bound fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import bmo, calculus, choquet, content, corpus, potential, suite
from .grid import (DyadicSet, FormatError, GridError, RootCube, parse_cube,
                   read_grid, write_grid)
from .report import file_digest, write_report

EXIT_IO, EXIT_USAGE, EXIT_CHECK = 1, 2, 3


class UsageError(ValueError):
    pass


def _load(path, tag):
    return read_grid(path, expect=tag)


def _beta(args, d, key="beta"):
    val = getattr(args, key)
    try:
        return content.check_beta(val, d)
    except ValueError as e:
        raise UsageError(f"--{key}: {e}") from None


def _cube(args, root):
    if not getattr(args, "cube", None):
        return None
    try:
        c = parse_cube(args.cube)
        root.validate(c)
    except GridError as e:
        raise UsageError(f"--cube: {e}") from None
    return c


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit_csv(args, text):
    if getattr(args, "csv", None):
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------------

def cmd_content(args):
    E = _load(args.set, "dst v1")
    beta = _beta(args, E.root.d)
    cube = _cube(args, E.root)
    val = content.dyadic_content(E, beta, cube)
    res = {"content": val, "cover": [str(c) for c in content.optimal_cover(E, beta)]}
    if args.bracket:
        br = content.spherical_bracket(E, beta)
        res["bracket"] = br.__dict__
        print(f"{br.lower!r},{br.dyadic_value!r},{br.upper!r}")
        return res, {"bracket_ordered": br.lower <= br.upper}
    print(repr(val))
    return res, {}


def cmd_choquet(args):
    f = _load(args.grid, "dgf v1")
    beta = _beta(args, f.root.d)
    cube = _cube(args, f.root)
    if np.any(f.values < 0):
        raise UsageError("--grid: values must be nonnegative for the Choquet integral")
    val = choquet.choquet_integral(f, beta, cube)
    print(repr(val))
    return {"integral": val}, {}


def cmd_maximal(args):
    f = _load(args.grid, "dgf v1")
    beta = _beta(args, f.root.d)
    Mf = calculus.maximal_function(f, beta)
    if args.out:
        write_grid(args.out, Mf)
    dom = bool(np.all(Mf.values >= np.abs(f.values)))
    return {"max": float(Mf.values.max()), "out": args.out}, {"dominates": dom}


def cmd_czd(args):
    f = _load(args.grid, "dgf v1")
    beta = _beta(args, f.root.d)
    try:
        dec = calculus.cz_decompose(f, beta, args.lam, _cube(args, f.root))
    except ValueError as e:
        raise UsageError(f"--lambda: {e}") from None
    rows = [[c.level, *c.index, repr(a)] for c, a in zip(dec.cubes, dec.averages)]
    _emit_csv(args, _csv(rows, ["level"] + [f"i{k}" for k in range(f.root.d)] + ["average"]))
    if args.cube:
        # only the base cube is decomposed, so the complement bound is checked inside it
        inside = calculus.CubeFamily(f.root, (parse_cube(args.cube),)).mask().mask
        f = f.with_values(np.where(inside, f.values, 0.0))
    chk = calculus.cz_check(f, dec, beta)
    return {"cubes": len(dec.cubes)}, {"sandwich_and_complement": chk}


def maximal_cubes(E: DyadicSet):
    """The maximal dyadic cubes contained in ``E``."""
    r = E.root
    out = []
    covered = np.zeros(1, dtype=bool)
    for m in range(r.n + 1):
        if m:
            covered = np.repeat(covered, 1 << r.d)
        full = E.morton.reshape(1 << (r.d * m), -1).all(axis=1)
        take = full & ~covered
        out.extend(calculus._cubes_at(r.d, m, np.flatnonzero(take)))
        covered = covered | take
    return out


def cmd_ov(args):
    E = _load(args.set, "dst v1")
    beta = _beta(args, E.root.d)
    fam = calculus.CubeFamily(E.root, tuple(maximal_cubes(E)))
    sel = calculus.melnikov_select(fam, beta)
    problems = calculus.ov_postconditions(fam, sel, beta)
    res = {"family": [str(c) for c in fam], "subfamily": [str(c) for c in sel.subfamily],
           "ancestors": [str(c) for c in sel.ancestors],
           "packing_constant_observed": sel.packing_constant_observed}
    print(f"family={len(fam)} subfamily={len(sel.subfamily)} ancestors={len(sel.ancestors)}")
    return res, {"postconditions": {"passed": not problems, "problems": problems}}


def cmd_bmo(args):
    u = _load(args.grid, "dgf v1")
    beta = _beta(args, u.root.d)
    if args.shifts < 1:
        raise UsageError("--shifts: must be >= 1")
    if args.p < 1:
        raise UsageError("--p: must be >= 1")
    sam = bmo.seminorm_sampled(u, beta, args.shifts)
    res = {"seminorm": sam["dyadic"], "sampled": sam["sampled"], "per_shift": sam["per_shift"]}
    checks = {}
    line = f"{sam['dyadic']!r}"
    if args.p != 1:
        ps = bmo.p_seminorm(u, beta, args.p)
        res["p_seminorm"] = ps
        checks["holder"] = ps >= sam["dyadic"] * (1 - 1e-9)
        line += f",{ps!r}"
    print(line)
    return res, checks


def _cprime(args, d, beta, n):
    if args.cprime is not None:
        if not args.cprime > 1:
            raise UsageError("--cprime: must exceed 1")
        return args.cprime, None
    m = calculus.measure_packing_constant(d, beta, min(n, 6), np.random.default_rng(args.seed))
    return max(m["cprime"], 1.0 + 1e-9), m


def cmd_jn(args):
    u = _load(args.grid, "dgf v1")
    beta = _beta(args, u.root.d)
    cp, meas = _cprime(args, u.root.d, beta, u.root.n)
    consts = bmo.jn_constants(beta, cp, args.c_equiv)
    norm = bmo.seminorm_dyadic(u, beta)
    if norm == 0:
        raise UsageError("--grid: zero seminorm (constant input)")
    rep = bmo.jn_verify(u, beta, consts, norm)
    fit = bmo.decay_curve(u, beta, norm=norm)
    bound = consts.C * u.root.side ** beta * np.exp(-consts.c * fit.thresholds / norm)
    _emit_csv(args, _csv([[repr(float(t)), repr(float(c)), repr(float(b))] for t, c, b in
                          zip(fit.thresholds, fit.contents, bound)], ["t", "content", "bound"]))
    res = {"constants": consts.__dict__, "norm": norm, "max_ratio": rep["max_ratio"],
           "worst_cube": rep["worst_cube"], "log_slack": rep["log_slack"],
           "fit": {"c_fit": fit.c_fit, "C_fit": fit.C_fit, "r2": fit.r2, "c_Q": fit.c_Q},
           "packing_measurement": meas}
    return res, {"decay_bound": rep["passed"]}


def cmd_expint(args):
    u = _load(args.grid, "dgf v1")
    beta = _beta(args, u.root.d)
    cp, meas = _cprime(args, u.root.d, beta, u.root.n)
    consts = bmo.jn_constants(beta, cp)
    if args.fraction <= 0 or args.fraction >= 1:
        raise UsageError("--fraction: c'/c must lie in (0, 1)")
    rep = bmo.exp_integrability(u, beta, consts, consts.c * args.fraction)
    print(f"{rep['max_normalized_integral']!r},{rep['bound']!r}")
    return {**rep, "constants": consts.__dict__, "packing_measurement": meas}, \
        {"integral_bound": rep["passed"]}


def cmd_nesting(args):
    u = _load(args.grid, "dgf v1")
    a = _beta(args, u.root.d, "alpha")
    b = _beta(args, u.root.d)
    if a > b:
        raise UsageError("--alpha: must not exceed --beta")
    cp, _ = _cprime(args, u.root.d, a, u.root.n)
    rep = bmo.nesting_check(u, a, b, cp)
    print(f"{rep['ratio']!r},{rep['bound']!r}")
    return rep, {"nesting": rep["passed"]}


def cmd_restrict(args):
    u = _load(args.grid, "dgf v1")
    try:
        g, rep = bmo.restrict_hyperplane(u, args.k, args.offset or ())
    except ValueError as e:
        raise UsageError(f"--k/--offset: {e}") from None
    if args.out:
        write_grid(args.out, g)
    print(f"{rep['slice_bmo']!r},{rep['full_seminorm']!r}")
    checks = {}
    if args.k == u.root.d:
        full = rep["full_seminorm"]
        checks["full_dimension_identity"] = abs(rep["classical"] - full) <= 1e-9 * max(1.0, full)
    return rep, checks


def cmd_compose(args):
    u = _load(args.grid, "dgf v1")
    beta = _beta(args, u.root.d)
    try:
        phi = bmo.PiecewiseLinear(tuple(args.knots or ()), tuple(args.slopes))
        rep = bmo.compose_lipschitz(u, phi, beta)
    except ValueError as e:
        raise UsageError(f"--knots/--slopes: {e}") from None
    print(f"{rep['lhs']!r},{rep['rhs']!r}")
    return rep, {"lipschitz_bound": rep["passed"]}


def _spec(path):
    try:
        return potential.read_ifs(path)
    except ValueError as e:
        raise FormatError(str(e)) from None


def cmd_gen_fractal(args):
    spec = _spec(args.spec)
    try:
        root = RootCube(spec.d, args.n)
    except GridError as e:
        raise UsageError(f"--n: {e}") from None
    mu = potential.hutchinson_measure(spec, root)
    write_grid(args.out, mu)
    dim = spec.similarity_dimension()
    res = {"dimension": dim, "total_mass": mu.total, "out": args.out}
    if dim > 0:
        r = potential.density_ratios(mu, dim)
        res["density_range"] = [float(r.min()), float(r.max())]
    return res, {}


def _alpha(args, d):
    if not 0 < args.alpha < d:
        raise UsageError(f"--alpha: must lie in (0, d) with d={d}, got {args.alpha}")
    return args.alpha


def cmd_riesz(args):
    mu = _load(args.measure, "dms v1")
    alpha = _alpha(args, mu.root.d)
    pot = potential.riesz_potential(mu, alpha)
    write_grid(args.out, pot)
    return {"gamma": potential.gamma_riesz(alpha, mu.root.d), "max": float(pot.values.max()),
            "out": args.out}, {}


def cmd_adams(args):
    mu = _load(args.measure, "dms v1")
    alpha = _alpha(args, mu.root.d)
    if not 0 < args.eps <= alpha:
        raise UsageError(f"--eps: must lie in (0, alpha], got {args.eps}")
    rep = potential.adams_embedding_check(mu, alpha, args.eps)
    print(repr(rep["ratio"]))
    return rep, {"finite_ratio": bool(np.isfinite(rep["ratio"]))}


def cmd_diverge(args):
    spec = _spec(args.spec)
    alpha = _alpha(args, spec.d)
    rep = potential.divergence_example(spec, alpha, args.n_sweep, args.eps)
    _emit_csv(args, _csv([[r["n"], repr(r["energy"]), repr(r["norm_critical"]), repr(r["norm_eps"])]
                          for r in rep["rows"]], ["n", "energy", "norm_critical", "norm_eps"]))
    checks = {}
    if rep["dimension_match"]:
        checks["diverging"] = rep["diverging"]
    return rep, checks


def cmd_corpus(args):
    try:
        root = RootCube(args.d, args.n)
        obj = corpus.corpus_generate(args.seed, args.kind, root)
    except (GridError, ValueError) as e:
        raise UsageError(f"--kind/--d/--n: {e}") from None
    write_grid(args.out, obj)
    return {"kind": args.kind, "out": args.out}, {}


def cmd_suite(args):
    results = suite.run_all(args.seed, only=set(args.only or ()), echo=print)
    res = {f"{r.number:02d}": {"title": r.title, "passed": r.passed, "summary": r.summary}
           for r in results}
    return res, {f"criterion_{r.number:02d}": r.passed for r in results}


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capkit", description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="capkit-reports", help="report directory")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="fixed summation order (recorded only; all paths are sequential)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(fn=fn)
        return sp

    s = add("content", cmd_content, "dyadic content of a set")
    s.add_argument("--set", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--cube")
    s.add_argument("--bracket", action="store_true")

    s = add("choquet", cmd_choquet, "Choquet integral of a nonnegative grid")
    s.add_argument("--grid", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--cube")

    s = add("maximal", cmd_maximal, "capacitary maximal function")
    s.add_argument("--grid", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--out")

    s = add("czd", cmd_czd, "stopping-time decomposition at a height")
    s.add_argument("--grid", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--cube")
    s.add_argument("--csv")

    s = add("ov", cmd_ov, "covering selection on the maximal cubes of a set")
    s.add_argument("--set", required=True)
    s.add_argument("--beta", type=float, required=True)

    s = add("bmo", cmd_bmo, "dyadic, shifted and p-seminorms")
    s.add_argument("--grid", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--shifts", type=int, default=1)

    for name, fn, help in (("jn", cmd_jn, "exponential decay check with CSV curve"),
                           ("expint", cmd_expint, "exponential integrability check")):
        s = add(name, fn, help)
        s.add_argument("--grid", required=True)
        s.add_argument("--beta", type=float, required=True)
        s.add_argument("--cprime", type=float, help="packing constant (measured when omitted)")
        if name == "jn":
            s.add_argument("--c-equiv", type=float, default=1.0)
            s.add_argument("--csv")
        else:
            s.add_argument("--fraction", type=float, default=0.5, help="c'/c")

    s = add("nesting", cmd_nesting, "compare seminorms at two exponents")
    s.add_argument("--grid", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--cprime", type=float)

    s = add("restrict", cmd_restrict, "slice along the first k axes")
    s.add_argument("--grid", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--offset", type=int, nargs="*")
    s.add_argument("--out")

    s = add("compose", cmd_compose, "seminorm of a piecewise-linear image")
    s.add_argument("--grid", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--knots", type=float, nargs="*")
    s.add_argument("--slopes", type=float, nargs="+", required=True)

    s = add("gen-fractal", cmd_gen_fractal, "self-similar measure from a map file")
    s.add_argument("--spec", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)

    s = add("riesz", cmd_riesz, "Riesz potential of a measure")
    s.add_argument("--measure", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--out", required=True)

    s = add("adams", cmd_adams, "potential seminorm over Morrey norm")
    s.add_argument("--measure", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)

    s = add("diverge", cmd_diverge, "energy and norms across resolutions")
    s.add_argument("--spec", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--n-sweep", type=int, nargs="+", default=[6, 8, 10, 12])
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--csv")

    s = add("corpus", cmd_corpus, "write a seeded test input")
    s.add_argument("--kind", required=True, choices=corpus.KINDS)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)

    s = add("suite", cmd_suite, "run the acceptance battery")
    s.add_argument("--only", type=int, nargs="*")
    return p


_INPUT_KEYS = ("set", "grid", "measure", "spec")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k not in ("fn", "out_dir")}
    try:
        inputs = {k: file_digest(config[k]) for k in _INPUT_KEYS if config.get(k)}
    except FileNotFoundError as e:
        print(f"capkit: no such file: {e.filename}", file=sys.stderr)
        return EXIT_IO
    config["input_sha256"] = inputs
    try:
        results, checks = args.fn(args)
    except UsageError as e:
        print(f"capkit {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, FormatError) as e:
        print(f"capkit {args.command}: {e}", file=sys.stderr)
        return EXIT_IO
    except (GridError, ValueError) as e:
        print(f"capkit {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    path = write_report(args.out_dir, args.command, config, results, checks)
    failed = [k for k, v in checks.items() if not (v.get("passed") if isinstance(v, dict) else v)]
    if failed:
        print(f"capkit {args.command}: failed checks: {', '.join(failed)} (report {path})",
              file=sys.stderr)
        return EXIT_CHECK
    return 0


if __name__ == "__main__":
    sys.exit(main())
