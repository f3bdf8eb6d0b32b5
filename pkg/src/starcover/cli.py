"""Batch command-line front end.

Commands: check-mdd, check-add, exp-add, int-mc, equiv, obstruction,
quantize, star-table, cohomology, selftest.

Exit codes: 0 = pass/constructed, 1 = mathematical failure (violation,
obstruction, non-equivalence, MC failure), 2 = input/schema error.  Output is
deterministic byte-for-byte for fixed inputs and options.
"""

from __future__ import annotations

import argparse
import json
import sys

from .exactalg import AlgebraError
from .params import param_algebra_truncate
from .dgla import MCCheckError, mc_check, MCElement, require_mc
from . import polyvec as pv
from . import polydiff as pd
from .cechnerve import cech_cohomology
from .descent import (
    AddDescentDatum,
    MultDescentDatum,
    TwistedTransformation,
    check_add,
    check_mdd,
    equiv_solve,
    exp_add,
    int_mc,
    obstruction,
)
from . import formats
from .formats import FormatError, dumps
from . import selftest as selftest_mod


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}")


def _emit(args, report: dict, text: str) -> None:
    if args.format == "json":
        payload = dumps(report)
    else:
        payload = text if text.endswith("\n") else text + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _check_report_dict(rep) -> dict:
    return {
        "ok": rep.ok,
        "violations": [
            {
                "condition": v.condition,
                "face": list(v.face),
                "order": v.order,
                "residue": v.residue_render,
            }
            for v in sorted(rep.violations, key=lambda v: (v.order, v.condition, str(v.face)))
        ],
    }


def cmd_check_mdd(args) -> int:
    datum = formats.load_descent(_load_json(args.input))
    if not isinstance(datum, MultDescentDatum):
        raise FormatError("check-mdd expects a multiplicative descent datum")
    rep = check_mdd(datum, args.cert_degree)
    _emit(args, {"command": "check-mdd", **_check_report_dict(rep)},
          "check-mdd: " + rep.render())
    return 0 if rep.ok else 1


def cmd_check_add(args) -> int:
    datum = formats.load_descent(_load_json(args.input))
    if not isinstance(datum, AddDescentDatum):
        raise FormatError("check-add expects an additive descent datum")
    rep = check_add(datum)
    _emit(args, {"command": "check-add", **_check_report_dict(rep)},
          "check-add: " + rep.render())
    return 0 if rep.ok else 1


def cmd_exp_add(args) -> int:
    datum = formats.load_descent(_load_json(args.input))
    if not isinstance(datum, AddDescentDatum):
        raise FormatError("exp-add expects an additive descent datum")
    mdd = exp_add(datum, cert_degree=args.cert_degree)
    out = formats.render_descent(mdd)
    _emit(args, out, dumps(out))
    return 0


def cmd_int_mc(args) -> int:
    handle, beta = formats.load_ts_element(_load_json(args.input))
    chk = mc_check(beta)
    if not isinstance(chk, MCElement):
        _emit(args, {"command": "int-mc", "ok": False, "mc_violation": chk.render()},
              "int-mc: " + chk.render())
        return 1
    add = int_mc(handle, beta)
    out = formats.render_descent(add)
    _emit(args, out, dumps(out))
    return 0


def cmd_equiv(args) -> int:
    left = formats.load_descent(_load_json(args.left))
    right = formats.load_descent(_load_json(args.right))
    if type(left) is not type(right):
        raise FormatError("equiv needs two data of the same kind")
    result = equiv_solve(left, right)
    if isinstance(result, TwistedTransformation):
        report = {
            "command": "equiv",
            "equivalent": True,
            "eta": {left.nerve.label(k): v.render() for k, v in sorted(result.eta.items()) if not v.is_zero()},
            "eps": {left.nerve.label(e): v.render() for e, v in sorted(result.eps.items()) if not v.is_zero()},
        }
        _emit(args, report, "equivalent\n" + dumps(report))
        return 0
    report = {
        "command": "equiv",
        "equivalent": False,
        "order": result.order,
        "class_is_zero": result.class_is_zero,
        "cocycle": {str(k): v for k, v in sorted(result.cocycle.items())},
    }
    _emit(args, report, "not equivalent: " + result.render())
    return 1


def cmd_obstruction(args) -> int:
    datum = formats.load_descent(_load_json(args.input))
    if not isinstance(datum, MultDescentDatum):
        raise FormatError("obstruction expects a multiplicative descent datum")
    against = None
    if args.against:
        against = formats.load_descent(_load_json(args.against))
    result = obstruction(datum, against)
    if isinstance(result, TwistedTransformation):
        report = {
            "command": "obstruction",
            "trivializable": True,
            "eta": {datum.nerve.label(k): v.render() for k, v in sorted(result.eta.items()) if not v.is_zero()},
            "eps": {datum.nerve.label(e): v.render() for e, v in sorted(result.eps.items()) if not v.is_zero()},
        }
        _emit(args, report, "trivializable\n" + dumps(report))
        return 0
    gens = datum.algebra.gens
    scale = gens[0] if gens else "hbar"
    report = {
        "command": "obstruction",
        "trivializable": False,
        "order": result.order,
        "class_is_zero": result.class_is_zero,
        "class": f"[c]*{scale}" if result.class_is_zero is False else "coboundary",
        "cocycle": {str(k): v for k, v in sorted(result.cocycle.items())},
    }
    _emit(args, report, "really twisted (to the truncation order): " + result.render())
    return 1


def _load_poisson_input(obj):
    if obj.get("schema") != 1:
        raise FormatError("schema must be 1")
    algebra = formats.load_params(obj.get("params"))
    chart = formats.load_chart(obj.get("chart"))
    ctx = formats.ExprContext(algebra, chart, "polyvec")
    elt = formats.parse_element(ctx, obj.get("bivector", "0"))
    if elt.degree != 1 and not elt.is_zero():
        raise FormatError("bivector expression must have polyvector degree 1")
    return algebra, chart, elt


def cmd_quantize(args) -> int:
    obj = _load_json(args.input)
    algebra, chart, elt = _load_poisson_input(obj)
    if args.order is not None:
        algebra2 = param_algebra_truncate(algebra.gens, args.order, algebra.extra_relations)
        ctx = formats.ExprContext(algebra2, chart, "polyvec")
        elt = formats.parse_element(ctx, obj.get("bivector", "0"))
        algebra = algebra2
    structure = pv.poisson_from_mc(require_mc(elt))
    star = pd.quantize_affine_order2(structure, args.cert_degree)
    table = _star_table(star, args.cert_degree or 2)
    report = {
        "command": "quantize",
        "beta": star.beta.element.render(),
        "first_order_bracket": {
            f"{{{a},{b}}}": v.render() for (a, b), v in sorted(pd.first_order_bracket(star).items())
        },
        "table": table,
    }
    text = ["quantize: beta = " + star.beta.element.render(), "star table:"]
    text += [f"  {k} = {v}" for k, v in sorted(table.items())]
    _emit(args, report, "\n".join(text))
    return 0


def _star_table(star, degree: int) -> dict:
    chart = star.carrier.chart
    monos = chart.monomials_up_to(degree)
    out = {}
    for a in monos:
        for b in monos:
            if a.numer.is_constant() or b.numer.is_constant():
                continue
            u = pd.function_element(star.carrier, star.algebra, a)
            v = pd.function_element(star.carrier, star.algebra, b)
            out[f"{a.render()} * {b.render()}"] = star.product(u, v).render()
    return out


def cmd_star_table(args) -> int:
    obj = _load_json(args.input)
    if obj.get("kind") == "star":
        algebra = formats.load_params(obj.get("params"))
        chart = formats.load_chart(obj.get("chart"))
        ctx = formats.ExprContext(algebra, chart, "polydiff")
        beta = formats.parse_element(ctx, obj.get("beta", "0"))
        star = pd.star_from_mc(beta, args.cert_degree)
    else:
        algebra, chart, elt = _load_poisson_input(obj)
        star = pd.quantize_affine_order2(pv.poisson_from_mc(require_mc(elt)), args.cert_degree)
    table = _star_table(star, args.cert_degree or 2)
    report = {"command": "star-table", "table": table}
    text = ["star table:"] + [f"  {k} = {v}" for k, v in sorted(table.items())]
    _emit(args, report, "\n".join(text))
    return 0


def cmd_cohomology(args) -> int:
    nerve = formats.load_nerve(_load_json(args.input))
    cx = cech_cohomology(nerve, args.degree_bound)
    betti = cx.betti()
    reps = {}
    for p in range(len(betti)):
        if betti[p] > 0 and p > 0:
            reps[str(p)] = [
                {nerve.label(f): [str(x) for x in c] for f, c in z.items()}
                for z in cx.representative_cocycles(p)
            ]
    report = {"command": "cohomology", "betti": betti, "representatives": reps}
    text = "betti: " + " ".join(f"H^{p}={b}" for p, b in enumerate(betti))
    _emit(args, report, text)
    return 0


def cmd_selftest(args) -> int:
    results = selftest_mod.run(seed=args.seed)
    ok = all(r["ok"] for r in results)
    report = {"command": "selftest", "seed": args.seed, "ok": ok, "checks": results}
    lines = [f"selftest (seed {args.seed}):"]
    lines += [f"  [{'PASS' if r['ok'] else 'FAIL'}] {r['name']}" for r in results]
    _emit(args, report, "\n".join(lines))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="starcover",
        description=(
            "Exact deformation-quantization descent calculus: star products, "
            "Poisson structures, Maurer-Cartan gauge theory and Cech descent "
            "data over combinatorial cover nerves."
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--order", type=int, default=None, help="parameter truncation order")
        sp.add_argument("--cert-degree", type=int, default=None, help="certificate degree D")
        sp.add_argument("--seed", type=int, default=0, help="deterministic generator seed")
        sp.add_argument("--out", default=None, help="write the report to a file")
        sp.add_argument("--format", choices=("json", "text"), default="json")

    sp = sub.add_parser("check-mdd", help="verify a multiplicative descent datum")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_check_mdd)

    sp = sub.add_parser("check-add", help="verify an additive descent datum")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_check_add)

    sp = sub.add_parser("exp-add", help="exponentiate an additive datum to a multiplicative one")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_exp_add)

    sp = sub.add_parser("int-mc", help="integrate a Thom-Sullivan MC element to an additive datum")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_int_mc)

    sp = sub.add_parser("equiv", help="decide twisted gauge equivalence of two data")
    sp.add_argument("left")
    sp.add_argument("right")
    common(sp)
    sp.set_defaults(fn=cmd_equiv)

    sp = sub.add_parser("obstruction", help="trivialize a datum or report its obstruction class")
    sp.add_argument("input")
    sp.add_argument("--against", default=None, help="compare against a given global datum")
    common(sp)
    sp.set_defaults(fn=cmd_obstruction)

    sp = sub.add_parser("quantize", help="order-2 quantization of a Poisson bivector")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_quantize)

    sp = sub.add_parser("star-table", help="multiplication table of a star product")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(fn=cmd_star_table)

    sp = sub.add_parser("cohomology", help="exact Cech cohomology of a nerve layer")
    sp.add_argument("input")
    sp.add_argument("--degree-bound", type=int, default=-1,
                    help="polynomial layer truncation; -1 = constant coefficients")
    common(sp)
    sp.set_defaults(fn=cmd_cohomology)

    sp = sub.add_parser("selftest", help="run the seeded property battery")
    common(sp)
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FormatError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except MCCheckError as exc:
        sys.stderr.write(f"mathematical failure: {exc}\n")
        return 1
    except AlgebraError as exc:
        sys.stderr.write(f"mathematical failure: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
