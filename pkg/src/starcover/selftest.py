"""Seeded, deterministic self-test battery for the CLI.

A trimmed version of the property suite: every check reruns identically for
a fixed seed and reports pass/fail without touching the filesystem.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .exactalg import ChartAlgebra, LocalizedPoly, Poly
from .params import param_algebra_truncate
from .dgla import DGLAElement, MCElement, mc_check, require_mc
from .polyvec import PolyvecCarrier, poisson_from_mc
from .polydiff import (
    PolydiffCarrier,
    first_order_bracket,
    first_order_tables_equal,
    function_element,
    hkr,
    hochschild_d,
    quantize_affine_order2,
    star_from_mc,
)
from .simplex import SimplexForm, simplex_integrate, stokes_boundary_integral, t_vars
from .cechnerve import cech_cohomology, octahedron_nerve
from .descent import (
    MultDescentDatum,
    ObstructionReport,
    check_mdd,
    face_carrier,
    obstruction,
)


def _rand_poly(rng, chart, maxdeg=2, terms=2):
    t = {}
    n = len(chart.variables)
    for _ in range(terms):
        e = tuple(rng.randint(0, maxdeg) for _ in range(n))
        if sum(e) > maxdeg:
            continue
        t[e] = Fraction(rng.randint(-3, 3))
    return LocalizedPoly(chart, Poly(chart.variables, t))


def _rand_polyvec(rng, car, alg, degree, minorder=0):
    keys = list(itertools.combinations(car.deriv_indices, degree + 1))
    parts = {}
    for i in range(len(alg.basis)):
        if alg.basis_order(i) < minorder:
            continue
        pay = car.zero()
        for k in keys:
            if rng.random() < 0.6:
                pay = car.add(pay, car.term(k, _rand_poly(rng, car.chart)))
        if not car.is_zero(pay):
            parts[i] = pay
    return DGLAElement(car, alg, degree, parts)


def _rand_polydiff(rng, car, alg, degree, minorder=0):
    singles = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    parts = {}
    for i in range(len(alg.basis)):
        if alg.basis_order(i) < minorder:
            continue
        pay = car.zero()
        for _ in range(2):
            slots = tuple(rng.choice(singles) for _ in range(degree + 1))
            pay = car.add(pay, car.term(slots, _rand_poly(rng, car.chart)))
        if not car.is_zero(pay):
            parts[i] = pay
    return DGLAElement(car, alg, degree, parts)


def run(seed: int = 0) -> list[dict]:
    rng = random.Random(seed)
    out = []

    def check(name, fn):
        try:
            fn()
            out.append({"name": name, "ok": True})
        except Exception as exc:  # pragma: no cover - failure path
            out.append({"name": name, "ok": False, "error": str(exc)})

    alg = param_algebra_truncate(["hbar"], 3)
    chart3 = ChartAlgebra(("x", "y", "z"))
    vcar = PolyvecCarrier(chart3)
    chart2 = ChartAlgebra(("x", "y"))
    dcar = PolydiffCarrier(chart2)

    def schouten_axioms():
        sgn = lambda a, b: (-1) ** (a * b)
        for _ in range(10):
            da, db, dc = rng.choice([(0, 1, 1), (1, 1, -1), (0, 0, 1), (1, 1, 1)])
            X = _rand_polyvec(rng, vcar, alg, da)
            Y = _rand_polyvec(rng, vcar, alg, db)
            Z = _rand_polyvec(rng, vcar, alg, dc)
            assert (X.bracket(Y) + Y.bracket(X).scale(sgn(da, db))).is_zero()
            J = X.bracket(Y.bracket(Z)) - X.bracket(Y).bracket(Z) - Y.bracket(
                X.bracket(Z)
            ).scale(sgn(da, db))
            assert J.is_zero()

    check("schouten graded antisymmetry and Jacobi", schouten_axioms)

    def gerstenhaber_axioms():
        sgn = lambda a, b: (-1) ** (a * b)
        for _ in range(6):
            da, db = rng.choice([(0, 1), (1, 1), (0, 0), (-1, 1)])
            X = _rand_polydiff(rng, dcar, alg, da)
            Y = _rand_polydiff(rng, dcar, alg, db)
            assert (X.bracket(Y) + Y.bracket(X).scale(sgn(da, db))).is_zero()
            assert X.d().d().is_zero()
            L = X.bracket(Y).d() - X.d().bracket(Y) - X.bracket(Y.d()).scale((-1) ** da)
            assert L.is_zero()

    check("gerstenhaber bracket, d^2 = 0, derivation rule", gerstenhaber_axioms)

    def so3_poisson():
        vx, vy, vz = (chart3.var(n) for n in ("x", "y", "z"))
        pi = vcar.add(
            vcar.add(vcar.term((1, 2), vx), vcar.term((0, 2), vy.scale(-1))),
            vcar.term((0, 1), vz),
        )
        beta = DGLAElement.single(vcar, alg, 1, 1, pi)
        assert isinstance(mc_check(beta), MCElement)
        P = poisson_from_mc(beta)
        table = P.bracket_table(2)
        assert table[("x", "y")].render() == "hbar * 1/2*z"

    check("so(3) bivector is MC with {x,y} = hbar z / 2", so3_poisson)

    def moyal_values():
        R2 = param_algebra_truncate(["hbar"], 2)
        vcar2 = PolyvecCarrier(chart2)
        pi = vcar2.term((0, 1), chart2.one())
        P = poisson_from_mc(DGLAElement.single(vcar2, R2, 1, 1, pi))
        S = quantize_affine_order2(P)
        fe = lambda p: function_element(S.carrier, R2, p)
        x, y = fe(chart2.var("x")), fe(chart2.var("y"))
        x2 = fe(chart2.var("x") * chart2.var("x"))
        y2 = fe(chart2.var("y") * chart2.var("y"))
        assert S.product(x, y).render() == "x*y + hbar * 1/2"
        assert S.product(y, x).render() == "x*y + hbar * (-1/2)"
        assert S.product(x2, y2).render() == "x^2*y^2 + hbar * 2*x*y + hbar^2 * 1/2"
        assert first_order_tables_equal(first_order_bracket(S), first_order_bracket(P))

    check("Moyal reproduction through hbar^2", moyal_values)

    def hkr_cocycle():
        for _ in range(4):
            b = _rand_polyvec(rng, PolyvecCarrier(chart2), alg, 1, minorder=1)
            assert hochschild_d(hkr(b)).is_zero()

    check("HKR lands in normalized cocycles", hkr_cocycle)

    def simplex_calculus():
        import math

        for q in range(1, 5):
            top = SimplexForm(q, {frozenset(range(1, q + 1)): Poly.const(t_vars(q), 1)})
            assert simplex_integrate(top) == Fraction(1, math.factorial(q))
        for q in (1, 2, 3):
            tv = t_vars(q)
            for _ in range(5):
                parts = {}
                for S in itertools.combinations(range(1, q + 1), q - 1):
                    t = {}
                    for _ in range(2):
                        e = tuple(rng.randint(0, 2) for _ in range(q))
                        t[e] = Fraction(rng.randint(-3, 3))
                    parts[frozenset(S)] = Poly(tv, t)
                om = SimplexForm(q, parts)
                assert simplex_integrate(om.d()) == stokes_boundary_integral(om)

    check("simplex integrals and Stokes identity", simplex_calculus)

    def octahedron_obstruction():
        nerve = octahedron_nerve()
        R2 = param_algebra_truncate(["hbar"], 2)
        cx = cech_cohomology(nerve)
        assert cx.betti() == [1, 0, 1]
        rep = cx.representative_cocycles(2)[0]
        locals_ = {
            k: require_mc(DGLAElement.zero(face_carrier(nerve, "associative", k), R2, 1))
            for k in nerve.level_faces(0)
        }
        triples = {}
        for t in nerve.level_faces(2):
            coords = rep.get(t)
            if not coords or all(v == 0 for v in coords):
                continue
            car = face_carrier(nerve, "associative", t)
            triples[t] = DGLAElement.single(
                car, R2, -1, 1, car.from_coeff(LocalizedPoly.const(car.chart, coords[0]))
            )
        datum = MultDescentDatum(nerve, "associative", R2, locals_, {}, triples)
        assert check_mdd(datum).ok
        ob = obstruction(datum)
        assert isinstance(ob, ObstructionReport)
        assert ob.order == 1 and ob.class_is_zero is False

    check("octahedron datum is really twisted at order 1", octahedron_obstruction)

    def gauge_recovery():
        R2 = param_algebra_truncate(["hbar"], 2)
        vcar2 = PolyvecCarrier(chart2)
        from .polydiff import GaugeElement, solve_gauge, star_gauge
        from .polydiff import _moyal_exponential

        pi = vcar2.term((0, 1), chart2.one())
        beta = _moyal_exponential(PolydiffCarrier(chart2), DGLAElement.single(vcar2, R2, 1, 1, pi))
        S = star_from_mc(require_mc(beta))
        gam = DGLAElement.single(
            S.carrier, R2, 0, 1, S.carrier.term(((2, 0),), chart2.one())
        )
        S2, cert = star_gauge(gam, S)
        assert cert.holds and cert.fixes_unit
        rec = solve_gauge(S, S2)
        assert isinstance(rec, GaugeElement)
        S2b, cert2 = star_gauge(rec, S)
        assert cert2.holds and S2b.beta.element == S2.beta.element

    check("star gauge recovery round trip", gauge_recovery)

    return out
