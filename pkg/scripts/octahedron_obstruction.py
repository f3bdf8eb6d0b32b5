#!/usr/bin/env python3
"""The really-twisted commutative deformation over the octahedron cover:
six charts on the 2-sphere triangulation, trivial local deformations and
edge gauges, and triple units exp(hbar c) for a Cech 2-cocycle c.

When [c] generates H^2 the datum cannot be trivialized: the obstruction
class [c] hbar survives in the first central layer.  Replacing c by a
coboundary yields an explicit trivializing transformation."""

from fractions import Fraction
import random

from starcover import (
    DGLAElement,
    LocalizedPoly,
    MultDescentDatum,
    ObstructionReport,
    TwistedTransformation,
    cech_cohomology,
    check_mdd,
    mdd_gauge,
    obstruction,
    octahedron_nerve,
    param_algebra_truncate,
    require_mc,
)
from starcover.descent import face_carrier


def datum_from_cocycle(nerve, R, cocycle):
    locals_ = {
        k: require_mc(DGLAElement.zero(face_carrier(nerve, "associative", k), R, 1))
        for k in nerve.level_faces(0)
    }
    triples = {}
    for t in nerve.level_faces(2):
        coords = cocycle.get(t)
        if not coords or all(v == 0 for v in coords):
            continue
        car = face_carrier(nerve, "associative", t)
        triples[t] = DGLAElement.single(
            car, R, -1, 1, car.from_coeff(LocalizedPoly.const(car.chart, coords[0]))
        )
    return MultDescentDatum(nerve, "associative", R, locals_, {}, triples)


def main():
    nerve = octahedron_nerve()
    R = param_algebra_truncate(["hbar"], 2)
    cx = cech_cohomology(nerve)
    print("octahedron cover: betti numbers", cx.betti())
    rep = cx.representative_cocycles(2)[0]
    print("H^2 representative:", {nerve.label(f): str(c[0]) for f, c in rep.items()})

    datum = datum_from_cocycle(nerve, R, rep)
    print("check_mdd:", check_mdd(datum).render())
    result = obstruction(datum)
    assert isinstance(result, ObstructionReport)
    print("obstruction:", result.render())

    rng = random.Random(0)
    b0 = {f: [Fraction(rng.randint(-2, 2))] for f in nerve.level_faces(1)}
    db = {}
    for g in nerve.level_faces(2):
        val = Fraction(0)
        for drop in range(3):
            f = g[:drop] + g[drop + 1 :]
            val += (-1) ** drop * b0.get(f, [Fraction(0)])[0]
        if val:
            db[g] = [val]
    datum2 = datum_from_cocycle(nerve, R, db)
    result2 = obstruction(datum2)
    assert isinstance(result2, TwistedTransformation)
    out = mdd_gauge(result2, datum2)
    killed = all(v.is_zero() for v in out.triple_units.values())
    print("coboundary datum trivializes:", killed)


if __name__ == "__main__":
    main()
