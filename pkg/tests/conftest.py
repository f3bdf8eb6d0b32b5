"""Shared generators for the property suite: everything is seeded and
deterministic; all assertions are bit-exact."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from starcover import (
    ChartAlgebra,
    DGLAElement,
    LocalizedPoly,
    Poly,
    PolydiffCarrier,
    PolyvecCarrier,
    RestrictionMap,
    build_nerve,
    param_algebra_truncate,
)


def rand_fraction(rng, lo=-3, hi=3):
    return Fraction(rng.randint(lo, hi))


def rand_poly(rng, chart, maxdeg=2, terms=2):
    t = {}
    n = len(chart.variables)
    for _ in range(terms):
        e = tuple(rng.randint(0, maxdeg) for _ in range(n))
        if sum(e) > maxdeg:
            continue
        t[e] = rand_fraction(rng)
    return LocalizedPoly(chart, Poly(chart.variables, t))


def rand_polyvec_payload(rng, car, degree, maxdeg=2):
    keys = list(itertools.combinations(car.deriv_indices, degree + 1))
    pay = car.zero()
    for k in keys:
        if rng.random() < 0.6:
            pay = car.add(pay, car.term(k, rand_poly(rng, car.chart, maxdeg)))
    return pay


def rand_polydiff_payload(rng, car, degree, max_slot=2, maxdeg=2):
    singles = [
        e
        for total in range(1, max_slot + 1)
        for e in _compositions(total, car.nderiv)
    ]
    pay = car.zero()
    for _ in range(2):
        slots = tuple(rng.choice(singles) for _ in range(degree + 1))
        pay = car.add(pay, car.term(slots, rand_poly(rng, car.chart, maxdeg)))
    return pay


def _compositions(total, n):
    if n == 0:
        return [()] if total == 0 else []
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, n - 1):
            out.append((first,) + rest)
    return out


def rand_element(rng, car, algebra, degree, minorder=0, kind="polyvec", maxdeg=2):
    parts = {}
    for i in range(len(algebra.basis)):
        if algebra.basis_order(i) < minorder:
            continue
        if rng.random() < 0.55:
            if kind == "polyvec":
                pay = rand_polyvec_payload(rng, car, degree, maxdeg)
            else:
                pay = rand_polydiff_payload(rng, car, degree, maxdeg=maxdeg)
            if not car.is_zero(pay):
                parts[i] = pay
    return DGLAElement(car, algebra, degree, parts)


def simplex_nerve(n, chart_vars=("x", "y")):
    """The full (n-1)-simplex nerve with one shared polynomial chart."""
    faces = [f for r in range(1, n + 1) for f in itertools.combinations(range(n), r)]
    charts = {f: ChartAlgebra(tuple(chart_vars)) for f in faces}
    rms = {
        (f, g): RestrictionMap.identity_like(charts[f], charts[g])
        for f in charts
        for g in charts
        if len(g) == len(f) + 1 and set(f) <= set(g)
    }
    return build_nerve([f"U{i}" for i in range(n)], charts, rms)


@pytest.fixture
def rng():
    return random.Random(20260810)
