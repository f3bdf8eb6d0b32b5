import random
from fractions import Fraction

import pytest

from starcover import (
    CechCarrier,
    DGLAElement,
    MCElement,
    gauge_act,
    mc_check,
    param_algebra_truncate,
    ts_normalize,
    validate_compatibility,
    whitney,
)
from starcover.thomsullivan import (
    TSError,
    integrate_component,
    level_zero_element,
)

from conftest import rand_poly, simplex_nerve


@pytest.fixture
def setup(rng):
    nerve = simplex_nerve(3)
    R = param_algebra_truncate(["hbar"], 2)
    H = ts_normalize(nerve, "polyvec", R)
    return nerve, R, H


def rand_cech(rng, nerve, R, level, deg, minorder=1):
    car = CechCarrier(nerve, "polyvec", level, 0)
    parts = {}
    for i in range(len(R.basis)):
        if R.basis_order(i) < minorder:
            continue
        comp = {}
        for f in nerve.level_faces(level):
            fcar = car.face_carriers[f]
            if deg == -1:
                pay = fcar.from_coeff(rand_poly(rng, fcar.chart, maxdeg=1))
            elif deg == 0:
                pay = fcar.vector_field(
                    {0: rand_poly(rng, fcar.chart, maxdeg=1), 1: rand_poly(rng, fcar.chart, maxdeg=1)}
                )
            else:
                pay = fcar.term((0, 1), rand_poly(rng, fcar.chart, maxdeg=1))
            if not fcar.is_zero(pay):
                comp[f] = pay
        if comp:
            parts[i] = comp
    return DGLAElement(car, R, deg, parts)


def constant_moyal_ts(nerve, R, H):
    car0 = CechCarrier(nerve, "polyvec", 0, 0)
    comp = {}
    for f in nerve.level_faces(0):
        fcar = car0.face_carriers[f]
        comp[f] = fcar.term((0, 1), fcar.chart.one())
    pi0 = DGLAElement(car0, R, 1, {1: comp})
    return whitney(H, 0, pi0)


def test_whitney_elements_are_compatible(rng, setup):
    nerve, R, H = setup
    for q, deg in ((0, 0), (1, -1), (1, 0), (2, -1)):
        elt = whitney(H, q, rand_cech(rng, nerve, R, q, deg))
        validate_compatibility(elt)


def test_ts_is_a_dgla(rng, setup):
    nerve, R, H = setup
    A = whitney(H, 0, rand_cech(rng, nerve, R, 0, 0)) + whitney(
        H, 1, rand_cech(rng, nerve, R, 1, -1)
    )
    B = whitney(H, 1, rand_cech(rng, nerve, R, 1, 0))
    C = whitney(H, 2, rand_cech(rng, nerve, R, 2, -1))
    sgn = lambda a, b: (-1) ** (a * b)
    assert A.d().d().is_zero()
    assert B.d().d().is_zero()
    assert (A.bracket(B) + B.bracket(A).scale(sgn(0, 1))).is_zero()
    jac = A.bracket(B.bracket(C)) - A.bracket(B).bracket(C) - B.bracket(
        A.bracket(C)
    ).scale(sgn(0, 1))
    assert jac.is_zero()
    leib = A.bracket(B).d() - A.d().bracket(B) - A.bracket(B.d())
    assert leib.is_zero()


def test_constant_element_mc(setup):
    nerve, R, H = setup
    beta = constant_moyal_ts(nerve, R, H)
    validate_compatibility(beta)
    assert isinstance(mc_check(beta), MCElement)
    # level-0 part is the constant bivector; edge and triangle integrals vanish
    assert not level_zero_element(H, beta).is_zero()
    assert integrate_component(H, beta, 1).is_zero()
    assert integrate_component(H, beta, 2).is_zero()


def test_gauged_mc_elements(rng, setup):
    nerve, R, H = setup
    beta = constant_moyal_ts(nerve, R, H)
    for _ in range(3):
        g = whitney(H, 0, rand_cech(rng, nerve, R, 0, 0)) + whitney(
            H, 1, rand_cech(rng, nerve, R, 1, -1)
        )
        beta2 = gauge_act(g, beta)
        validate_compatibility(beta2)
        assert isinstance(mc_check(beta2), MCElement)


def test_compatibility_violation_detected(rng, setup):
    nerve, R, H = setup
    beta = gauge_act(
        whitney(H, 1, rand_cech(rng, nerve, R, 1, -1)), constant_moyal_ts(nerve, R, H)
    )
    # perturb a single face component of some stored level
    parts = {i: dict(p) for i, p in beta.parts.items()}
    i0 = next(iter(parts))
    key0 = next(k for k in parts[i0] if k[0] >= 1)
    comp = dict(parts[i0][key0])
    f0 = next(iter(comp))
    pay = dict(comp[f0])
    k0 = next(iter(pay))
    from starcover import LocalizedPoly

    pay[k0] = pay[k0] + LocalizedPoly.const(pay[k0].chart, 1)
    comp[f0] = pay
    parts[i0][key0] = comp
    bad = DGLAElement(beta.carrier, R, beta.degree, parts)
    with pytest.raises(TSError):
        validate_compatibility(bad)


def test_whitney_edge_integral():
    # a pure edge 1-form cochain integrates back to its cochain: the Whitney
    # form of an edge has integral 1 over that edge
    nerve = simplex_nerve(2)
    R = param_algebra_truncate(["hbar"], 1)
    H = ts_normalize(nerve, "polyvec", R)
    car1 = CechCarrier(nerve, "polyvec", 1, 0)
    fcar = car1.face_carriers[(0, 1)]
    val = fcar.from_coeff(fcar.chart.var("x"))
    cochain = DGLAElement(car1, R, -1, {1: {(0, 1): val}})
    elt = whitney(H, 1, cochain)
    validate_compatibility(elt)
    back = integrate_component(H, elt, 1)
    assert back == cochain
