import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from starcover import AlgebraError, ChartAlgebra, LocalizedPoly, Poly, solve_linear
from starcover.exactalg import matvec

from conftest import rand_poly

XY = ("x", "y")


def P(text_terms):
    return Poly(XY, text_terms)


def test_difference_of_squares():
    x = Poly.var(XY, "x")
    one = Poly.const(XY, 1)
    assert (x + one) * (x - one) == x * x - one


def test_additive_identity():
    x = Poly.var(XY, "x")
    p = x * x + Poly.const(XY, 3)
    assert p + Poly.zero(XY) == p


def test_denominator_cancellation():
    # (x/s) * s == x, cross-checked by clearing denominators
    sx = Poly.var(("x",), "x")
    C = ChartAlgebra(("x",), (sx,))
    x_over_s = LocalizedPoly(C, sx, (1,))
    prod = x_over_s * C.var("x")
    assert prod == C.var("x")
    # cross-multiplication oracle: numerators after clearing denominators
    lhs = prod.numer * sx ** sum(C.var("x").powers)
    rhs = C.var("x").numer * sx ** sum(prod.powers)
    assert lhs == rhs


def test_mismatched_variables_rejected():
    with pytest.raises(AlgebraError):
        Poly.var(("x",), "x") + Poly.var(("y",), "y")


def test_substitution_monomial():
    # x -> 1/x applied to x^2 gives denominator power 2
    sx = Poly.var(("x",), "x")
    C = ChartAlgebra(("x",), (sx,))
    inv = LocalizedPoly(C, Poly.const(("x",), 1), (1,))
    x2 = LocalizedPoly(C, sx * sx)
    img = x2.substitute(C, [inv])
    assert img == LocalizedPoly(C, Poly.const(("x",), 1), (2,))


def test_substitution_identity():
    C = ChartAlgebra(XY)
    rng = random.Random(5)
    for _ in range(10):
        p = rand_poly(rng, C)
        assert p.substitute(C, [C.var("x"), C.var("y")]) == p


def test_substitution_binomial_oracle():
    # x -> x + y applied to x^2 equals the binomial expansion
    C = ChartAlgebra(XY)
    x, y = C.var("x"), C.var("y")
    img = (x * x).substitute(C, [x + y, y])
    assert img == x * x + (x * y).scale(2) + y * y


def test_substitution_ring_homomorphism():
    rng = random.Random(11)
    sx = Poly.var(XY, "x")
    C = ChartAlgebra(XY, (sx,))
    images = [C.var("x") + C.var("y"), LocalizedPoly(C, Poly.const(XY, 1), (1,))]
    for _ in range(20):
        p = rand_poly(rng, C)
        q = rand_poly(rng, C)
        sub = lambda r: r.substitute(C, images)
        assert sub(p * q) == sub(p) * sub(q)
        assert sub(p + q) == sub(p) + sub(q)


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4))
def test_ring_axioms_hypothesis(a, b, c):
    # small dense polynomials built from the integer seeds
    x, y = Poly.var(XY, "x"), Poly.var(XY, "y")
    p = x.scale(a) + y * y.scale(b)
    q = y.scale(c) + Poly.const(XY, a)
    r = x * y.scale(b) + Poly.const(XY, c)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p * q == q * p


def test_ring_axioms_randomized(rng):
    C3 = ChartAlgebra(("x", "y", "z"))
    for _ in range(200):
        p = rand_poly(rng, C3, maxdeg=6, terms=3)
        q = rand_poly(rng, C3, maxdeg=6, terms=3)
        r = rand_poly(rng, C3, maxdeg=6, terms=3)
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r
        assert p * q == q * p


def test_localized_ring_axioms(rng):
    sx = Poly.var(XY, "x")
    sy = Poly.var(XY, "y")
    C = ChartAlgebra(XY, (sx, sy))
    def rand_loc():
        return LocalizedPoly(
            C, rand_poly(rng, C, maxdeg=3).numer, (rng.randint(0, 2), rng.randint(0, 2))
        )
    for _ in range(60):
        p, q, r = rand_loc(), rand_loc(), rand_loc()
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r
        assert p * q == q * p


def test_solve_identity():
    res = solve_linear([[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]],
                       [Fraction(2), Fraction(3)])
    assert res.particular == [Fraction(2), Fraction(3)]
    assert res.kernel == []


def test_solve_rank1_kernel():
    res = solve_linear([[Fraction(1), Fraction(1)]], [Fraction(0)])
    assert res.particular == [Fraction(0), Fraction(0)]
    assert len(res.kernel) == 1
    v = res.kernel[0]
    assert v[0] == -v[1] and v[0] != 0


def test_solve_inconsistent():
    res = solve_linear([[Fraction(1)], [Fraction(1)]], [Fraction(0), Fraction(1)])
    assert not res.consistent


def test_solve_random_residual(rng):
    for _ in range(10):
        n = 5
        A = [[Fraction(rng.randint(-5, 5)) for _ in range(n)] for _ in range(n)]
        x = [Fraction(rng.randint(-5, 5)) for _ in range(n)]
        b = matvec(A, x)
        res = solve_linear(A, b)
        assert res.consistent
        assert matvec(A, res.particular) == b
        for k in res.kernel:
            assert matvec(A, k) == [Fraction(0)] * n


def test_canonical_rendering():
    p = Poly(XY, {(2, 1): Fraction(3, 2), (0, 0): Fraction(-1)})
    assert p.render() == "3/2*x^2*y - 1"
    assert Poly.zero(XY).render() == "0"


def test_invert_unit_and_reject():
    sx = Poly.var(("x",), "x")
    C = ChartAlgebra(("x",), (sx,))
    u = LocalizedPoly(C, sx.scale(2))
    assert u.invert() * u == C.one()
    with pytest.raises(AlgebraError):
        (C.var("x") + C.one()).invert()
