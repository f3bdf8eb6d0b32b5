#!/usr/bin/env python3
"""Quantize two Poisson bivectors on affine space to second order and print
their star tables: the constant bivector on the plane (the closed-form
exponential) and the linear so(3)-type bivector (order-2 correction solved
from the associativity system)."""

from starcover import (
    ChartAlgebra,
    DGLAElement,
    PolyvecCarrier,
    first_order_bracket,
    param_algebra_truncate,
    poisson_from_mc,
    quantize_affine_order2,
)
from starcover.polydiff import function_element


def show(title, star, degree=2):
    chart = star.carrier.chart
    print(f"== {title}")
    print(f"   beta = {star.beta.element.render()}")
    fob = first_order_bracket(star)
    for pair, val in sorted(fob.items()):
        print(f"   {{{pair[0]},{pair[1]}}} = {val.render()}")
    monos = [m for m in chart.monomials_up_to(degree) if not m.numer.is_constant()]
    for a in monos:
        for b in monos:
            u = function_element(star.carrier, star.algebra, a)
            v = function_element(star.carrier, star.algebra, b)
            print(f"   {a.render()} * {b.render()} = {star.product(u, v).render()}")
    print()


def main():
    R = param_algebra_truncate(["hbar"], 2)

    plane = ChartAlgebra(("x", "y"))
    vcar = PolyvecCarrier(plane)
    pi = DGLAElement.single(vcar, R, 1, 1, vcar.term((0, 1), plane.one()))
    show("constant dx^dy on the plane", quantize_affine_order2(poisson_from_mc(pi)))

    space = ChartAlgebra(("x", "y", "z"))
    vcar3 = PolyvecCarrier(space)
    pay = vcar3.add(
        vcar3.add(
            vcar3.term((1, 2), space.var("x")),
            vcar3.term((0, 2), space.var("y").scale(-1)),
        ),
        vcar3.term((0, 1), space.var("z")),
    )
    pi3 = DGLAElement.single(vcar3, R, 1, 1, pay)
    show("linear so(3) bivector", quantize_affine_order2(poisson_from_mc(pi3)), degree=1)


if __name__ == "__main__":
    main()
