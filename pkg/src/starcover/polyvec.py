"""Polyvector fields T_poly of a chart algebra with the Schouten-Nijenhuis
bracket; Poisson brackets induced by Maurer-Cartan elements.

A degree-p payload is a map {strictly increasing (p+1)-tuple of variable
indices -> LocalizedPoly}; degree -1 payloads are plain coefficients keyed by
the empty tuple.  The bracket is the odd Poisson bracket

    [u, v] = u . v - (-1)^{pq} v . u,     u . v = sum_i  du/dtheta_i dv/dx_i,

which restricts to the commutator on vector fields and to xi(f) against
functions.  The differential is zero.

Derivations only ever touch the chart's *derivation variables*; extra
variables (simplex coordinates appended by the Thom-Sullivan layer) pass
through as scalars.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .exactalg import AlgebraError, ChartAlgebra, LocalizedPoly
from .dgla import (
    Carrier,
    DGLAElement,
    GaugeElement,
    MCElement,
    exp_series,
    gauge_act,
    require_mc,
)
from .params import ParamAlgebra

VecKey = tuple[int, ...]
VecPayload = dict  # VecKey -> LocalizedPoly


def merge_odd(a: VecKey, b: VecKey) -> Optional[tuple[VecKey, int]]:
    """Product of odd monomials theta_a * theta_b: merged increasing tuple and
    the Koszul sign, or None when an index repeats."""
    if set(a) & set(b):
        return None
    merged = tuple(sorted(a + b))
    # sign = (-1)^{inversions between a and b in the concatenation}
    inv = sum(1 for x in a for y in b if x > y)
    return merged, (-1) ** inv


class PolyvecCarrier(Carrier):
    """T_poly over a chart; ``deriv_indices`` lists the geometric variables."""

    def __init__(self, chart: ChartAlgebra, deriv_indices: Optional[Sequence[int]] = None):
        self.chart = chart
        if deriv_indices is None:
            deriv_indices = range(len(chart.variables))
        self.deriv_indices = tuple(deriv_indices)

    def __eq__(self, other):
        return (
            isinstance(other, PolyvecCarrier)
            and self.chart == other.chart
            and self.deriv_indices == other.deriv_indices
        )

    def __hash__(self):
        return hash((self.chart, self.deriv_indices))

    @property
    def max_degree(self) -> int:
        return len(self.deriv_indices) - 1

    # -- payload basics ----------------------------------------------------

    def zero(self) -> VecPayload:
        return {}

    def is_zero(self, x: VecPayload) -> bool:
        return not x

    def eq(self, x: VecPayload, y: VecPayload) -> bool:
        for k in set(x) | set(y):
            a = x.get(k)
            b = y.get(k)
            if a is None or b is None:
                return False
            if a != b:
                return False
        return True

    def _clean(self, x: VecPayload) -> VecPayload:
        return {k: v for k, v in x.items() if not v.is_zero()}

    def add(self, x: VecPayload, y: VecPayload) -> VecPayload:
        out = dict(x)
        for k, v in y.items():
            out[k] = out[k] + v if k in out else v
        return self._clean(out)

    def scale(self, c: Fraction, x: VecPayload) -> VecPayload:
        return self._clean({k: v.scale(c) for k, v in x.items()})

    def d(self, x: VecPayload, degree: int) -> VecPayload:
        return {}

    # -- the Schouten bracket ----------------------------------------------
    #
    # Written on the odd cotangent coordinates (x_i, theta_i = d/dx_i) as the
    # BV antibracket
    #     [u, v] = sum_i (d_r u / d theta_i)(d v / d x_i)
    #            - sum_i (d u / d x_i)(d_l v / d theta_i)
    # with right derivatives on the left argument and left derivatives on the
    # right one.  This restricts to the commutator on vector fields, to
    # xi(f) against functions, and satisfies graded antisymmetry/Jacobi in
    # the shifted degrees (theta-degree minus one).

    def bracket(self, x: VecPayload, y: VecPayload, dx: int, dy: int) -> VecPayload:
        out: VecPayload = {}

        def accumulate(key, coeff):
            if key in out:
                out[key] = out[key] + coeff
            else:
                out[key] = coeff

        for ks, f in x.items():
            s = len(ks)
            for kt, g in y.items():
                # term 1: right theta-derivative of x against d/dx of y
                for pos, i in enumerate(ks):
                    sign_r = (-1) ** (s - 1 - pos)
                    dg = g.derivative(i)
                    if dg.is_zero():
                        continue
                    merged = merge_odd(ks[:pos] + ks[pos + 1 :], kt)
                    if merged is None:
                        continue
                    key, sign = merged
                    accumulate(key, (f * dg).scale(sign_r * sign))
                # term 2: d/dx of x against left theta-derivative of y
                for pos, i in enumerate(kt):
                    sign_l = (-1) ** pos
                    df = f.derivative(i)
                    if df.is_zero():
                        continue
                    merged = merge_odd(ks, kt[:pos] + kt[pos + 1 :])
                    if merged is None:
                        continue
                    key, sign = merged
                    accumulate(key, (df * g).scale(-sign_l * sign))
        return self._clean(out)

    # -- construction and evaluation -----------------------------------------

    def from_coeff(self, c: LocalizedPoly) -> VecPayload:
        if c.is_zero():
            return {}
        return {(): c}

    def vector_field(self, coeffs: Mapping[int, LocalizedPoly]) -> VecPayload:
        out = {}
        for i, c in coeffs.items():
            if i not in self.deriv_indices:
                raise AlgebraError(f"{self.chart.variables[i]} is not a derivation variable")
            if not c.is_zero():
                out[(i,)] = c
        return out

    def term(self, indices: VecKey, coeff: LocalizedPoly) -> VecPayload:
        indices = tuple(indices)
        if list(indices) != sorted(set(indices)):
            raise AlgebraError("polyvector keys must be strictly increasing")
        for i in indices:
            if i not in self.deriv_indices:
                raise AlgebraError("index outside the derivation variables")
        if coeff.is_zero():
            return {}
        return {indices: coeff}

    def eval_derivation(self, x: VecPayload, c: LocalizedPoly) -> LocalizedPoly:
        """Apply a degree-0 payload (vector field) to an algebra element."""
        out = self.chart.zero()
        for ks, f in x.items():
            if len(ks) != 1:
                raise AlgebraError("eval_derivation expects a vector field")
            out = out + f * c.derivative(ks[0])
        return out

    def wedge_eval(self, x: VecPayload, c1: LocalizedPoly, c2: LocalizedPoly) -> LocalizedPoly:
        """Pairing of a bivector against two functions, normalized with the
        1/2 factor: (g1 ^ g2)(c1, c2) = 1/2 (g1(c1) g2(c2) - g1(c2) g2(c1)),
        matching the antisymmetrization embedding into cochains."""
        out = self.chart.zero()
        for ks, f in x.items():
            if len(ks) != 2:
                raise AlgebraError("wedge_eval expects a bivector")
            i, j = ks
            val = c1.derivative(i) * c2.derivative(j) - c2.derivative(i) * c1.derivative(j)
            out = out + (f * val).scale(Fraction(1, 2))
        return out

    def render(self, x: VecPayload, degree: int) -> str:
        if not x:
            return "0"
        names = self.chart.variables
        chunks = []
        for ks in sorted(x):
            c = x[ks]
            wedge = "^".join(f"d{names[i]}" for i in ks)
            cs = c.render()
            if not ks:
                chunks.append(cs)
            elif cs == "1":
                chunks.append(wedge)
            elif cs == "-1":
                chunks.append(f"-{wedge}")
            else:
                if len(c.numer.terms) > 1:
                    cs = f"({cs})"
                chunks.append(f"{cs}*{wedge}")
        return " + ".join(chunks).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# R (x) C elements and the module-level operations
# ---------------------------------------------------------------------------


def function_element(
    carrier: PolyvecCarrier, algebra: ParamAlgebra, value: LocalizedPoly, basis_index: int = 0
) -> DGLAElement:
    """Wrap an algebra element as a degree -1 DGLA element r_i (x) value."""
    return DGLAElement.single(carrier, algebra, -1, basis_index, carrier.from_coeff(value))


def schouten(x: DGLAElement, y: DGLAElement) -> DGLAElement:
    """Schouten bracket on R-extended polyvectors (alias of .bracket)."""
    if not isinstance(x.carrier, PolyvecCarrier):
        raise AlgebraError("schouten expects polyvector elements")
    return x.bracket(y)


@dataclass(frozen=True)
class PoissonStructure:
    """MC bivector beta plus the induced bracket {c1, c2}_beta."""

    beta: MCElement

    @property
    def carrier(self) -> PolyvecCarrier:
        return self.beta.element.carrier

    @property
    def algebra(self) -> ParamAlgebra:
        return self.beta.element.algebra

    def bracket(self, u: DGLAElement, v: DGLAElement) -> DGLAElement:
        """R-bilinear extension of the wedge pairing of beta."""
        b = self.beta.element
        car = self.carrier
        alg = self.algebra
        parts: dict = {}
        for i, biv in b.parts.items():
            for j, uc in u.parts.items():
                ij = alg.mul_index(i, j)
                if ij is None:
                    continue
                for k, vc in v.parts.items():
                    ijk = alg.mul_index(ij, k)
                    if ijk is None:
                        continue
                    val = car.wedge_eval(biv, uc.get((), car.chart.zero()), vc.get((), car.chart.zero()))
                    pay = car.from_coeff(val)
                    parts[ijk] = car.add(parts[ijk], pay) if ijk in parts else pay
        return DGLAElement(car, alg, -1, parts)

    def bracket_table(self, degree: int) -> dict[tuple[str, str], DGLAElement]:
        """{x_i, x_j} for all monomial pairs of total degree <= degree is big;
        the generator table is what callers want."""
        car = self.carrier
        out = {}
        names = car.chart.variables
        for a in car.deriv_indices:
            for b in car.deriv_indices:
                if a >= b:
                    continue
                u = function_element(car, self.algebra, car.chart.var(names[a]))
                v = function_element(car, self.algebra, car.chart.var(names[b]))
                out[(names[a], names[b])] = self.bracket(u, v)
        return out


def poisson_from_mc(beta: DGLAElement | MCElement) -> PoissonStructure:
    mc = beta if isinstance(beta, MCElement) else require_mc(beta)
    return PoissonStructure(mc)


def apply_gauge_operator(gamma: DGLAElement, u: DGLAElement) -> DGLAElement:
    """One application of ad_A(gamma): a degree-0 polyvector acting on an
    R (x) C element by derivation."""
    return gamma.bracket(u)


def exp_gauge_operator(gamma: DGLAElement, u: DGLAElement) -> DGLAElement:
    """exp(ad_A(gamma)) applied to an R (x) C element."""
    return exp_series(lambda t: apply_gauge_operator(gamma, t), u)


@dataclass
class IntertwinerCertificate:
    holds: bool
    degree: int
    failures: list


def poisson_gauge(
    gamma: DGLAElement | GaugeElement,
    structure: PoissonStructure,
    cert_degree: int = 3,
) -> tuple[PoissonStructure, IntertwinerCertificate]:
    """Transform beta by the gauge action and certify that exp(ad(gamma))
    intertwines the brackets on all monomials of total degree <= cert_degree."""
    log = gamma.log if isinstance(gamma, GaugeElement) else gamma
    beta2 = gauge_act(log, structure.beta.element)
    out = poisson_from_mc(require_mc(beta2))
    car = structure.carrier
    failures = []
    monos = car.chart.monomials_up_to(cert_degree)
    degs = [m.numer.total_degree() for m in monos]
    wrapped = [function_element(car, structure.algebra, m) for m in monos]
    for a in range(len(wrapped)):
        for b in range(a + 1, len(wrapped)):
            if degs[a] + degs[b] > cert_degree:
                continue
            u, v = wrapped[a], wrapped[b]
            lhs = exp_gauge_operator(log, structure.bracket(u, v))
            rhs = out.bracket(exp_gauge_operator(log, u), exp_gauge_operator(log, v))
            if lhs != rhs:
                failures.append((monos[a].render(), monos[b].render()))
    return out, IntertwinerCertificate(not failures, cert_degree, failures)


def inner_gauge_poisson(
    a: DGLAElement, structure: PoissonStructure, elements: Sequence[DGLAElement]
) -> list[DGLAElement]:
    """Formal hamiltonian flow exp(ad_A(a)) with ad_A(a)(b) = {a, b}_beta,
    evaluated on the requested R (x) C elements."""
    if a.degree != -1:
        raise AlgebraError("hamiltonian logarithms have degree -1")
    if a.adic_order() < 1:
        raise AlgebraError("hamiltonian logarithms have adic order >= 1")
    flow = lambda u: structure.bracket(a, u)
    return [exp_series(flow, u) for u in elements]
