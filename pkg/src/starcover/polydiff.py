"""Normalized polydifferential Hochschild cochains D_poly^nor of a chart
algebra: Gerstenhaber bracket, Hochschild differential, star products, the
HKR antisymmetrization, order-by-order gauge recovery, and the desk-scale
order-2 quantization on affine space.

A degree-p payload is a map {(p+1)-tuple of derivative multi-indices ->
LocalizedPoly}; multi-index position k differentiates the chart variable
``deriv_indices[k]``.  Degree -1 payloads are coefficients keyed by ().
Normalization (every slot multi-index nonzero for p >= 0) is the public
invariant; the multiplication 2-cochain used internally by the differential
is the one deliberate exception and never escapes.

The differential is d := [mu0, -] with the Gerstenhaber bracket, so that
Maurer-Cartan for beta is *identically* the associativity of
c1 * c2 + beta(c1, c2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .exactalg import (
    AlgebraError,
    ChartAlgebra,
    Exponent,
    LocalizedPoly,
    Poly,
    QQ,
    solve_linear,
)
from .dgla import (
    Carrier,
    DGLAElement,
    GaugeElement,
    MCElement,
    MCViolation,
    MCCheckError,
    exp_series,
    gauge_act,
    mc_check,
    mc_residue,
    require_mc,
)
from .params import ParamAlgebra
from . import polyvec as pv

Slots = tuple[Exponent, ...]
DiffPayload = dict  # Slots -> LocalizedPoly


def _multi_add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def _multi_weight(a: Exponent) -> int:
    return sum(a)


def _splittings(alpha: Exponent, parts: int):
    """All ways to write alpha as an ordered sum of ``parts`` multi-indices,
    with the multinomial coefficient of the generalized Leibniz rule."""
    if parts == 1:
        yield (alpha,), 1
        return
    n = len(alpha)

    def var_splits(total: int):
        # compositions of `total` into `parts` parts with multinomial weight
        for comp in _compositions_of(total, parts):
            w = math.factorial(total)
            for c in comp:
                w //= math.factorial(c)
            yield comp, w

    per_var = [list(var_splits(alpha[v])) for v in range(n)]
    for combo in itertools.product(*per_var):
        coeff = 1
        for _, w in combo:
            coeff *= w
        out = []
        for k in range(parts):
            out.append(tuple(combo[v][0][k] for v in range(n)))
        yield tuple(out), coeff


def _compositions_of(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions_of(total - first, parts - 1):
            yield (first,) + rest


class PolydiffCarrier(Carrier):
    """D_poly^nor over a chart; ``deriv_indices`` lists the geometric
    variables (others, such as simplex coordinates, are inert scalars)."""

    def __init__(self, chart: ChartAlgebra, deriv_indices: Optional[Sequence[int]] = None):
        self.chart = chart
        if deriv_indices is None:
            deriv_indices = range(len(chart.variables))
        self.deriv_indices = tuple(deriv_indices)

    def __eq__(self, other):
        return (
            isinstance(other, PolydiffCarrier)
            and self.chart == other.chart
            and self.deriv_indices == other.deriv_indices
        )

    def __hash__(self):
        return hash(("polydiff", self.chart, self.deriv_indices))

    @property
    def nderiv(self) -> int:
        return len(self.deriv_indices)

    def zero_index(self) -> Exponent:
        return (0,) * self.nderiv

    # -- payload basics ----------------------------------------------------

    def zero(self) -> DiffPayload:
        return {}

    def is_zero(self, x: DiffPayload) -> bool:
        return not x

    def eq(self, x: DiffPayload, y: DiffPayload) -> bool:
        for k in set(x) | set(y):
            a, b = x.get(k), y.get(k)
            if a is None or b is None:
                return False
            if a != b:
                return False
        return True

    def _clean(self, x: DiffPayload) -> DiffPayload:
        return {k: v for k, v in x.items() if not v.is_zero()}

    def add(self, x: DiffPayload, y: DiffPayload) -> DiffPayload:
        out = dict(x)
        for k, v in y.items():
            out[k] = out[k] + v if k in out else v
        return self._clean(out)

    def scale(self, c: Fraction, x: DiffPayload) -> DiffPayload:
        return self._clean({k: v.scale(c) for k, v in x.items()})

    def is_normalized(self, x: DiffPayload) -> bool:
        return all(
            all(_multi_weight(a) > 0 for a in slots) for slots in x if slots
        )

    def max_slot_order(self, x: DiffPayload) -> int:
        orders = [_multi_weight(a) for slots in x for a in slots]
        return max(orders, default=0)

    # -- construction --------------------------------------------------------

    def from_coeff(self, c: LocalizedPoly) -> DiffPayload:
        if c.is_zero():
            return {}
        return {(): c}

    def term(self, slots: Slots, coeff: LocalizedPoly) -> DiffPayload:
        slots = tuple(tuple(a) for a in slots)
        for a in slots:
            if len(a) != self.nderiv:
                raise AlgebraError("slot multi-index has the wrong length")
            if slots and _multi_weight(a) == 0:
                raise AlgebraError("normalized cochains need nonzero slots")
        if coeff.is_zero():
            return {}
        return {slots: coeff}

    def mu0(self) -> DiffPayload:
        # the multiplication 2-cochain; intentionally un-normalized, internal
        z = self.zero_index()
        return {(z, z): self.chart.one()}

    # -- derivatives and evaluation -------------------------------------------

    def deriv(self, c: LocalizedPoly, alpha: Exponent) -> LocalizedPoly:
        if not any(c.powers):
            # closed form on polynomials: falling factorials per monomial
            terms: dict = {}
            for e, q in c.numer.terms.items():
                coeff = q
                e2 = list(e)
                dead = False
                for pos, k in enumerate(alpha):
                    if k == 0:
                        continue
                    var = self.deriv_indices[pos]
                    m = e2[var]
                    if m < k:
                        dead = True
                        break
                    for t in range(k):
                        coeff *= m - t
                    e2[var] = m - k
                if dead or coeff == 0:
                    continue
                key = tuple(e2)
                v = terms.get(key)
                terms[key] = coeff if v is None else v + coeff
            num = Poly._raw(c.numer.variables, {e: q for e, q in terms.items() if q != 0})
            return LocalizedPoly._raw(c.chart, num, c.powers)
        out = c
        for pos, k in enumerate(alpha):
            var = self.deriv_indices[pos]
            for _ in range(k):
                out = out.derivative(var)
                if out.is_zero():
                    return out
        return out

    def evaluate(self, x: DiffPayload, args: Sequence[LocalizedPoly]) -> LocalizedPoly:
        out = self.chart.zero()
        for slots, f in x.items():
            if len(slots) != len(args):
                raise AlgebraError("argument count does not match the degree")
            term = f
            for a, c in zip(slots, args):
                term = term * self.deriv(c, a)
                if term.is_zero():
                    break
            out = out + term
        return out

    # -- Gerstenhaber structure -----------------------------------------------

    def compose_at(self, x: DiffPayload, y: DiffPayload, i: int, q: int) -> DiffPayload:
        """x o_i y: insert y into slot i of x, expanding the slot derivative
        over y's coefficient and arguments by the generalized Leibniz rule."""
        out: DiffPayload = {}
        for xs, f in x.items():
            alpha = xs[i]
            for ys, g in y.items():
                nparts = 1 + len(ys)
                for parts, w in _splittings(alpha, nparts):
                    kappa_c, kappa_args = parts[0], parts[1:]
                    coeff = f * self.deriv(g, kappa_c)
                    if w != 1:
                        coeff = coeff.scale(w)
                    if coeff.is_zero():
                        continue
                    mid = tuple(_multi_add(s, k) for s, k in zip(ys, kappa_args))
                    slots = xs[:i] + mid + xs[i + 1 :]
                    out[slots] = out[slots] + coeff if slots in out else coeff
        return self._clean(out)

    def circ(self, x: DiffPayload, y: DiffPayload, p: int, q: int) -> DiffPayload:
        out: DiffPayload = {}
        for i in range(p + 1):
            sign = (-1) ** (i * q)
            piece = self.compose_at(x, y, i, q)
            out = self.add(out, self.scale(QQ(sign), piece))
        return out

    def bracket(self, x: DiffPayload, y: DiffPayload, dx: int, dy: int) -> DiffPayload:
        a = self.circ(x, y, dx, dy)
        b = self.circ(y, x, dy, dx)
        return self.add(a, self.scale(QQ(-((-1) ** (dx * dy))), b))

    def d(self, x: DiffPayload, degree: int) -> DiffPayload:
        out = self.bracket(self.mu0(), x, 1, degree)
        # the zero-slot boundary terms cancel exactly; keep the guard
        if not self.is_normalized(out):
            raise AlgebraError("hochschild differential left the normalized complex")
        return out

    def render(self, x: DiffPayload, degree: int) -> str:
        if not x:
            return "0"
        chunks = []
        for slots in sorted(x):
            c = x[slots]
            body = "⊗".join(f"d[{','.join(map(str, a))}]" for a in slots)
            cs = c.render()
            if not slots:
                chunks.append(cs)
            elif cs == "1":
                chunks.append(body)
            elif cs == "-1":
                chunks.append(f"-{body}")
            else:
                if len(c.numer.terms) > 1:
                    cs = f"({cs})"
                chunks.append(f"{cs}*{body}")
        return " + ".join(chunks).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def hochschild_d(phi: DGLAElement) -> DGLAElement:
    if not isinstance(phi.carrier, PolydiffCarrier):
        raise AlgebraError("hochschild_d expects polydifferential cochains")
    return phi.d()


def gerstenhaber(phi: DGLAElement, psi: DGLAElement) -> DGLAElement:
    if phi.carrier != psi.carrier:
        raise AlgebraError("cochains over different chart algebras")
    return phi.bracket(psi)


def function_element(
    carrier: PolydiffCarrier, algebra: ParamAlgebra, value: LocalizedPoly, basis_index: int = 0
) -> DGLAElement:
    return DGLAElement.single(carrier, algebra, -1, basis_index, carrier.from_coeff(value))


def module_mul(u: DGLAElement, v: DGLAElement) -> DGLAElement:
    """Commutative product of two degree -1 elements of R (x) C."""
    car = u.carrier
    alg = u.algebra
    parts: dict = {}
    for i, xu in u.parts.items():
        cu = xu.get((), car.chart.zero())
        for j, xv in v.parts.items():
            k = alg.mul_index(i, j)
            if k is None:
                continue
            val = cu * xv.get((), car.chart.zero())
            pay = car.from_coeff(val)
            parts[k] = car.add(parts[k], pay) if k in parts else pay
    return DGLAElement(car, alg, -1, parts)


def apply_cochain(op: DGLAElement, args: Sequence[DGLAElement]) -> DGLAElement:
    """Evaluate a degree-p cochain of R (x) D_poly on p+1 elements of
    R (x) C, R-multilinearly."""
    car = op.carrier
    alg = op.algebra
    if len(args) != op.degree + 1:
        raise AlgebraError("argument count does not match the degree")
    parts: dict = {}
    for i, payload in op.parts.items():
        # distribute over the basis expansions of every argument
        arg_items = [list(a.parts.items()) for a in args]
        for combo in itertools.product(*arg_items):
            k = i
            vals = []
            dead = False
            for j, xa in combo:
                k2 = alg.mul_index(k, j)
                if k2 is None:
                    dead = True
                    break
                k = k2
                vals.append(xa.get((), car.chart.zero()))
            if dead:
                continue
            val = car.evaluate(payload, vals)
            if val.is_zero():
                continue
            pay = car.from_coeff(val)
            parts[k] = car.add(parts[k], pay) if k in parts else pay
    return DGLAElement(car, alg, -1, parts)


@dataclass(frozen=True)
class StarProduct:
    """Associative unital product c1 * c2 := c1 c2 + beta(c1, c2)."""

    beta: MCElement

    @property
    def carrier(self) -> PolydiffCarrier:
        return self.beta.element.carrier

    @property
    def algebra(self) -> ParamAlgebra:
        return self.beta.element.algebra

    def product(self, u: DGLAElement, v: DGLAElement) -> DGLAElement:
        return module_mul(u, v) + apply_cochain(self.beta.element, [u, v])

    def commutator(self, u: DGLAElement, v: DGLAElement) -> DGLAElement:
        return self.product(u, v) - self.product(v, u)

    def exp(self, a: DGLAElement) -> DGLAElement:
        """exp_star of a degree -1 element of adic order >= 1."""
        if a.adic_order() < 1:
            raise AlgebraError("star exponentials need adic order >= 1")
        one = function_element(self.carrier, self.algebra, self.carrier.chart.one())
        acc = one
        term = one
        k = 0
        while True:
            k += 1
            term = self.product(term, a).scale(Fraction(1, k))
            if term.is_zero():
                break
            acc = acc + term
        return acc

    def conjugation(self, a: DGLAElement) -> Callable[[DGLAElement], DGLAElement]:
        """ig(exp_star(a)) = exp(ad_star(a)) as an operator on R (x) C."""
        return lambda u: exp_series(lambda t: self.commutator(a, t), u)


def monomial_basis(carrier, algebra: ParamAlgebra, degree: int) -> list[DGLAElement]:
    monos = carrier.chart.monomials_up_to(degree)
    if isinstance(carrier, PolydiffCarrier):
        return [function_element(carrier, algebra, m) for m in monos]
    return [pv.function_element(carrier, algebra, m) for m in monos]


def monomial_triples(chart: ChartAlgebra, degree: int):
    """All monomial triples of total degree <= degree (the degree of the
    triple is the sum of the three monomial degrees)."""
    monos = chart.monomials_up_to(degree)
    degs = [m.numer.total_degree() for m in monos]
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            if degs[i] + degs[j] > degree:
                continue
            for k, c in enumerate(monos):
                if degs[i] + degs[j] + degs[k] <= degree:
                    yield a, b, c


def associativity_oracle(star: StarProduct, degree: int) -> list:
    """Independent route: evaluate (a*b)*c - a*(b*c) on all monomial triples
    of total degree <= degree; returns the failing triples.  This is a
    cross-check of the MC route (which is the exact proof of associativity),
    evaluated purely through operator application."""
    car = star.carrier
    failures = []
    for a, b, c in monomial_triples(car.chart, degree):
        ea = function_element(car, star.algebra, a)
        eb = function_element(car, star.algebra, b)
        ec = function_element(car, star.algebra, c)
        lhs = star.product(star.product(ea, eb), ec)
        rhs = star.product(ea, star.product(eb, ec))
        if lhs != rhs:
            failures.append((a.render(), b.render(), c.render()))
    return failures


def sufficient_cert_degree(element: DGLAElement, requested: Optional[int]) -> int:
    """Certificate degree: the requested one, or max slot order + 2.  A
    polydifferential identity that holds on all monomials up to slot order
    plus one holds identically; the +2 margin is asserted here at runtime."""
    car = element.carrier
    max_slot = max(
        (car.max_slot_order(p) for p in element.parts.values()), default=0
    )
    degree = requested if requested is not None else max(max_slot + 2, 2)
    if degree < max_slot + 2:
        raise AlgebraError(
            f"certificate degree {degree} too small for slot order {max_slot}"
        )
    return degree


def star_from_mc(beta: DGLAElement | MCElement, cert_degree: Optional[int] = None) -> StarProduct:
    """Build the star product of an MC cochain; MC violations are rejected
    with the lowest failing adic order.  The associativity oracle re-checks
    the result on monomial triples (dual route)."""
    mc = beta if isinstance(beta, MCElement) else mc_check(beta)
    if isinstance(mc, MCViolation):
        raise MCCheckError(mc)
    car = mc.element.carrier
    for payload in mc.element.parts.values():
        if not car.is_normalized(payload):
            raise AlgebraError("star cochains must be normalized")
    degree = sufficient_cert_degree(mc.element, cert_degree)
    star = StarProduct(mc)
    failures = associativity_oracle(star, degree)
    if failures:
        raise AlgebraError("MC held but associativity oracle failed: convention bug")
    return star


@dataclass
class IntertwinerCertificate:
    holds: bool
    degree: int
    failures: list
    fixes_unit: bool = True


def star_gauge(
    gamma: DGLAElement | GaugeElement, star: StarProduct, cert_degree: Optional[int] = None
) -> tuple[StarProduct, IntertwinerCertificate]:
    """Gauge a star product and certify exp(ad(gamma))(a*b) =
    exp(ad(gamma))(a) *' exp(ad(gamma))(b) on monomials, plus unitality."""
    log = gamma.log if isinstance(gamma, GaugeElement) else gamma
    car = star.carrier
    for payload in log.parts.values():
        if not car.is_normalized(payload):
            raise AlgebraError("gauge logarithms must be normalized")
    beta2 = require_mc(gauge_act(log, star.beta.element))
    out = StarProduct(beta2)
    op = lambda u: exp_series(lambda t: apply_cochain(log, [t]), u)
    cert_degree = sufficient_cert_degree(
        star.beta.element + beta2.element + log.d(), cert_degree
    )
    monos = car.chart.monomials_up_to(cert_degree)
    degs = [m.numer.total_degree() for m in monos]
    failures = []
    for i, am in enumerate(monos):
        for j, bm in enumerate(monos):
            if degs[i] + degs[j] > cert_degree:
                continue
            a = function_element(car, star.algebra, am)
            b = function_element(car, star.algebra, bm)
            lhs = op(star.product(a, b))
            rhs = out.product(op(a), op(b))
            if lhs != rhs:
                failures.append((am.render(), bm.render()))
    one = function_element(car, star.algebra, car.chart.one())
    fixes_unit = op(one) == one
    return out, IntertwinerCertificate(not failures, cert_degree, failures, fixes_unit)


# ---------------------------------------------------------------------------
# HKR antisymmetrization
# ---------------------------------------------------------------------------


def hkr_payload(car_in: pv.PolyvecCarrier, car_out: PolydiffCarrier, payload) -> DiffPayload:
    out: DiffPayload = {}
    pos_of = {v: k for k, v in enumerate(car_out.deriv_indices)}
    for key, f in payload.items():
        p1 = len(key)  # p+1
        if p1 == 0:
            out[()] = out[()] + f if () in out else f
            continue
        norm = Fraction(1, math.factorial(p1))
        for sigma in itertools.permutations(range(p1)):
            sign = _perm_sign(sigma)
            slots = []
            for k in range(p1):
                e = [0] * car_out.nderiv
                e[pos_of[key[sigma[k]]]] = 1
                slots.append(tuple(e))
            slots = tuple(slots)
            coeff = f.scale(norm * sign)
            out[slots] = out[slots] + coeff if slots in out else coeff
    return {k: v for k, v in out.items() if not v.is_zero()}


def _perm_sign(sigma) -> int:
    sign = 1
    for i in range(len(sigma)):
        for j in range(i + 1, len(sigma)):
            if sigma[i] > sigma[j]:
                sign = -sign
    return sign


def hkr(gamma: DGLAElement, car_out: Optional[PolydiffCarrier] = None) -> DGLAElement:
    """Antisymmetrization T_poly -> D_poly^nor; identity in degree -1;
    lands in normalized cocycles."""
    car_in = gamma.carrier
    if not isinstance(car_in, pv.PolyvecCarrier):
        raise AlgebraError("hkr expects a polyvector argument")
    if car_out is None:
        car_out = PolydiffCarrier(car_in.chart, car_in.deriv_indices)
    return gamma.map_payload(
        lambda payload: hkr_payload(car_in, car_out, payload), carrier=car_out
    )


# ---------------------------------------------------------------------------
# solving d(v) = rhs in the normalized complex (per-coefficient blocks)
# ---------------------------------------------------------------------------


def _coeff_blocks(car: PolydiffCarrier, payload: DiffPayload):
    """Split a payload into blocks keyed by (denominator powers, numerator
    monomial); d acts blockwise because mu0 has constant coefficient."""
    blocks: dict = {}
    for slots, c in payload.items():
        for mono, q in c.numer.terms.items():
            key = (c.powers, mono)
            blocks.setdefault(key, {})
            blocks[key][slots] = blocks[key].get(slots, QQ(0)) + q
    return blocks


def _candidate_slots(nderiv: int, max_total: int, nslots: int):
    """All normalized slot tuples with total weight <= max_total."""
    if nderiv == 0:
        return  # no normalized slots exist over a constant chart
    singles = [
        e
        for total in range(1, max_total + 1)
        for e in _compositions_of(total, nderiv)
    ]
    for combo in itertools.product(singles, repeat=nslots):
        if sum(map(_multi_weight, combo)) <= max_total:
            yield tuple(combo)


def solve_d_equation(
    car: PolydiffCarrier, rhs: DiffPayload, target_degree: int
) -> Optional[DiffPayload]:
    """Find a normalized payload v of degree ``target_degree`` with
    d(v) = rhs, or None.  Exact, blockwise per coefficient monomial."""
    if not rhs:
        return {}
    blocks = _coeff_blocks(car, rhs)
    nslots = target_degree + 1
    solution: DiffPayload = {}
    for (powers, mono), block in blocks.items():
        max_total = max(sum(map(_multi_weight, slots)) for slots in block)
        cands = list(_candidate_slots(car.nderiv, max_total, nslots))
        coeff = LocalizedPoly(car.chart, Poly.monomial(car.chart.variables, mono), powers)
        # columns: d(coeff (x) slots_c) expanded over rhs slot keys
        columns = []
        row_index: dict = {}
        rows: list = []
        for slots in block:
            row_index[slots] = len(rows)
            rows.append(slots)
        matrix_cols = []
        for cand in cands:
            img = car.d({cand: coeff}, target_degree)
            col = [QQ(0)] * len(rows)
            ok = True
            extra: dict = {}
            for slots2, c2 in img.items():
                # the image keeps coefficient = coeff (up to Q-scaling)
                q = _extract_scalar(coeff, c2)
                if slots2 in row_index:
                    col[row_index[slots2]] = q
                else:
                    extra[slots2] = q
            matrix_cols.append((col, extra))
        # rows must also constrain image slots outside rhs support: extend
        extra_keys = sorted({k for _, ex in matrix_cols for k in ex})
        for k in extra_keys:
            row_index[k] = len(rows)
            rows.append(k)
        matrix = [[QQ(0)] * len(cands) for _ in rows]
        for j, (col, extra) in enumerate(matrix_cols):
            for i, v in enumerate(col):
                matrix[i][j] = v
            for k, v in extra.items():
                matrix[row_index[k]][j] = v
        b = [block.get(slots, QQ(0)) for slots in rows]
        res = solve_linear(matrix, b)
        if not res.consistent:
            return None
        for q, cand in zip(res.particular, cands):
            if q == 0:
                continue
            add = coeff.scale(q)
            solution[cand] = solution[cand] + add if cand in solution else add
    return {k: v for k, v in solution.items() if not v.is_zero()}


def _extract_scalar(base: LocalizedPoly, value: LocalizedPoly) -> Fraction:
    """value = q * base for a rational q (d never mixes coefficient blocks)."""
    if value.is_zero():
        return QQ(0)
    _, bc = base.numer.leading()
    _, vc = value.numer.leading()
    q = vc / bc
    if base.scale(q) != value:
        raise AlgebraError("coefficient block mixing: solver precondition broken")
    return q


# ---------------------------------------------------------------------------
# order-by-order gauge recovery between star products
# ---------------------------------------------------------------------------


@dataclass
class NotEquivalent:
    order: int
    residue: DGLAElement

    def render(self) -> str:
        return (
            f"no gauge at adic order {self.order}; "
            f"unmatched cocycle residue: {self.residue.render()}"
        )


def solve_gauge(
    star: StarProduct,
    star2: StarProduct,
    g_table: Optional[Mapping] = None,
    cert_degree: Optional[int] = None,
    max_iterations: int = 40,
) -> GaugeElement | NotEquivalent:
    """Find a normalized gauge logarithm gamma with
    star_gauge(gamma, star) == star2, or report the first obstructed adic
    order with its Hochschild-level residue.

    Newton iteration on the gauge group: each pass solves the exact
    linearization d(v) - [v, beta_cur] = defect over all layers jointly and
    composes the step; the filtration terminates the loop."""
    if star.carrier != star2.carrier or star.algebra != star2.algebra:
        raise AlgebraError("star products over different algebras")
    car = star.carrier
    alg = star.algebra
    if g_table is not None:
        return _solve_gauge_from_table(star, star2, g_table, cert_degree)
    gamma = DGLAElement.zero(car, alg, 0)
    best_order = 0
    stall = 0
    from .dgla import bch

    for _ in range(max_iterations):
        current = gauge_act(gamma, star.beta.element)
        defect = current - star2.beta.element
        if defect.is_zero():
            return GaugeElement(gamma)
        p0 = int(defect.adic_order())
        if p0 > best_order:
            best_order, stall = p0, 0
        else:
            stall += 1
            if stall > 6:
                return NotEquivalent(p0, defect.graded_part(p0))
        v = _gauge_newton_step(car, alg, current, defect)
        if v is None:
            return NotEquivalent(p0, defect.graded_part(p0))
        gamma = bch(v, gamma)
    current = gauge_act(gamma, star.beta.element)
    defect = current - star2.beta.element
    if defect.is_zero():
        return GaugeElement(gamma)
    p0 = int(defect.adic_order())
    return NotEquivalent(p0, defect.graded_part(p0))


def _gauge_newton_step(car, alg, current, defect) -> Optional[DGLAElement]:
    """Solve [v, current] - d(v) = -defect exactly over a windowed space of
    normalized degree-0 atoms at every layer index.  The slot window is the
    maximal total slot weight over the lowest defect layer (d splits one slot
    into several, so the unknown's slot order can exceed each individual
    slot); later layers are mopped up by subsequent Newton passes."""
    p0 = int(defect.adic_order())
    max_total = 0
    max_deg = 1
    for li, payload in defect.parts.items():
        if alg.basis_order(li) != p0:
            continue
        for slots, c in payload.items():
            max_total = max(max_total, sum(map(_multi_weight, slots)))
            max_deg = max(max_deg, c.numer.total_degree())
    atoms = []
    for slots in _candidate_slots(car.nderiv, max(max_total, 1), 1):
        for m in car.chart.monomials_up_to(max_deg):
            atoms.append({slots: m})
    layer_idx = [i for i in range(len(alg.basis)) if alg.basis_order(i) >= 1]
    rows: list = []
    row_index: dict = {}
    entries: dict = {}

    def row_of(key):
        if key not in row_index:
            row_index[key] = len(rows)
            rows.append(key)
        return row_index[key]

    def coords(elt: DGLAElement):
        out = {}
        for li, payload in elt.parts.items():
            for slots, c in payload.items():
                if any(c.powers):
                    raise AlgebraError("localized coefficients outside the window")
                for e, q in c.numer.terms.items():
                    out[(li, slots, e)] = out.get((li, slots, e), QQ(0)) + q
        return out

    cols = []
    for li in layer_idx:
        for atom in atoms:
            u = DGLAElement(car, alg, 0, {li: atom})
            eff = u.bracket(current) - u.d()
            cols.append(((li, atom), coords(eff)))
    for _, eff in cols:
        for key in eff:
            row_of(key)
    rhs_map = coords(defect)
    for key in rhs_map:
        row_of(key)
    if not rows:
        return DGLAElement.zero(car, alg, 0)
    p0 = int(defect.adic_order())
    # solve the rows of adic order <= k for the largest feasible k; the
    # quadratic tail of the gauge action pollutes higher rows, which the next
    # Newton pass cleans up
    res = None
    for k in range(alg.order, p0 - 1, -1):
        keep = [r for r, key in enumerate(rows) if alg.basis_order(key[0]) <= k]
        matrix = [[QQ(0)] * len(cols) for _ in keep]
        pos = {r: i for i, r in enumerate(keep)}
        for j, (_, eff) in enumerate(cols):
            for key, v in eff.items():
                r = row_index[key]
                if r in pos:
                    matrix[pos[r]][j] = v
        rhs = [-rhs_map.get(rows[r], QQ(0)) for r in keep]
        if not keep:
            return DGLAElement.zero(car, alg, 0)
        attempt = solve_linear(matrix, rhs)
        if attempt.consistent:
            res = attempt
            break
    if res is None:
        return None
    parts: dict = {}
    for val, ((li, atom), _) in zip(res.particular, cols):
        if val == 0:
            continue
        pay = {slots: c.scale(val) for slots, c in atom.items()}
        parts[li] = car.add(parts.get(li, {}), pay) if li in parts else pay
    return DGLAElement(car, alg, 0, parts)


def _solve_gauge_from_table(star, star2, g_table, cert_degree):
    """Recover a differential gauge from the action of an unknown gauge on a
    monomial basis: fit a normalized 1-slot cochain layer by layer so its
    exponential reproduces the table, then hand back the fitted logarithm."""
    car = star.carrier
    max_deg = max(
        (c.numer.total_degree() for v in g_table.values() for p in v.parts.values()
         for c in [p.get((), car.chart.zero())] if not c.is_zero()),
        default=1,
    )
    max_slot = max(max(map(sum, g_table.keys()), default=1), 1)
    fitted = fit_gauge_to_action(star, g_table, max_deg, max_slot)
    if fitted is None:
        lowest = DGLAElement.zero(car, star.algebra, 0)
        return NotEquivalent(1, lowest)
    return fitted


def pv_key_to_elt(car, alg, key):
    mono = LocalizedPoly(car.chart, Poly.monomial(car.chart.variables, key))
    return function_element(car, alg, mono)


def fit_gauge_to_action(
    star: StarProduct,
    action: Mapping[Exponent, DGLAElement],
    max_coeff_degree: int,
    max_slot: int,
) -> Optional[GaugeElement]:
    """Fit a normalized differential gauge logarithm whose exponential acts
    like ``action`` on the given monomials (keys are exponent tuples)."""
    car = star.carrier
    alg = star.algebra
    gamma = DGLAElement.zero(car, alg, 0)
    op = lambda g, u: exp_series(lambda t: apply_cochain(g, [t]), u)
    cands = []
    for slots in _candidate_slots(car.nderiv, max_slot, 1):
        for mono in car.chart.monomials_up_to(max_coeff_degree):
            cands.append({slots: mono})
    for p in range(1, alg.order + 1):
        rows = []
        rhs = []
        row_key = {}
        for key, target in action.items():
            src = pv_key_to_elt(car, alg, key)
            defect = (target - op(gamma, src)).graded_part(p)
            for i, payload in defect.parts.items():
                c = payload.get((), car.chart.zero())
                for mono, q in c.numer.terms.items():
                    rk = (key, i, c.powers, mono)
                    if rk not in row_key:
                        row_key[rk] = len(rows)
                        rows.append(rk)
                        rhs.append(QQ(0))
                    rhs[row_key[rk]] += q
        # columns: applying a candidate (at layer p) to the source monomials
        cols = []
        layer_idx = [i for i in range(len(alg.basis)) if alg.basis_order(i) == p]
        unknowns = []
        for li in layer_idx:
            for cand in cands:
                unknowns.append((li, cand))
        matrix = [[QQ(0)] * len(unknowns) for _ in rows]
        for j, (li, cand) in enumerate(unknowns):
            for key in action:
                src_val = LocalizedPoly(car.chart, Poly.monomial(car.chart.variables, key))
                img = car.evaluate(cand, [src_val])
                if img.is_zero():
                    continue
                for mono, q in img.numer.terms.items():
                    rk = (key, li, img.powers, mono)
                    if rk in row_key:
                        matrix[row_key[rk]][j] = q
        res = solve_linear(matrix, rhs)
        if not res.consistent:
            return None
        parts: dict = {}
        for q, (li, cand) in zip(res.particular, unknowns):
            if q == 0:
                continue
            pay = {slots: c.scale(q) for slots, c in cand.items()}
            parts[li] = car.add(parts.get(li, {}), pay)
        add = DGLAElement(car, alg, 0, parts)
        if not add.is_zero():
            from .dgla import bch

            gamma = bch(gamma, add)
    return GaugeElement(gamma)


# ---------------------------------------------------------------------------
# desk-scale quantization and first-order brackets
# ---------------------------------------------------------------------------


def quantize_affine_order2(structure: pv.PoissonStructure, cert_degree: int = 4) -> StarProduct:
    """Quantize a Poisson bivector over a pure polynomial chart to second
    order: HKR image plus an order-2 correction.  Constant-coefficient
    bivectors take the closed Moyal exponential; otherwise the correction is
    the solution of the order-2 associativity system (inconsistency means
    the input fails Jacobi)."""
    beta_pi = structure.beta.element
    car_in = beta_pi.carrier
    if any(p != 0 for c in beta_pi.parts.values() for v in c.values() for p in v.powers):
        raise AlgebraError("quantize_affine_order2 needs a pure polynomial chart")
    if car_in.chart.denominators:
        raise AlgebraError("quantize_affine_order2 needs a chart without denominators")
    alg = beta_pi.algebra
    lead = beta_pi.adic_order()
    if alg.order > 2 * lead:
        raise AlgebraError("parameter algebra truncated beyond order 2 relative to the input")
    car = PolydiffCarrier(car_in.chart, car_in.deriv_indices)
    if _is_constant_bivector(beta_pi):
        beta = _moyal_exponential(car, beta_pi)
        return star_from_mc(require_mc(beta), cert_degree)
    beta = hkr(beta_pi, car)
    while True:
        res = mc_residue(beta)
        if res.is_zero():
            break
        order = int(res.adic_order())
        layer = res.graded_part(order)
        parts = {}
        for i, payload in layer.parts.items():
            v = solve_d_equation(car, payload, 1)
            if v is None:
                raise AlgebraError(
                    f"order-{order} associativity system inconsistent: "
                    "the input bivector fails Jacobi"
                )
            if v:
                parts[i] = v
        beta = beta - DGLAElement(car, alg, 1, parts)
    return star_from_mc(require_mc(beta), cert_degree)


def _is_constant_bivector(beta: DGLAElement) -> bool:
    return all(
        v.is_polynomial() and v.numer.is_constant()
        for payload in beta.parts.values()
        for v in payload.values()
    )


def _moyal_exponential(car: PolydiffCarrier, beta_pi: DGLAElement) -> DGLAElement:
    """beta with c1 * c2 = m(exp(P)(c1 (x) c2)), P the HKR image of the
    constant bivector; valid only for constant coefficients."""
    alg = beta_pi.algebra
    P = {i: hkr_payload(beta_pi.carrier, car, payload) for i, payload in beta_pi.parts.items()}

    def tensor_mul(a: dict, b: dict) -> dict:
        out: dict = {}
        for i, pa in a.items():
            for j, pb in b.items():
                k = alg.mul_index(i, j)
                if k is None:
                    continue
                pay: DiffPayload = {}
                for sa, ca in pa.items():
                    for sb, cb in pb.items():
                        slots = tuple(_multi_add(x, y) for x, y in zip(sa, sb))
                        val = ca * cb
                        pay[slots] = pay[slots] + val if slots in pay else val
                pay = car._clean(pay)
                out[k] = car.add(out.get(k, {}), pay)
        return {k: v for k, v in out.items() if v}

    acc = dict(P)
    cur = dict(P)
    k = 1
    while cur:
        k += 1
        cur = tensor_mul(cur, P)
        cur = {i: car.scale(Fraction(1, k), v) for i, v in cur.items()}
        for i, v in cur.items():
            acc[i] = car.add(acc.get(i, {}), v)
        acc = {i: v for i, v in acc.items() if v}
        cur = {i: v for i, v in cur.items() if v}
    return DGLAElement(car, alg, 1, acc)


def first_order_bracket(obj: StarProduct | pv.PoissonStructure) -> dict:
    """Table {(x_i, x_j) -> order-1 layer of the first order bracket} on
    generator pairs; gauge invariant by Prop-level arithmetic (tested)."""
    out = {}
    if isinstance(obj, StarProduct):
        car = obj.carrier
        names = car.chart.variables
        idx = car.deriv_indices
        for a_pos in range(len(idx)):
            for b_pos in range(a_pos + 1, len(idx)):
                u = function_element(car, obj.algebra, car.chart.var(names[idx[a_pos]]))
                v = function_element(car, obj.algebra, car.chart.var(names[idx[b_pos]]))
                val = obj.commutator(u, v).scale(Fraction(1, 2)).graded_part(1)
                out[(names[idx[a_pos]], names[idx[b_pos]])] = val
    else:
        car = obj.carrier
        names = car.chart.variables
        idx = car.deriv_indices
        for a_pos in range(len(idx)):
            for b_pos in range(a_pos + 1, len(idx)):
                u = pv.function_element(car, obj.algebra, car.chart.var(names[idx[a_pos]]))
                v = pv.function_element(car, obj.algebra, car.chart.var(names[idx[b_pos]]))
                out[(names[idx[a_pos]], names[idx[b_pos]])] = obj.bracket(u, v).graded_part(1)
    return out


def first_order_tables_equal(t1: dict, t2: dict) -> bool:
    """Literal equality of bracket tables.  The layer values may live over
    different carriers (polyvec vs polydiff degree -1), so compare the bare
    coefficients per basis index."""
    if set(t1) != set(t2):
        return False
    for k in t1:
        a, b = t1[k], t2[k]
        if set(a.parts) != set(b.parts):
            return False
        for i in a.parts:
            if a.parts[i].get(()) != b.parts[i].get(()):
                return False
    return True
