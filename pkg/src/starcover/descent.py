"""Multiplicative and additive descent data over a cover nerve, their cocycle
conditions, twisted gauge transformations, the exp translation ADD -> MDD,
the int translation MC(Thom-Sullivan) -> ADD, and order-by-order equivalence
and obstruction solving through the central layers.

Group elements are always manipulated through logarithms with BCH; the inner
gauge of exp_beta(alpha) is the operator exponential of d_beta(alpha), which
for the associative flavor is exactly star-conjugation.

Only strictly increasing index tuples are stored; the normalization closure
(g_{k,k} = 1, g_{k1,k0} = g_{k0,k1}^{-1}, a-permutation relations) is
definitional.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .exactalg import AlgebraError, QQ, solve_linear
from .params import ParamAlgebra
from .dgla import (
    DGLAElement,
    MCElement,
    ad_exp,
    bch,
    bch_many,
    exp_series,
    gauge_act,
    mc_residue,
    require_mc,
    twisted_d,
)
from .cechnerve import (
    CechComplex,
    CoverNerve,
    Face,
    LayerSpec,
    NerveError,
    transport_payload,
)
from .polyvec import PolyvecCarrier, PoissonStructure, poisson_from_mc
from .polydiff import (
    PolydiffCarrier,
    StarProduct,
    apply_cochain,
    function_element,
    star_from_mc,
)
from . import polyvec as pv
from .thomsullivan import TSHandle, integrate_component, level_zero_element


FLAVORS = ("associative", "poisson")


def kind_of(flavor: str) -> str:
    if flavor == "associative":
        return "polydiff"
    if flavor == "poisson":
        return "polyvec"
    raise AlgebraError(f"unknown flavor {flavor!r}")


def face_carrier(nerve: CoverNerve, flavor: str, face: Face):
    chart = nerve.algebra(face)
    if flavor == "associative":
        return PolydiffCarrier(chart)
    return PolyvecCarrier(chart)


def move(nerve: CoverNerve, flavor: str, f: Face, g: Face, elt: DGLAElement) -> DGLAElement:
    """Transport a per-face element along the restriction f <= g."""
    if f == g:
        return elt
    car = face_carrier(nerve, flavor, g)
    return elt.map_payload(
        lambda pay: transport_payload(nerve, kind_of(flavor), f, g, pay), carrier=car
    )


def gauge_operator(flavor: str, log: DGLAElement) -> Callable[[DGLAElement], DGLAElement]:
    """exp of the degree-0 log acting on R (x) C elements."""
    if flavor == "associative":
        step = lambda u: apply_cochain(log, [u])
    else:
        step = lambda u: log.bracket(u)
    return lambda u: exp_series(step, u)


def monomials(nerve: CoverNerve, flavor: str, face: Face, algebra: ParamAlgebra, degree: int):
    car = face_carrier(nerve, flavor, face)
    out = []
    for m in car.chart.monomials_up_to(degree):
        if flavor == "associative":
            out.append(function_element(car, algebra, m))
        else:
            out.append(pv.function_element(car, algebra, m))
    return out


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@dataclass
class MultDescentDatum:
    nerve: CoverNerve
    flavor: str
    algebra: ParamAlgebra
    locals: dict  # chart face -> MCElement (per-face carrier)
    edge_gauges: dict  # edge face -> degree-0 log
    triple_units: dict  # triangle face -> degree-(-1) log

    def local_structure(self, face: Face):
        mc = self.locals[face]
        if self.flavor == "associative":
            return StarProduct(mc)
        return PoissonStructure(mc)

    def copy(self) -> "MultDescentDatum":
        return MultDescentDatum(
            self.nerve, self.flavor, self.algebra,
            dict(self.locals), dict(self.edge_gauges), dict(self.triple_units),
        )


@dataclass
class AddDescentDatum:
    nerve: CoverNerve
    flavor: str
    algebra: ParamAlgebra
    delta0: dict  # chart face -> degree-1 element
    delta1: dict  # edge face -> degree-0 element
    delta2: dict  # triangle face -> degree-(-1) element

    def copy(self) -> "AddDescentDatum":
        return AddDescentDatum(
            self.nerve, self.flavor, self.algebra,
            dict(self.delta0), dict(self.delta1), dict(self.delta2),
        )


@dataclass
class Violation:
    condition: str  # 'i', 'ii', 'iii', 'iv', 'edge-morphism'
    face: Face
    order: int
    residue_render: str


@dataclass
class CheckReport:
    ok: bool
    violations: list

    def first(self) -> Optional[Violation]:
        if self.ok:
            return None
        return min(self.violations, key=lambda v: (v.order, v.condition, v.face))

    def minimal_conditions(self) -> set:
        if self.ok:
            return set()
        m = min(v.order for v in self.violations)
        return {v.condition for v in self.violations if v.order == m}

    def render(self) -> str:
        if self.ok:
            return "pass"
        lines = [
            f"({v.condition}) at {v.face}, adic order {v.order}: {v.residue_render}"
            for v in sorted(self.violations, key=lambda v: (v.order, v.condition, str(v.face)))
        ]
        return "violations:\n  " + "\n  ".join(lines)


@dataclass
class TwistedTransformation:
    """(h, b) on logarithms: eta per chart (degree 0), eps per edge
    (degree -1, in the twisted algebra at the smaller chart)."""

    eta: dict
    eps: dict


def identity_transformation(nerve: CoverNerve, flavor: str, algebra: ParamAlgebra) -> TwistedTransformation:
    eta = {}
    eps = {}
    for f in nerve.level_faces(0):
        eta[f] = DGLAElement.zero(face_carrier(nerve, flavor, f), algebra, 0)
    for e in nerve.level_faces(1):
        eps[e] = DGLAElement.zero(face_carrier(nerve, flavor, e), algebra, -1)
    return TwistedTransformation(eta, eps)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _zero(nerve, flavor, algebra, face, degree) -> DGLAElement:
    return DGLAElement.zero(face_carrier(nerve, flavor, face), algebra, degree)


def _get(data: Mapping, nerve, flavor, algebra, face, degree) -> DGLAElement:
    v = data.get(face)
    if v is None:
        return _zero(nerve, flavor, algebra, face, degree)
    return v


def _record(violations, condition, face, defect: DGLAElement):
    if not defect.is_zero():
        order = int(defect.adic_order())
        violations.append(
            Violation(condition, face, order, defect.graded_part(order).render())
        )


def check_add(datum: AddDescentDatum) -> CheckReport:
    """Conditions (i)-(iv) of an additive descent datum, verified exactly on
    logarithms via BCH and the gauge action."""
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    violations: list = []
    for k in nerve.level_faces(0):
        b = _get(datum.delta0, nerve, flavor, alg, k, 1)
        _record(violations, "i", k, mc_residue(b))
    for e in nerve.level_faces(1):
        k0, k1 = (e[0],), (e[1],)
        b0 = move(nerve, flavor, k0, e, _get(datum.delta0, nerve, flavor, alg, k0, 1))
        b1 = move(nerve, flavor, k1, e, _get(datum.delta0, nerve, flavor, alg, k1, 1))
        g = _get(datum.delta1, nerve, flavor, alg, e, 0)
        _record(violations, "ii", e, gauge_act(g, b0) - b1)
    for t in nerve.level_faces(2):
        k0 = (t[0],)
        e01, e02, e12 = (t[0], t[1]), (t[0], t[2]), (t[1], t[2])
        g01 = move(nerve, flavor, e01, t, _get(datum.delta1, nerve, flavor, alg, e01, 0))
        g02 = move(nerve, flavor, e02, t, _get(datum.delta1, nerve, flavor, alg, e02, 0))
        g12 = move(nerve, flavor, e12, t, _get(datum.delta1, nerve, flavor, alg, e12, 0))
        lhs = bch_many([-g02, g12, g01])
        b0 = move(nerve, flavor, k0, t, _get(datum.delta0, nerve, flavor, alg, k0, 1))
        a = _get(datum.delta2, nerve, flavor, alg, t, -1)
        _record(violations, "iii", t, lhs - twisted_d(b0, a))
    for w in nerve.level_faces(3):
        k0 = (w[0],)
        b0 = move(nerve, flavor, k0, w, _get(datum.delta0, nerve, flavor, alg, k0, 1))
        beta0 = b0

        def tri(i, j, k):
            f = (w[i], w[j], w[k])
            return move(nerve, flavor, f, w, _get(datum.delta2, nerve, flavor, alg, f, -1))

        a013, a023, a012, a123 = tri(0, 1, 3), tri(0, 2, 3), tri(0, 1, 2), tri(1, 2, 3)
        e01 = (w[0], w[1])
        g01 = move(nerve, flavor, e01, w, _get(datum.delta1, nerve, flavor, alg, e01, 0))
        lhs = bch_many([-a013, a023, a012], beta=beta0)
        rhs = ad_exp(-g01, a123)
        _record(violations, "iv", w, lhs - rhs)
    return CheckReport(not violations, violations)


def check_mdd(datum: MultDescentDatum, cert_degree: Optional[int] = None) -> CheckReport:
    """Def-style conditions of a multiplicative descent datum.

    (edge-morphism): each edge gauge intertwines the neighbouring locals.
    (ii): the 1-cocycle failure equals the inner gauge of the triple unit,
          compared as operators on a monomial basis of the triple overlap.
    (iii): the twisted 2-cocycle condition, on logarithms via twisted BCH.
    """
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    violations: list = []
    for e in nerve.level_faces(1):
        k0, k1 = (e[0],), (e[1],)
        b0 = move(nerve, flavor, k0, e, datum.locals[k0].element)
        b1 = move(nerve, flavor, k1, e, datum.locals[k1].element)
        g = _get(datum.edge_gauges, nerve, flavor, alg, e, 0)
        _record(violations, "edge-morphism", e, gauge_act(g, b0) - b1)
    for t in nerve.level_faces(2):
        k0 = (t[0],)
        e01, e02, e12 = (t[0], t[1]), (t[0], t[2]), (t[1], t[2])
        g01 = move(nerve, flavor, e01, t, _get(datum.edge_gauges, nerve, flavor, alg, e01, 0))
        g02 = move(nerve, flavor, e02, t, _get(datum.edge_gauges, nerve, flavor, alg, e02, 0))
        g12 = move(nerve, flavor, e12, t, _get(datum.edge_gauges, nerve, flavor, alg, e12, 0))
        b0 = move(nerve, flavor, k0, t, datum.locals[k0].element)
        a = _get(datum.triple_units, nerve, flavor, alg, t, -1)
        ig_log = twisted_d(b0, a)
        # operator comparison on the monomial basis of the triple overlap
        degree = _mdd_cert_degree(datum, t, [g01, g02, g12, ig_log], cert_degree)
        F01 = gauge_operator(flavor, g01)
        F12 = gauge_operator(flavor, g12)
        F20 = gauge_operator(flavor, -g02)
        IG = gauge_operator(flavor, ig_log)
        defect = None
        for m in monomials(nerve, flavor, t, alg, degree):
            diff = F20(F12(F01(m))) - IG(m)
            if not diff.is_zero():
                defect = diff if defect is None else defect
                break
        if defect is not None:
            order = int(defect.adic_order())
            violations.append(
                Violation("ii", t, order, defect.graded_part(order).render())
            )
    for w in nerve.level_faces(3):
        k0 = (w[0],)
        b0 = move(nerve, flavor, k0, w, datum.locals[k0].element)

        def tri(i, j, k):
            f = (w[i], w[j], w[k])
            return move(nerve, flavor, f, w, _get(datum.triple_units, nerve, flavor, alg, f, -1))

        a013, a023, a012, a123 = tri(0, 1, 3), tri(0, 2, 3), tri(0, 1, 2), tri(1, 2, 3)
        e01 = (w[0], w[1])
        g01 = move(nerve, flavor, e01, w, _get(datum.edge_gauges, nerve, flavor, alg, e01, 0))
        lhs = bch_many([-a013, a023, a012], beta=b0)
        rhs = ad_exp(-g01, a123)
        _record(violations, "iii", w, lhs - rhs)
    return CheckReport(not violations, violations)


def _mdd_cert_degree(datum, face, logs, requested: Optional[int]) -> int:
    """Monomial-basis degree for the condition-(ii) operator comparison:
    max slot order + 2 across everything involved, asserted at runtime."""
    if datum.flavor == "poisson":
        return requested if requested is not None else 3
    max_slot = 0
    for elt in logs + [datum.locals[(face[0],)].element]:
        for payload in elt.parts.values():
            max_slot = max(max_slot, elt.carrier.max_slot_order(payload))
    degree = requested if requested is not None else max(max_slot + 2, 2)
    if degree < max_slot + 2:
        raise AlgebraError(
            f"certificate degree {degree} too small for slot order {max_slot}"
        )
    return degree


# ---------------------------------------------------------------------------
# exp: ADD -> MDD
# ---------------------------------------------------------------------------


def exp_add(datum: AddDescentDatum, check: bool = True, cert_degree: Optional[int] = None) -> MultDescentDatum:
    """Exponentiate an additive descent datum: locals are the MC-induced
    deformations, the edge and triple logs are reused verbatim.  The output
    is validated by check_mdd (the multiplicative, operator-level route)."""
    rep = check_add(datum)
    if not rep.ok:
        raise AlgebraError("exp_add input fails check_add: " + rep.render())
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    locals_: dict = {}
    for k in nerve.level_faces(0):
        b = _get(datum.delta0, nerve, flavor, alg, k, 1)
        mc = require_mc(b)
        if flavor == "associative":
            locals_[k] = star_from_mc(mc, cert_degree).beta
        else:
            locals_[k] = poisson_from_mc(mc).beta
    out = MultDescentDatum(
        nerve, flavor, alg, locals_, dict(datum.delta1), dict(datum.delta2)
    )
    if check:
        rep2 = check_mdd(out, cert_degree)
        if not rep2.ok:
            raise AlgebraError("exp_add output fails check_mdd: " + rep2.render())
    return out


# ---------------------------------------------------------------------------
# twisted gauge transformations
# ---------------------------------------------------------------------------


def _transformed_components(
    nerve, flavor, alg, locals_like: Mapping, edges: Mapping, triples: Mapping, t: TwistedTransformation
):
    """Shared machinery of mdd_gauge / add_gauge on logarithms."""
    new_locals = {}
    for k in nerve.level_faces(0):
        eta = t.eta[k]
        new_locals[k] = gauge_act(eta, locals_like[k])
    new_edges = {}
    for e in nerve.level_faces(1):
        k0, k1 = (e[0],), (e[1],)
        eta0 = move(nerve, flavor, k0, e, t.eta[k0])
        eta1 = move(nerve, flavor, k1, e, t.eta[k1])
        g = _get(edges, nerve, flavor, alg, e, 0)
        b0 = move(nerve, flavor, k0, e, locals_like[k0])
        igb = twisted_d(b0, t.eps[e])
        new_edges[e] = bch_many([eta1, g, igb, -eta0])
    new_triples = {}
    for tr in nerve.level_faces(2):
        k0 = (tr[0],)
        e01, e02, e12 = (tr[0], tr[1]), (tr[0], tr[2]), (tr[1], tr[2])
        b0 = move(nerve, flavor, k0, tr, locals_like[k0])
        g01 = move(nerve, flavor, e01, tr, _get(edges, nerve, flavor, alg, e01, 0))
        eps01 = move(nerve, flavor, e01, tr, t.eps[e01])
        eps02 = move(nerve, flavor, e02, tr, t.eps[e02])
        eps12 = move(nerve, flavor, e12, tr, t.eps[e12])
        a = _get(triples, nerve, flavor, alg, tr, -1)
        inner = bch_many(
            [eps01, ad_exp(-g01, eps12), a, -eps02], beta=b0
        )
        eta0 = move(nerve, flavor, k0, tr, t.eta[k0])
        new_triples[tr] = ad_exp(eta0, inner)
    return new_locals, new_edges, new_triples


def mdd_gauge(t: TwistedTransformation, datum: MultDescentDatum) -> MultDescentDatum:
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    locals_like = {k: datum.locals[k].element for k in nerve.level_faces(0)}
    nl, ne, nt = _transformed_components(
        nerve, flavor, alg, locals_like, datum.edge_gauges, datum.triple_units, t
    )
    new_locals = {k: require_mc(v) for k, v in nl.items()}
    return MultDescentDatum(nerve, flavor, alg, new_locals, ne, nt)


def add_gauge(t: TwistedTransformation, datum: AddDescentDatum) -> AddDescentDatum:
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    locals_like = {k: _get(datum.delta0, nerve, flavor, alg, k, 1) for k in nerve.level_faces(0)}
    nl, ne, nt = _transformed_components(
        nerve, flavor, alg, locals_like, datum.delta1, datum.delta2, t
    )
    return AddDescentDatum(nerve, flavor, alg, nl, ne, nt)


def invert_transformation(
    t: TwistedTransformation, nerve, flavor, alg
) -> TwistedTransformation:
    """Inverse in the transformation groupoid: eta -> -eta and
    eps -> exp(ad eta0)-image of -eps (twisted at the transformed base)."""
    eta_inv = {k: -v for k, v in t.eta.items()}
    eps_inv = {}
    for e in nerve.level_faces(1):
        k0 = (e[0],)
        eta0 = move(nerve, flavor, k0, e, t.eta[k0])
        eps_inv[e] = ad_exp(eta0, -t.eps[e])
    return TwistedTransformation(eta_inv, eps_inv)


def compose_transformations(
    t2: TwistedTransformation, t1: TwistedTransformation, datum: "MultDescentDatum | AddDescentDatum"
) -> TwistedTransformation:
    """Composite `apply t1 then t2` on logarithms."""
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    if isinstance(datum, MultDescentDatum):
        locals_like = {k: datum.locals[k].element for k in nerve.level_faces(0)}
    else:
        locals_like = {k: _get(datum.delta0, nerve, flavor, alg, k, 1) for k in nerve.level_faces(0)}
    eta = {}
    for k in nerve.level_faces(0):
        eta[k] = bch(t2.eta[k], t1.eta[k])
    eps = {}
    for e in nerve.level_faces(1):
        k0 = (e[0],)
        b0 = move(nerve, flavor, k0, e, locals_like[k0])
        eta0 = move(nerve, flavor, k0, e, t1.eta[k0])
        eps[e] = bch(t1.eps[e], ad_exp(-eta0, t2.eps[e]), beta=b0)
    return TwistedTransformation(eta, eps)


# ---------------------------------------------------------------------------
# layer linear algebra for equiv_solve / obstruction / int_mc
# ---------------------------------------------------------------------------


class LayerWindow:
    """Finite-dimensional unknown spaces per face: degree -1 atoms are layer
    monomials; degree 0 atoms are vector fields (poisson) or normalized
    1-slot operators (associative) with bounded slots; degree 1 atoms are
    bivectors / normalized 2-slot operators."""

    def __init__(self, nerve: CoverNerve, flavor: str, coeff_degree: int, slot_bound: int = 2):
        self.nerve = nerve
        self.flavor = flavor
        self.coeff_degree = coeff_degree
        self.slot_bound = slot_bound
        for f in nerve.faces:
            alg = nerve.algebra(f)
            if alg.denominators:
                raise NerveError(
                    "coefficient layer not finite-dimensional: localized chart "
                    f"at {f}"
                )

    def atoms(self, face: Face, degree: int) -> list:
        car = face_carrier(self.nerve, self.flavor, face)
        chart = car.chart
        monos = chart.monomials_up_to(self.coeff_degree)
        out = []
        if degree == -1:
            for m in monos:
                out.append({(): m})
            return out
        if self.flavor == "poisson":
            n = len(car.deriv_indices)
            if degree == 0:
                keys = [(i,) for i in car.deriv_indices]
            elif degree == 1:
                keys = list(itertools.combinations(car.deriv_indices, 2))
            else:
                raise AlgebraError("unsupported atom degree")
            for key in keys:
                for m in monos:
                    out.append({key: m})
            return out
        # associative: normalized slot tuples
        from .polydiff import _candidate_slots

        for slots in _candidate_slots(car.nderiv, self.slot_bound * (degree + 1), degree + 1):
            for m in monos:
                out.append({slots: m})
        return out

    def coords(self, face: Face, payload) -> dict:
        """{(payload key, exponent) -> Fraction}; errors leaving the window."""
        out: dict = {}
        for key, c in payload.items():
            if any(c.powers):
                raise NerveError("coefficient layer not finite-dimensional")
            for e, q in c.numer.terms.items():
                out[(key, e)] = out.get((key, e), QQ(0)) + q
        return {k: v for k, v in out.items() if v != 0}


@dataclass
class ObstructionReport:
    order: int
    cocycle: dict  # triangle face -> degree-(-1) layer payload (render-ready)
    class_is_zero: Optional[bool]
    detail: str

    def render(self) -> str:
        clas = (
            "zero"
            if self.class_is_zero
            else ("nonzero" if self.class_is_zero is False else "undecided")
        )
        faces = ", ".join(
            f"{f}: {r}" for f, r in sorted((str(k), v) for k, v in self.cocycle.items())
        )
        return (
            f"obstruction at adic order {self.order} (class {clas}); "
            f"layer 2-cocycle: {{{faces}}}; {self.detail}"
        )


class _LayerSystem:
    """One exact linear system per adic order: unknown atoms per (face,
    degree, layer basis index), equation rows per (tag, face, coord key)."""

    def __init__(self, algebra: ParamAlgebra, order: int):
        self.algebra = algebra
        self.order = order
        self.layer_idx = [
            i for i in range(len(algebra.basis)) if algebra.basis_order(i) == order
        ]
        self.columns: list = []  # (slot_key, layer_i, face, atom)
        self.col_index: dict = {}
        self.rows: list = []
        self.row_index: dict = {}
        self.matrix_entries: dict = {}
        self.rhs: dict = {}

    def add_unknown(self, slot_key, face, atoms):
        for li in self.layer_idx:
            for ai, atom in enumerate(atoms):
                key = (slot_key, face, li, ai)
                self.col_index[key] = len(self.columns)
                self.columns.append((slot_key, face, li, atom))

    def _row(self, key):
        if key not in self.row_index:
            self.row_index[key] = len(self.rows)
            self.rows.append(key)
        return self.row_index[key]

    def add_rhs(self, tag, face, window: LayerWindow, defect: DGLAElement):
        """Defect graded part at this order; rhs gets MINUS the defect so the
        equations read  L(unknowns) + defect = 0."""
        for li in self.layer_idx:
            payload = defect.parts.get(li)
            if not payload:
                continue
            for ck, v in window.coords(face, payload).items():
                r = self._row((tag, face, li, ck))
                self.rhs[r] = self.rhs.get(r, QQ(0)) - v

    def add_effect(self, tag, face, window: LayerWindow, col_key, payload, sign: Fraction):
        """Contribution of one atom column to equation rows."""
        j = self.col_index[col_key]
        li = col_key[2]
        for ck, v in window.coords(face, payload).items():
            r = self._row((tag, face, li, ck))
            self.matrix_entries[(r, j)] = self.matrix_entries.get((r, j), QQ(0)) + sign * v

    def solve(self):
        nrows, ncols = len(self.rows), len(self.columns)
        matrix = [[QQ(0)] * ncols for _ in range(nrows)]
        for (r, j), v in self.matrix_entries.items():
            matrix[r][j] = v
        rhs = [self.rhs.get(r, QQ(0)) for r in range(nrows)]
        if nrows == 0:
            return []
        res = solve_linear(matrix, rhs)
        if not res.consistent:
            return None
        return res.particular


def _assemble_unknown_elements(system: _LayerSystem, solution, nerve, flavor, algebra):
    """Collect solved atom coefficients into per-face DGLAElements keyed by
    slot_key."""
    out: dict = {}
    for val, (slot_key, face, li, atom) in zip(solution, system.columns):
        if val == 0:
            continue
        car = face_carrier(nerve, flavor, face)
        payload = {k: c.scale(val) for k, c in atom.items()}
        deg = -1 if list(atom.keys())[0] == () else (len(list(atom.keys())[0]) - 1)
        elt = DGLAElement(car, algebra, deg, {li: payload})
        key = (slot_key, face)
        out[key] = out[key] + elt if key in out else elt
    return out


def _window_degree(defects: Sequence[DGLAElement], default: int = 2) -> int:
    deg = default
    for d in defects:
        for payload in d.parts.values():
            for c in payload.values():
                deg = max(deg, c.numer.total_degree())
    return deg


def _slot_bound(defects: Sequence[DGLAElement], default: int = 2) -> int:
    """Maximal total slot weight over defect terms (d splits slots, so the
    unknown operators may need the full total order of a defect term)."""
    s = default
    for d in defects:
        for payload in d.parts.values():
            for key in payload:
                if key and isinstance(key[0], tuple):
                    s = max(s, sum(sum(a) for a in key))
    return s


# ---------------------------------------------------------------------------
# equiv_solve and obstruction
# ---------------------------------------------------------------------------


def _datum_components(datum):
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    if isinstance(datum, MultDescentDatum):
        loc = {k: datum.locals[k].element for k in nerve.level_faces(0)}
        return loc, datum.edge_gauges, datum.triple_units
    loc = {k: _get(datum.delta0, nerve, flavor, alg, k, 1) for k in nerve.level_faces(0)}
    return loc, datum.delta1, datum.delta2


def _apply(t, datum):
    if isinstance(datum, MultDescentDatum):
        return mdd_gauge(t, datum)
    return add_gauge(t, datum)


def _full_defects(current, target, match_locals):
    nerve, flavor, alg = current.nerve, current.flavor, current.algebra
    cur_loc, cur_edges, cur_tri = _datum_components(current)
    tgt_loc, tgt_edges, tgt_tri = (
        _datum_components(target) if target is not None else (None, {}, {})
    )
    d0, d1, d2 = {}, {}, {}
    for k in nerve.level_faces(0):
        if match_locals:
            d0[k] = cur_loc[k] - tgt_loc[k]
        else:
            d0[k] = DGLAElement.zero(face_carrier(nerve, flavor, k), alg, 1)
    for e in nerve.level_faces(1):
        d1[e] = _get(cur_edges, nerve, flavor, alg, e, 0) - _get(
            tgt_edges, nerve, flavor, alg, e, 0
        )
    for tr in nerve.level_faces(2):
        d2[tr] = _get(cur_tri, nerve, flavor, alg, tr, -1) - _get(
            tgt_tri, nerve, flavor, alg, tr, -1
        )
    return d0, d1, d2


class _JacobianSystem:
    """Exact linearization of the twisted-gauge action at the identity step,
    applied to the current datum, over all adic orders jointly.  Unknowns are
    (face, atom payload, layer basis index); rows are coordinates of the
    defect components (all orders)."""

    def __init__(self, nerve, flavor, alg, window: LayerWindow):
        self.nerve = nerve
        self.flavor = flavor
        self.alg = alg
        self.window = window
        self.layer_idx = [i for i in range(len(alg.basis)) if alg.basis_order(i) >= 1]
        self.columns: list = []
        self.rows: list = []
        self.row_index: dict = {}
        self.entries: dict = {}
        self.rhs: dict = {}

    def _row(self, key):
        if key not in self.row_index:
            self.row_index[key] = len(self.rows)
            self.rows.append(key)
        return self.row_index[key]

    def add_defect(self, tag, face, defect: DGLAElement):
        for li, payload in defect.parts.items():
            for ck, v in self.window.coords(face, payload).items():
                r = self._row((tag, face, li, ck))
                self.rhs[r] = self.rhs.get(r, QQ(0)) - v

    def add_column(self, col_label, effects):
        """effects: list of (tag, face, DGLAElement)."""
        j = len(self.columns)
        self.columns.append(col_label)
        for tag, face, elt in effects:
            for li, payload in elt.parts.items():
                for ck, v in self.window.coords(face, payload).items():
                    r = self._row((tag, face, li, ck))
                    self.entries[(r, j)] = self.entries.get((r, j), QQ(0)) + v

    def solve(self, min_order: int):
        """Solve the рows of adic order <= k for the largest k (k from the
        truncation order down to min_order) that admits a solution.  Returns
        (solution, k) or (None, min_order) when even the min_order layer is
        obstructed."""
        nrows, ncols = len(self.rows), len(self.columns)
        if nrows == 0:
            return [], self.alg.order
        for k in range(self.alg.order, min_order - 1, -1):
            keep = [
                r
                for r in range(nrows)
                if self.alg.basis_order(self.rows[r][2]) <= k
            ]
            matrix = [[QQ(0)] * ncols for _ in keep]
            pos = {r: i for i, r in enumerate(keep)}
            for (r, j), v in self.entries.items():
                if r in pos:
                    matrix[pos[r]][j] = v
            rhs = [self.rhs.get(r, QQ(0)) for r in keep]
            if not keep:
                return [QQ(0)] * ncols, k
            res = solve_linear(matrix, rhs)
            if res.consistent:
                return res.particular, k
        return None, min_order


def _step_effects(nerve, flavor, alg, cur_loc, cur_edges, cur_tri, unknown_kind, face, u, match_locals):
    """Exact derivative of the transformed components in the direction of a
    single unknown element u (an eta at a chart or an eps at an edge)."""
    from .dgla import bch_dleft, bch_dright

    effects = []
    if unknown_kind == "eta":
        k = face
        if match_locals:
            effects.append(("loc", k, u.bracket(cur_loc[k]) - u.d()))
        for e in nerve.level_faces(1):
            if k[0] not in e:
                continue
            gamma = _get(cur_edges, nerve, flavor, alg, e, 0)
            ue = move(nerve, flavor, k, e, u)
            if e[0] == k[0]:
                effects.append(("edge", e, -bch_dright(ue, gamma)))
            else:
                effects.append(("edge", e, bch_dleft(ue, gamma)))
        for tr in nerve.level_faces(2):
            if tr[0] != k[0]:
                continue
            alpha = _get(cur_tri, nerve, flavor, alg, tr, -1)
            ut = move(nerve, flavor, k, tr, u)
            effects.append(("tri", tr, ut.bracket(alpha)))
    else:
        e = face
        k0 = (e[0],)
        beta0 = move(nerve, flavor, k0, e, cur_loc[k0])
        gamma = _get(cur_edges, nerve, flavor, alg, e, 0)
        effects.append(("edge", e, bch_dright(twisted_d(beta0, u), gamma)))
        for tr in nerve.level_faces(2):
            if not set(e) <= set(tr):
                continue
            b0 = move(nerve, flavor, (tr[0],), tr, cur_loc[(tr[0],)])
            alpha = _get(cur_tri, nerve, flavor, alg, tr, -1)
            ut = move(nerve, flavor, e, tr, u)
            if e == (tr[0], tr[1]):
                effects.append(("tri", tr, bch_dleft(ut, alpha, beta=b0)))
            elif e == (tr[1], tr[2]):
                g01 = move(
                    nerve, flavor, (tr[0], tr[1]), tr,
                    _get(cur_edges, nerve, flavor, alg, (tr[0], tr[1]), 0),
                )
                effects.append(("tri", tr, bch_dleft(ad_exp(-g01, ut), alpha, beta=b0)))
            else:  # e == (tr[0], tr[2])
                effects.append(("tri", tr, -bch_dright(ut, alpha, beta=b0)))
    return [(tag, f, elt) for tag, f, elt in effects if not elt.is_zero()]


def equiv_solve(
    datum, target, match_locals: bool = True, max_coeff_degree: Optional[int] = None,
    max_iterations: int = 40,
):
    """Find a twisted gauge transformation carrying ``datum`` to ``target``
    (literal equality of components), or return the first-order
    ObstructionReport.  Newton iteration on the pronilpotent group: each pass
    solves the exact linearization over all central layers jointly and
    composes the step; termination is by the filtration.

    With match_locals=False the locals of the target are ignored and only the
    edge/triple components are matched (the trivialization problem)."""
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    if target is not None and (
        target.nerve != nerve or target.flavor != flavor or target.algebra != alg
    ):
        raise AlgebraError("data over different nerves/flavors/parameter algebras")
    if target is None:
        match_locals = False
    t = identity_transformation(nerve, flavor, alg)
    current = _apply(t, datum)
    stall = 0
    best_order = 0
    for _ in range(max_iterations):
        d0, d1, d2 = _full_defects(current, target, match_locals)
        defects = list(d0.values()) + list(d1.values()) + list(d2.values())
        if all(v.is_zero() for v in defects):
            return t
        p0 = int(min(v.adic_order() for v in defects if not v.is_zero()))
        if p0 > best_order:
            best_order = p0
            stall = 0
        else:
            stall += 1
            if stall > 6:
                return _obstruction_report(nerve, flavor, alg, d2, p0)
        coeff_deg = max_coeff_degree if max_coeff_degree is not None else _window_degree(defects)
        window = LayerWindow(nerve, flavor, coeff_deg, _slot_bound(defects))
        cur_loc, cur_edges, cur_tri = _datum_components(current)
        system = _JacobianSystem(nerve, flavor, alg, window)
        if match_locals:
            for k in nerve.level_faces(0):
                system.add_defect("loc", k, d0[k])
        for e in nerve.level_faces(1):
            system.add_defect("edge", e, d1[e])
        for tr in nerve.level_faces(2):
            system.add_defect("tri", tr, d2[tr])
        unknowns = []
        for k in nerve.level_faces(0):
            car = face_carrier(nerve, flavor, k)
            for li in system.layer_idx:
                for atom in window.atoms(k, 0):
                    u = DGLAElement(car, alg, 0, {li: atom})
                    effects = _step_effects(
                        nerve, flavor, alg, cur_loc, cur_edges, cur_tri,
                        "eta", k, u, match_locals,
                    )
                    system.add_column(("eta", k, li, atom), effects)
                    unknowns.append(("eta", k, li, atom))
        for e in nerve.level_faces(1):
            car = face_carrier(nerve, flavor, e)
            for li in system.layer_idx:
                for atom in window.atoms(e, -1):
                    u = DGLAElement(car, alg, -1, {li: atom})
                    effects = _step_effects(
                        nerve, flavor, alg, cur_loc, cur_edges, cur_tri,
                        "eps", e, u, match_locals,
                    )
                    system.add_column(("eps", e, li, atom), effects)
                    unknowns.append(("eps", e, li, atom))
        solution, _solved_to = system.solve(p0)
        if solution is None:
            return _obstruction_report(nerve, flavor, alg, d2, p0)
        step = identity_transformation(nerve, flavor, alg)
        for val, (ukind, face, li, atom) in zip(solution, unknowns):
            if val == 0:
                continue
            car = face_carrier(nerve, flavor, face)
            payload = {k2: c.scale(val) for k2, c in atom.items()}
            deg = 0 if ukind == "eta" else -1
            add = DGLAElement(car, alg, deg, {li: payload})
            if ukind == "eta":
                step.eta[face] = step.eta[face] + add
            else:
                step.eps[face] = step.eps[face] + add
        t = compose_transformations(step, t, datum)
        current = _apply(t, datum)
    d0, d1, d2 = _full_defects(current, target, match_locals)
    if all(v.is_zero() for v in list(d0.values()) + list(d1.values()) + list(d2.values())):
        return t
    p0 = int(min(v.adic_order() for v in list(d0.values()) + list(d1.values()) + list(d2.values()) if not v.is_zero()))
    return _obstruction_report(nerve, flavor, alg, d2, p0)


def _obstruction_report(nerve, flavor, alg, d2, p) -> ObstructionReport:
    """The triangle defect at the failing order, with its Cech class decided
    by the coboundary solver on the constant/truncated layer."""
    cocycle = {}
    renders = {}
    degree_bound = -1
    all_const = True
    for tr, v in d2.items():
        layer = v.graded_part(p)
        if layer.is_zero():
            continue
        cocycle[tr] = layer
        renders[tr] = layer.render()
        for payload in layer.parts.values():
            c = payload.get(())
            if c is not None and not c.numer.is_constant():
                all_const = False
                degree_bound = max(degree_bound, c.numer.total_degree())
    class_is_zero: Optional[bool] = None
    try:
        spec = LayerSpec(nerve, -1 if all_const else degree_bound)
        cx = CechComplex(spec)
        # decide per layer basis monomial of order p
        zero = True
        for li in [i for i in range(len(alg.basis)) if alg.basis_order(i) == p]:
            data = {}
            for tr, v in cocycle.items():
                payload = v.parts.get(li)
                if not payload:
                    continue
                c = payload.get(())
                if c is None:
                    continue
                data[tr] = spec.expand(tr, c)
            if data and cx.coboundary_solve(2, data) is None:
                zero = False
        class_is_zero = zero
    except NerveError:
        class_is_zero = None
    return ObstructionReport(p, renders, class_is_zero, "first unsolvable central layer")


def trivial_datum_from_global(
    nerve: CoverNerve, flavor: str, algebra: ParamAlgebra, chart_mc: Mapping
) -> MultDescentDatum:
    """The datum induced by a global object: local deformations restricted
    from compatible chart MC elements, with trivial gauges and units."""
    locals_ = {}
    for k in nerve.level_faces(0):
        locals_[k] = require_mc(chart_mc[k])
    edges = {}
    triples = {}
    return MultDescentDatum(nerve, flavor, algebra, locals_, edges, triples)


def obstruction(datum: MultDescentDatum, against: Optional[MultDescentDatum] = None):
    """Order-by-order trivialization.  Returns a TwistedTransformation when
    the datum trivializes (edge gauges and triple units both killed; against
    a given global datum, full equality), else the first ObstructionReport."""
    if against is None:
        return equiv_solve(datum, None, match_locals=False)
    return equiv_solve(datum, against, match_locals=True)


# ---------------------------------------------------------------------------
# int: MC(Thom-Sullivan) -> ADD
# ---------------------------------------------------------------------------


def int_mc(handle: TSHandle, beta: DGLAElement | MCElement, validate: bool = True) -> AddDescentDatum:
    """Integrate an MC element of the Thom-Sullivan DG Lie algebra to an
    additive descent datum: the square-zero formulas (level-0 value, edge and
    triangle simplex integrals) plus order-by-order central-layer corrections
    of conditions (i)-(iv)."""
    b = beta.element if isinstance(beta, MCElement) else beta
    if validate:
        from .thomsullivan import validate_compatibility

        validate_compatibility(b)
        require_mc(b)
    nerve, flavor, alg = handle.nerve, _flavor_of_kind(handle.kind), handle.algebra
    delta0 = _split_faces(level_zero_element(handle, b), nerve, flavor, alg, 1)
    delta1 = _split_faces(integrate_component(handle, b, 1), nerve, flavor, alg, 0)
    delta2 = _split_faces(integrate_component(handle, b, 2), nerve, flavor, alg, -1)
    datum = AddDescentDatum(nerve, flavor, alg, delta0, delta1, delta2)
    for p in range(2, alg.order + 1):
        rep = check_add(datum)
        if rep.ok:
            break
        first = min(v.order for v in rep.violations)
        if first > p:
            continue
        if first < p:
            raise AlgebraError(
                f"int_mc correction fell behind at order {first}: solver bug"
            )
        datum = _int_correct(datum, p)
    rep = check_add(datum)
    if not rep.ok:
        raise AlgebraError("int_mc failed to produce a valid datum: " + rep.render())
    return datum


def _flavor_of_kind(kind: str) -> str:
    return "associative" if kind == "polydiff" else "poisson"


def _split_faces(element: DGLAElement, nerve, flavor, alg, degree) -> dict:
    """Turn a Cech-level element into per-face DGLAElements."""
    out = {}
    car = element.carrier
    for face in car.nerve.level_faces(car.level):
        parts = {}
        for bi, comp in element.parts.items():
            v = comp.get(face)
            if v:
                parts[bi] = v
        if parts:
            out[face] = DGLAElement(
                face_carrier(nerve, flavor, face), alg, degree, parts
            )
    return out


def _int_correct(datum: AddDescentDatum, p: int) -> AddDescentDatum:
    """Solve the order-p linear correction (c0, c1, c2) of conditions
    (i)-(iv); inconsistency surfaces as an error naming the order."""
    nerve, flavor, alg = datum.nerve, datum.flavor, datum.algebra
    kind = kind_of(flavor)
    # exact defects
    def_i = {}
    for k in nerve.level_faces(0):
        def_i[k] = mc_residue(_get(datum.delta0, nerve, flavor, alg, k, 1))
    def_ii = {}
    for e in nerve.level_faces(1):
        k0, k1 = (e[0],), (e[1],)
        b0 = move(nerve, flavor, k0, e, _get(datum.delta0, nerve, flavor, alg, k0, 1))
        b1 = move(nerve, flavor, k1, e, _get(datum.delta0, nerve, flavor, alg, k1, 1))
        def_ii[e] = gauge_act(_get(datum.delta1, nerve, flavor, alg, e, 0), b0) - b1
    def_iii = {}
    for tr in nerve.level_faces(2):
        k0 = (tr[0],)
        e01, e02, e12 = (tr[0], tr[1]), (tr[0], tr[2]), (tr[1], tr[2])
        g01 = move(nerve, flavor, e01, tr, _get(datum.delta1, nerve, flavor, alg, e01, 0))
        g02 = move(nerve, flavor, e02, tr, _get(datum.delta1, nerve, flavor, alg, e02, 0))
        g12 = move(nerve, flavor, e12, tr, _get(datum.delta1, nerve, flavor, alg, e12, 0))
        b0 = move(nerve, flavor, k0, tr, _get(datum.delta0, nerve, flavor, alg, k0, 1))
        a = _get(datum.delta2, nerve, flavor, alg, tr, -1)
        def_iii[tr] = bch_many([-g02, g12, g01]) - twisted_d(b0, a)
    def_iv = {}
    for w in nerve.level_faces(3):
        k0 = (w[0],)
        b0 = move(nerve, flavor, k0, w, _get(datum.delta0, nerve, flavor, alg, k0, 1))

        def tri(i, j, k):
            f = (w[i], w[j], w[k])
            return move(nerve, flavor, f, w, _get(datum.delta2, nerve, flavor, alg, f, -1))

        e01 = (w[0], w[1])
        g01 = move(nerve, flavor, e01, w, _get(datum.delta1, nerve, flavor, alg, e01, 0))
        def_iv[w] = bch_many([-tri(0, 1, 3), tri(0, 2, 3), tri(0, 1, 2)], beta=b0) - ad_exp(
            -g01, tri(1, 2, 3)
        )
    defects = (
        list(def_i.values())
        + list(def_ii.values())
        + list(def_iii.values())
        + list(def_iv.values())
    )
    window = LayerWindow(nerve, flavor, _window_degree(defects), _slot_bound(defects))
    system = _LayerSystem(alg, p)
    for k in nerve.level_faces(0):
        system.add_unknown(("c0", k), k, window.atoms(k, 1))
    for e in nerve.level_faces(1):
        system.add_unknown(("c1", e), e, window.atoms(e, 0))
    for tr in nerve.level_faces(2):
        system.add_unknown(("c2", tr), tr, window.atoms(tr, -1))
    # (i): d(c0_k) + Di = 0
    for k in nerve.level_faces(0):
        system.add_rhs(("i",), k, window, def_i[k].graded_part(p))
        car = face_carrier(nerve, flavor, k)
        for li in system.layer_idx:
            for ai, atom in enumerate(window.atoms(k, 1)):
                img = car.d(atom, 1)
                if img:
                    system.add_effect(("i",), k, window, (("c0", k), k, li, ai), img, QQ(1))
    # (ii): c0|k0 - c0|k1 - d(c1_e) + Dii = 0
    for e in nerve.level_faces(1):
        system.add_rhs(("ii",), e, window, def_ii[e].graded_part(p))
        k0, k1 = (e[0],), (e[1],)
        ecar = face_carrier(nerve, flavor, e)
        for li in system.layer_idx:
            for ai, atom in enumerate(window.atoms(k0, 1)):
                moved = transport_payload(nerve, kind, k0, e, atom)
                if moved:
                    system.add_effect(("ii",), e, window, (("c0", k0), k0, li, ai), moved, QQ(1))
            for ai, atom in enumerate(window.atoms(k1, 1)):
                moved = transport_payload(nerve, kind, k1, e, atom)
                if moved:
                    system.add_effect(("ii",), e, window, (("c0", k1), k1, li, ai), moved, QQ(-1))
            for ai, atom in enumerate(window.atoms(e, 0)):
                img = ecar.d(atom, 0)
                if img:
                    system.add_effect(("ii",), e, window, (("c1", e), e, li, ai), img, QQ(-1))
    # (iii): -c1|02 + c1|12 + c1|01 - d(c2_t) + Diii = 0
    for tr in nerve.level_faces(2):
        system.add_rhs(("iii",), tr, window, def_iii[tr].graded_part(p))
        e01, e02, e12 = (tr[0], tr[1]), (tr[0], tr[2]), (tr[1], tr[2])
        tcar = face_carrier(nerve, flavor, tr)
        for li in system.layer_idx:
            for e, sign in ((e01, QQ(1)), (e12, QQ(1)), (e02, QQ(-1))):
                for ai, atom in enumerate(window.atoms(e, 0)):
                    moved = transport_payload(nerve, kind, e, tr, atom)
                    if moved:
                        system.add_effect(("iii",), tr, window, (("c1", e), e, li, ai), moved, sign)
            for ai, atom in enumerate(window.atoms(tr, -1)):
                img = tcar.d(atom, -1)
                if img:
                    system.add_effect(("iii",), tr, window, (("c2", tr), tr, li, ai), img, QQ(-1))
    # (iv): -c2|013 + c2|023 + c2|012 - c2|123 + Div = 0
    for w in nerve.level_faces(3):
        system.add_rhs(("iv",), w, window, def_iv[w].graded_part(p))
        for li in system.layer_idx:
            for (idx, sign) in (
                ((w[0], w[1], w[3]), QQ(-1)),
                ((w[0], w[2], w[3]), QQ(1)),
                ((w[0], w[1], w[2]), QQ(1)),
                ((w[1], w[2], w[3]), QQ(-1)),
            ):
                for ai, atom in enumerate(window.atoms(idx, -1)):
                    moved = transport_payload(nerve, kind, idx, w, atom)
                    if moved:
                        system.add_effect(("iv",), w, window, (("c2", idx), idx, li, ai), moved, sign)
    solution = system.solve()
    if solution is None:
        raise AlgebraError(
            f"int_mc linear correction system inconsistent at adic order {p} "
            "(implementation bug or MC violation)"
        )
    solved = _assemble_unknown_elements(system, solution, nerve, flavor, alg)
    out = datum.copy()
    for k in nerve.level_faces(0):
        v = solved.get((("c0", k), k))
        if v is not None:
            out.delta0[k] = _get(out.delta0, nerve, flavor, alg, k, 1) + v
    for e in nerve.level_faces(1):
        v = solved.get((("c1", e), e))
        if v is not None:
            out.delta1[e] = _get(out.delta1, nerve, flavor, alg, e, 0) + v
    for tr in nerve.level_faces(2):
        v = solved.get((("c2", tr), tr))
        if v is not None:
            out.delta2[tr] = _get(out.delta2, nerve, flavor, alg, tr, -1) + v
    return out
