"""Text and JSON formats: the canonical expression syntax for polynomials,
localized fractions, polyvectors, polydifferential cochains and parameter
series; JSON loaders for nerves, descent data, Poisson inputs and
Thom-Sullivan elements; and re-parseable serializers for descent data.

Every constructive command's serialized output parses back through these
loaders and passes the corresponding check (tested)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .exactalg import AlgebraError, ChartAlgebra, LocalizedPoly, Poly
from .params import ParamAlgebra, ParamSeries, param_algebra_truncate
from .dgla import DGLAElement, require_mc
from .polyvec import PolyvecCarrier, merge_odd
from .polydiff import PolydiffCarrier
from .cechnerve import CoverNerve, RestrictionMap, build_nerve
from .descent import (
    AddDescentDatum,
    MultDescentDatum,
    face_carrier,
    kind_of,
)
from .thomsullivan import ts_normalize, whitney
from .cechnerve import CechCarrier


class FormatError(ValueError):
    """Schema or expression syntax error (CLI exit code 2)."""


# ---------------------------------------------------------------------------
# tokenizer / parser for the canonical expression syntax
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+)|(?P<slot>d\[[0-9,\s]*\])|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[\^*/+\-()]|⊗|@))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise FormatError(f"cannot tokenize {rest[:20]!r} (position {pos})")
        if m.group("number"):
            out.append(("num", m.group("number")))
        elif m.group("slot"):
            out.append(("slot", m.group("slot")))
        elif m.group("name"):
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            if op == "@":
                op = "⊗"
            out.append(("op", op))
        pos = m.end()
    return out


@dataclass
class ExprContext:
    """Everything a parsed expression may refer to."""

    algebra: ParamAlgebra
    chart: ChartAlgebra
    carrier_kind: str  # 'polyvec' | 'polydiff'

    def carrier(self):
        deriv = [
            i for i, v in enumerate(self.chart.variables) if not _is_tvar(v)
        ]
        if self.carrier_kind == "polyvec":
            return PolyvecCarrier(self.chart, deriv)
        return PolydiffCarrier(self.chart, deriv)


def _is_tvar(name: str) -> bool:
    return bool(re.fullmatch(r"t\d+", name))


class _Value:
    """Intermediate value: a parameter series times a coefficient times an
    optional geometric part (wedge key with sign, or slot tuple)."""

    __slots__ = ("series", "coeff", "geom", "gsign")

    def __init__(self, series: ParamSeries, coeff: LocalizedPoly, geom=None, gsign=1):
        self.series = series
        self.coeff = coeff
        self.geom = geom  # None | ('vec', tuple) | ('slots', tuple)
        self.gsign = gsign


class ExprParser:
    def __init__(self, ctx: ExprContext, text: str):
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.pos = 0
        self.car = ctx.carrier()

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise FormatError(f"expected {op!r}, found {val!r}")

    # value assembly -------------------------------------------------------

    def _one(self) -> _Value:
        return _Value(self.ctx.algebra.one(), self.ctx.chart.one())

    def _mul(self, a: _Value, b: _Value) -> _Value:
        if a.geom is not None and b.geom is not None:
            raise FormatError("cannot multiply two direction/slot factors with *")
        geom = a.geom if a.geom is not None else b.geom
        gsign = a.gsign * b.gsign
        return _Value(a.series * b.series, a.coeff * b.coeff, geom, gsign)

    def _wedge(self, a: _Value, b: _Value) -> _Value:
        if self.ctx.carrier_kind != "polyvec":
            raise FormatError("wedge ^ between directions needs a polyvector context")
        if (
            a.geom is None or b.geom is None
            or a.geom[0] != "vec" or b.geom[0] != "vec"
        ):
            raise FormatError("wedge ^ needs direction factors on both sides")
        ka = a.geom[1]
        kb = b.geom[1]
        merged = merge_odd(ka, kb)
        if merged is None:
            # repeated direction: the zero polyvector
            return _Value(self.ctx.algebra.one(), self.ctx.chart.zero(), ("vec", ka), 1)
        key, sign = merged
        return _Value(
            a.series * b.series, a.coeff * b.coeff, ("vec", key), a.gsign * b.gsign * sign
        )

    def _tensor(self, a: _Value, b: _Value) -> _Value:
        if self.ctx.carrier_kind != "polydiff":
            raise FormatError("slot tensor needs a polydifferential context")
        if a.geom is None or b.geom is None or a.geom[0] != "slots" or b.geom[0] != "slots":
            raise FormatError("tensor needs d[...] factors on both sides")
        return _Value(
            a.series * b.series,
            a.coeff * b.coeff,
            ("slots", a.geom[1] + b.geom[1]),
            a.gsign * b.gsign,
        )

    # grammar ---------------------------------------------------------------

    def parse(self) -> DGLAElement:
        acc = None
        sign = 1
        kind, val = self.peek()
        if (kind, val) == ("op", "-"):
            self.take()
            sign = -1
        while True:
            v = self.parse_term()
            elt = self._to_element(v, sign)
            acc = elt if acc is None else acc + elt
            kind, val = self.peek()
            if (kind, val) == ("op", "+"):
                self.take()
                sign = 1
            elif (kind, val) == ("op", "-"):
                self.take()
                sign = -1
            else:
                break
        if self.pos != len(self.tokens):
            raise FormatError(f"unexpected trailing tokens near {self.tokens[self.pos]}")
        assert acc is not None
        return acc

    def parse_term(self) -> _Value:
        v = self.parse_factor()
        while True:
            kind, val = self.peek()
            if (kind, val) == ("op", "*"):
                self.take()
                v = self._mul(v, self.parse_factor())
            elif (kind, val) == ("op", "/"):
                self.take()
                d = self.parse_factor()
                if d.geom is not None:
                    raise FormatError("cannot divide by a direction factor")
                if not d.series == self.ctx.algebra.one():
                    raise FormatError("cannot divide by a parameter series")
                v = self._mul(
                    v, _Value(self.ctx.algebra.one(), d.coeff.invert())
                )
            elif (kind, val) == ("op", "^"):
                self.take()
                rhs = self.parse_factor_nopow()
                if v.geom is not None and rhs.geom is not None:
                    v = self._wedge(v, rhs)
                else:
                    raise FormatError("misplaced ^ (integer powers bind inside factors)")
            elif (kind, val) == ("op", "⊗"):
                self.take()
                v = self._tensor(v, self.parse_factor_nopow())
            else:
                return v

    def parse_factor(self) -> _Value:
        v = self.parse_factor_nopow()
        kind, val = self.peek()
        if (kind, val) == ("op", "^"):
            # integer power only for scalar factors; direction wedges are
            # handled in parse_term
            if v.geom is None:
                self.take()
                k2, v2 = self.take()
                if k2 != "num":
                    raise FormatError("expected an integer exponent after ^")
                n = int(v2)
                out = self._one()
                for _ in range(n):
                    out = self._mul(out, v)
                return out
        return v

    def parse_factor_nopow(self) -> _Value:
        kind, val = self.take()
        if kind == "num":
            return _Value(
                self.ctx.algebra.one(),
                LocalizedPoly.const(self.ctx.chart, int(val)),
            )
        if kind == "slot":
            body = val[2:-1].strip()
            alpha = tuple(int(x) for x in body.split(",")) if body else ()
            deriv = [
                i for i, v2 in enumerate(self.ctx.chart.variables) if not _is_tvar(v2)
            ]
            if len(alpha) != len(deriv):
                raise FormatError(
                    f"slot {val} has {len(alpha)} entries for {len(deriv)} variables"
                )
            return _Value(self.ctx.algebra.one(), self.ctx.chart.one(), ("slots", (alpha,)))
        if kind == "name":
            if val in self.ctx.algebra.gens:
                return _Value(self.ctx.algebra.gen(val), self.ctx.chart.one())
            if val in self.ctx.chart.variables:
                return _Value(self.ctx.algebra.one(), self.ctx.chart.var(val))
            if val.startswith("d") and val[1:] in self.ctx.chart.variables:
                i = self.ctx.chart.variables.index(val[1:])
                return _Value(self.ctx.algebra.one(), self.ctx.chart.one(), ("vec", (i,)))
            raise FormatError(f"unknown symbol {val!r}")
        if (kind, val) == ("op", "("):
            return self._parse_subexpr()
        if (kind, val) == ("op", "-"):
            v = self.parse_factor_nopow()
            return _Value(v.series.scale(-1), v.coeff, v.geom, v.gsign)
        raise FormatError(f"unexpected token {val!r}")

    def _parse_subexpr(self) -> _Value:
        """Parse a parenthesized expression.  Sums of pure scalars collapse to
        a scalar value; sums with geometry return an opaque element value."""
        values: list[tuple[int, _Value]] = []
        sign = 1
        kind, val = self.peek()
        if (kind, val) == ("op", "-"):
            self.take()
            sign = -1
        while True:
            v = self.parse_term()
            values.append((sign, v))
            kind, val = self.peek()
            if (kind, val) == ("op", "+"):
                self.take()
                sign = 1
            elif (kind, val) == ("op", "-"):
                self.take()
                sign = -1
            elif (kind, val) == ("op", ")"):
                self.take()
                break
            else:
                raise FormatError(f"expected + - or ) in parentheses, found {val!r}")
        if all(v.geom is None for _, v in values):
            # scalar sum: requires a common parameter-series factor of 1, or
            # collapse into (series (x) coeff) pairs -- here we keep exactness
            # by demanding the series parts be equal (common case: all 1)
            acc = None
            for s, v in values:
                if not v.series == self.ctx.algebra.one():
                    acc = None
                    break
                c = v.coeff.scale(s)
                acc = c if acc is None else acc + c
            else:
                return _Value(self.ctx.algebra.one(), acc)
        # general case: build the element and wrap it
        elt = None
        for s, v in values:
            e = self._to_element(v, s)
            elt = e if elt is None else elt + e
        return _ElementValue(elt)

    def _to_element(self, v: _Value, sign: int) -> DGLAElement:
        if isinstance(v, _ElementValue):
            return v.element.scale(sign)
        coeff = v.coeff.scale(sign * v.gsign)
        if v.geom is None:
            if self.ctx.carrier_kind == "polyvec":
                payload = self.car.from_coeff(coeff)
            else:
                payload = self.car.from_coeff(coeff)
            degree = -1
        elif v.geom[0] == "vec":
            payload = {v.geom[1]: coeff} if not coeff.is_zero() else {}
            degree = len(v.geom[1]) - 1
        else:
            payload = {v.geom[1]: coeff} if not coeff.is_zero() else {}
            degree = len(v.geom[1]) - 1
        parts = {}
        for i, q in v.series.coeffs.items():
            pay = {k: c.scale(q) for k, c in payload.items()}
            pay = {k: c for k, c in pay.items() if not c.is_zero()}
            if pay:
                parts[i] = pay
        return DGLAElement(self.car, self.ctx.algebra, degree, parts)


class _ElementValue(_Value):
    """A parenthesized mixed sum, already assembled."""

    def __init__(self, element: DGLAElement):
        super().__init__(element.algebra.one(), None)
        self.element = element

    @property
    def geom(self):  # type: ignore[override]
        return ("element", None)

    @geom.setter
    def geom(self, v):
        pass


def parse_element(ctx: ExprContext, text: str) -> DGLAElement:
    return ExprParser(ctx, text).parse()


def parse_poly(chart: ChartAlgebra, text: str, algebra: Optional[ParamAlgebra] = None) -> LocalizedPoly:
    alg = algebra or param_algebra_truncate(["_eps"], 1)
    ctx = ExprContext(alg, chart, "polyvec")
    elt = parse_element(ctx, text)
    if elt.degree != -1:
        raise FormatError("expected a scalar expression")
    if elt.is_zero():
        return chart.zero()
    if set(elt.parts) - {0}:
        raise FormatError("scalar expression must not involve parameters")
    return elt.parts[0].get((), chart.zero())


# geometry multiplication for _ElementValue products -------------------------


def _scalar_times_element(scalar: _Value, elt: DGLAElement) -> DGLAElement:
    out = elt.scale_series(scalar.series)
    coeff = scalar.coeff.scale(scalar.gsign)

    def mulc(payload):
        return {
            k: v
            for k, v in ((k, c * coeff) for k, c in payload.items())
            if not v.is_zero()
        }

    return out.map_payload(mulc)


# patch _mul to cope with element values
_orig_mul = ExprParser._mul


def _mul_with_elements(self, a, b):
    if isinstance(a, _ElementValue) and isinstance(b, _ElementValue):
        raise FormatError("cannot multiply two parenthesized element sums")
    if isinstance(a, _ElementValue):
        return _ElementValue(_scalar_times_element(b, a.element))
    if isinstance(b, _ElementValue):
        return _ElementValue(_scalar_times_element(a, b.element))
    return _orig_mul(self, a, b)


ExprParser._mul = _mul_with_elements


# ---------------------------------------------------------------------------
# JSON loaders
# ---------------------------------------------------------------------------


def _require(cond: bool, msg: str):
    if not cond:
        raise FormatError(msg)


def load_params(obj: Mapping) -> ParamAlgebra:
    _require(isinstance(obj, dict), "params must be an object")
    gens = obj.get("gens")
    order = obj.get("order")
    _require(isinstance(gens, list) and gens, "params.gens must be a nonempty list")
    _require(isinstance(order, int) and order >= 1, "params.order must be >= 1")
    extra = [tuple(e) for e in obj.get("extra_relations", [])]
    return param_algebra_truncate(gens, order, extra)


def load_chart(obj: Mapping) -> ChartAlgebra:
    _require(isinstance(obj, dict), "chart must be an object")
    variables = tuple(obj.get("variables", []))
    plain = ChartAlgebra(variables)
    dens = []
    for s in obj.get("denominators", []):
        p = parse_poly(plain, s)
        dens.append(p.numer)
    return ChartAlgebra(variables, tuple(dens))


def _face_of(label: str, indices: Sequence[str]) -> tuple:
    pos = {name: i for i, name in enumerate(indices)}
    parts = [p.strip() for p in label.split(",")]
    for p in parts:
        _require(p in pos, f"unknown chart name {p!r}")
    out = tuple(pos[p] for p in parts)
    _require(list(out) == sorted(set(out)), f"face {label!r} is not strictly increasing")
    return out


def load_nerve(obj: Mapping) -> CoverNerve:
    _require(obj.get("schema") == 1, "nerve: schema must be 1")
    indices = obj.get("indices")
    _require(isinstance(indices, list) and indices, "nerve.indices must be a list")
    faces_obj = obj.get("faces")
    _require(isinstance(faces_obj, dict) and faces_obj, "nerve.faces must be an object")
    algebras = {}
    for label, chart_obj in faces_obj.items():
        algebras[_face_of(label, indices)] = load_chart(chart_obj)
    restrictions = {}
    for key, spec in (obj.get("restrictions") or {}).items():
        m = re.fullmatch(r"(.*?)\s*->\s*(.*)", key)
        _require(m is not None, f"restriction key {key!r} must be 'FACE -> COFACE'")
        f = _face_of(m.group(1), indices)
        g = _face_of(m.group(2), indices)
        src, tgt = algebras[f], algebras[g]
        images = []
        img_map = spec.get("images", {})
        for v in src.variables:
            _require(v in img_map, f"restriction {key!r}: missing image of {v}")
            images.append(parse_localized(tgt, img_map[v]))
        derivs = None
        if "derivations" in spec:
            derivs = []
            ctx = ExprContext(param_algebra_truncate(["_eps"], 1), tgt, "polyvec")
            for v in src.variables:
                elt = parse_element(ctx, spec["derivations"][v])
                _require(elt.degree == 0, "derivation images must be vector fields")
                derivs.append(elt.parts.get(0, {}))
        restrictions[(f, g)] = RestrictionMap.build(src, tgt, images, derivs)
    try:
        return build_nerve(indices, algebras, restrictions)
    except AlgebraError as exc:
        raise FormatError(str(exc)) from exc


def parse_localized(chart: ChartAlgebra, text: str) -> LocalizedPoly:
    alg = param_algebra_truncate(["_eps"], 1)
    ctx = ExprContext(alg, chart, "polyvec")
    elt = parse_element(ctx, text)
    _require(elt.degree == -1, "expected a scalar expression")
    if elt.is_zero():
        return chart.zero()
    _require(set(elt.parts) == {0}, "scalar expression must not involve parameters")
    return elt.parts[0].get((), chart.zero())


def _datum_ctx(nerve: CoverNerve, flavor: str, algebra: ParamAlgebra, face) -> ExprContext:
    return ExprContext(algebra, nerve.algebra(face), kind_of(flavor))


def load_descent(obj: Mapping):
    _require(obj.get("schema") == 1, "descent datum: schema must be 1")
    kind = obj.get("kind")
    _require(kind in ("mdd", "add"), "kind must be 'mdd' or 'add'")
    flavor = obj.get("flavor")
    _require(flavor in ("associative", "poisson"), "flavor must be associative|poisson")
    algebra = load_params(obj.get("params"))
    nerve = load_nerve(obj.get("nerve"))
    keys = ("locals", "edges", "triples") if kind == "mdd" else ("delta0", "delta1", "delta2")
    data = []
    for level, key in enumerate(keys):
        section = obj.get(key) or {}
        out = {}
        degree = 1 if level == 0 else (0 if level == 1 else -1)
        for label, text in sorted(section.items()):
            face = _face_of(label, nerve.indices)
            _require(len(face) == level + 1, f"{key}: face {label!r} has the wrong level")
            _require(face in nerve.faces, f"{key}: face {label!r} absent from the nerve")
            ctx = _datum_ctx(nerve, flavor, algebra, face)
            elt = parse_element(ctx, text)
            _require(elt.degree == degree or elt.is_zero(),
                     f"{key}[{label}]: expected degree {degree}")
            if elt.is_zero():
                continue
            out[face] = elt if elt.degree == degree else DGLAElement(
                elt.carrier, algebra, degree, {}
            )
        data.append(out)
    if kind == "add":
        return AddDescentDatum(nerve, flavor, algebra, data[0], data[1], data[2])
    locals_ = {}
    for k in nerve.level_faces(0):
        raw = data[0].get(k)
        if raw is None:
            raw = DGLAElement.zero(face_carrier(nerve, flavor, k), algebra, 1)
        locals_[k] = require_mc(raw)
    return MultDescentDatum(nerve, flavor, algebra, locals_, data[1], data[2])


def load_ts_element(obj: Mapping):
    """Thom-Sullivan input: a sum of Whitney images of Cech cochains, plus an
    optional TS gauge (also Whitney-built) acting on it, plus raw components."""
    _require(obj.get("schema") == 1, "ts element: schema must be 1")
    flavor = obj.get("flavor")
    _require(flavor in ("associative", "poisson"), "flavor must be associative|poisson")
    algebra = load_params(obj.get("params"))
    nerve = load_nerve(obj.get("nerve"))
    handle = ts_normalize(nerve, kind_of(flavor), algebra)
    beta = handle.zero(1)
    for spec in obj.get("whitney", []):
        beta = beta + _whitney_from_spec(handle, nerve, flavor, algebra, spec, total_degree=1)
    for spec in obj.get("components", []):
        beta = beta + _raw_ts_component(handle, nerve, flavor, algebra, spec)
    from .dgla import gauge_act

    for spec in obj.get("gauge", []):
        g = _whitney_from_spec(handle, nerve, flavor, algebra, spec, total_degree=0)
        beta = gauge_act(g, beta)
    return handle, beta


def _whitney_from_spec(handle, nerve, flavor, algebra, spec, total_degree):
    q = spec.get("q")
    _require(isinstance(q, int) and q >= 0, "whitney spec needs q >= 0")
    internal = total_degree - q
    car = CechCarrier(nerve, kind_of(flavor), q, 0)
    parts: dict = {}
    for label, text in sorted((spec.get("values") or {}).items()):
        face = _face_of(label, nerve.indices)
        _require(len(face) == q + 1, f"whitney value face {label!r} has level != q")
        ctx = _datum_ctx(nerve, flavor, algebra, face)
        elt = parse_element(ctx, text)
        _require(elt.degree == internal or elt.is_zero(),
                 f"whitney value at {label!r}: expected internal degree {internal}")
        for bi, payload in elt.parts.items():
            parts.setdefault(bi, {})[face] = payload
    cochain = DGLAElement(car, algebra, internal, parts)
    return whitney(handle, q, cochain)


def _raw_ts_component(handle, nerve, flavor, algebra, spec):
    level = spec.get("level")
    dts = frozenset(spec.get("dts", []))
    label = spec.get("face")
    text = spec.get("value")
    _require(isinstance(level, int) and level >= 0, "ts component needs a level")
    face = _face_of(label, nerve.indices)
    from .cechnerve import extend_chart

    chart = extend_chart(nerve.algebra(face), level)
    ctx = ExprContext(algebra, chart, kind_of(flavor))
    elt = parse_element(ctx, text)
    internal = 1 - len(dts)
    _require(elt.degree == internal, f"ts component at {label!r}: wrong internal degree")
    payload: dict = {}
    for bi, pay in elt.parts.items():
        payload[bi] = {(level, dts): {face: pay}}
    return DGLAElement(handle.carrier, algebra, 1, payload)


# ---------------------------------------------------------------------------
# serializers (re-parseable)
# ---------------------------------------------------------------------------


def render_params(algebra: ParamAlgebra) -> dict:
    out = {"gens": list(algebra.gens), "order": algebra.order}
    if algebra.extra_relations:
        out["extra_relations"] = [list(e) for e in algebra.extra_relations]
    return out


def render_chart(chart: ChartAlgebra) -> dict:
    return {
        "variables": list(chart.variables),
        "denominators": [d.render() for d in chart.denominators],
    }


def render_nerve(nerve: CoverNerve) -> dict:
    faces = {}
    for f in sorted(nerve.faces):
        faces[nerve.label(f)] = render_chart(nerve.algebra(f))
    restrictions = {}
    for f in sorted(nerve.faces):
        for g in sorted(nerve.faces):
            if len(g) == len(f) + 1 and set(f) <= set(g):
                rm = nerve.restriction(f, g)
                images = {
                    v: rm.var_images[i].render()
                    for i, v in enumerate(rm.source.variables)
                }
                derivs = {}
                car = PolyvecCarrier(rm.target)
                for i, v in enumerate(rm.source.variables):
                    derivs[v] = car.render(rm.deriv_images[i], 0)
                entry = {"images": images}
                if derivs:
                    entry["derivations"] = derivs
                restrictions[f"{nerve.label(f)} -> {nerve.label(g)}"] = entry
    return {
        "schema": 1,
        "kind": "nerve",
        "indices": list(nerve.indices),
        "faces": faces,
        "restrictions": restrictions,
    }


def render_descent(datum) -> dict:
    nerve = datum.nerve
    if isinstance(datum, MultDescentDatum):
        kind = "mdd"
        sections = {
            "locals": {k: v.element for k, v in datum.locals.items()},
            "edges": datum.edge_gauges,
            "triples": datum.triple_units,
        }
    else:
        kind = "add"
        sections = {
            "delta0": datum.delta0,
            "delta1": datum.delta1,
            "delta2": datum.delta2,
        }
    body = {}
    for key, mapping in sections.items():
        rendered = {}
        for face in sorted(mapping):
            elt = mapping[face]
            if elt is None or (hasattr(elt, "is_zero") and elt.is_zero()):
                continue
            rendered[nerve.label(face)] = elt.render()
        body[key] = rendered
    return {
        "schema": 1,
        "kind": kind,
        "flavor": datum.flavor,
        "params": render_params(datum.algebra),
        "nerve": render_nerve(nerve),
        **body,
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
