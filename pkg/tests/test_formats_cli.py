import json
import random
import subprocess
import sys
from fractions import Fraction

import pytest

from starcover import (
    ChartAlgebra,
    DGLAElement,
    LocalizedPoly,
    Poly,
    cech_cohomology,
    check_mdd,
    exp_add,
    int_mc,
    octahedron_nerve,
    param_algebra_truncate,
    require_mc,
    ts_normalize,
    whitney,
)
from starcover.cli import main
from starcover.descent import MultDescentDatum, face_carrier
from starcover import formats
from starcover.formats import (
    ExprContext,
    FormatError,
    dumps,
    load_descent,
    load_nerve,
    load_ts_element,
    parse_element,
    render_descent,
    render_nerve,
)

from conftest import simplex_nerve


def test_expression_round_trips():
    R = param_algebra_truncate(["hbar"], 3)
    chart = ChartAlgebra(("x", "y", "z"))
    ctx = ExprContext(R, chart, "polyvec")
    for text in (
        "hbar * (z*dx^dy - y*dx^dz + x*dy^dz)",
        "3/2*x^2*y - 1",
        "x*dy + hbar^2 * (x^2*y*dz)",
        "-dx^dy + 2*dy^dz",
    ):
        e = parse_element(ctx, text)
        assert parse_element(ctx, e.render()) == e
    ctx2 = ExprContext(R, ChartAlgebra(("x", "y")), "polydiff")
    for text in (
        "hbar * (1/2*d[1,0]⊗d[0,1] - 1/2*d[0,1]⊗d[1,0])",
        "hbar^2 * (x*d[2,0]⊗d[0,2])",
        "x + hbar * (y)",
    ):
        e = parse_element(ctx2, text)
        assert parse_element(ctx2, e.render()) == e


def test_parse_errors():
    R = param_algebra_truncate(["hbar"], 2)
    ctx = ExprContext(R, ChartAlgebra(("x",)), "polyvec")
    with pytest.raises(FormatError):
        parse_element(ctx, "q + 1")
    with pytest.raises(FormatError):
        parse_element(ctx, "dx^")
    with pytest.raises(FormatError):
        parse_element(ctx, "d[1]⊗d[1]")  # tensor needs polydiff context


def test_nerve_json_round_trip():
    nerve = octahedron_nerve()
    obj = render_nerve(nerve)
    nerve2 = load_nerve(obj)
    assert nerve2.indices == nerve.indices
    assert nerve2.faces == nerve.faces
    # two-chart localized nerve survives the round trip too
    C0 = ChartAlgebra(("x",))
    C1 = ChartAlgebra(("y",))
    C01 = ChartAlgebra(("x",), (Poly.var(("x",), "x"),))
    from starcover import RestrictionMap, build_nerve

    inv_x = LocalizedPoly(C01, Poly.const(("x",), 1), (1,))
    nerve3 = build_nerve(
        ["U0", "U1"],
        {(0,): C0, (1,): C1, (0, 1): C01},
        {
            ((0,), (0, 1)): RestrictionMap.build(C0, C01, [C01.var("x")]),
            ((1,), (0, 1)): RestrictionMap.build(C1, C01, [inv_x]),
        },
    )
    obj3 = render_nerve(nerve3)
    nerve4 = load_nerve(obj3)
    rm = nerve4.restriction((1,), (0, 1))
    assert rm.var_images[0] == inv_x


def octahedron_mdd_json():
    nerve = octahedron_nerve()
    cocycle = cech_cohomology(nerve).representative_cocycles(2)[0]
    triples = {}
    for t in nerve.level_faces(2):
        coords = cocycle.get(t)
        if coords and coords[0]:
            triples[nerve.label(t)] = f"hbar * ({coords[0]})"
    return {
        "schema": 1,
        "kind": "mdd",
        "flavor": "associative",
        "params": {"gens": ["hbar"], "order": 2},
        "nerve": render_nerve(nerve),
        "locals": {},
        "edges": {},
        "triples": triples,
    }


def test_descent_serialize_load_check(rng):
    nerve = simplex_nerve(3)
    R = param_algebra_truncate(["hbar"], 2)
    H = ts_normalize(nerve, "polyvec", R)
    car0 = face_carrier(nerve, "poisson", (0,))
    from starcover.cechnerve import CechCarrier

    comp = {}
    for f in nerve.level_faces(0):
        fcar = CechCarrier(nerve, "polyvec", 0, 0).face_carriers[f]
        comp[f] = fcar.term((0, 1), fcar.chart.one())
    pi0 = DGLAElement(CechCarrier(nerve, "polyvec", 0, 0), R, 1, {1: comp})
    beta = whitney(H, 0, pi0)
    add = int_mc(H, beta)
    obj = render_descent(add)
    add2 = load_descent(json.loads(dumps(obj)))
    from starcover import check_add

    assert check_add(add2).ok
    mdd = exp_add(add2)
    obj2 = render_descent(mdd)
    mdd2 = load_descent(obj2)
    assert check_mdd(mdd2).ok


def _run(args):
    from io import StringIO

    old = sys.stdout
    sys.stdout = StringIO()
    try:
        code = main(args)
        out = sys.stdout.getvalue()
    finally:
        sys.stdout = old
    return code, out


def test_cli_check_mdd_and_obstruction(tmp_path):
    path = tmp_path / "oct.json"
    path.write_text(dumps(octahedron_mdd_json()), encoding="utf-8")
    code, out = _run(["check-mdd", str(path)])
    assert code == 0
    assert json.loads(out)["ok"] is True
    code, out = _run(["obstruction", str(path)])
    assert code == 1
    rep = json.loads(out)
    assert rep["trivializable"] is False
    assert rep["class"] == "[c]*hbar"
    assert rep["order"] == 1


def test_cli_determinism(tmp_path):
    path = tmp_path / "oct.json"
    path.write_text(dumps(octahedron_mdd_json()), encoding="utf-8")
    outs = set()
    for _ in range(2):
        code, out = _run(["obstruction", str(path)])
        outs.add(out)
    assert len(outs) == 1


def test_cli_quantize_and_star_table(tmp_path):
    path = tmp_path / "so3.json"
    path.write_text(
        dumps(
            {
                "schema": 1,
                "kind": "poisson",
                "params": {"gens": ["hbar"], "order": 2},
                "chart": {"variables": ["x", "y", "z"]},
                "bivector": "hbar * (z*dx^dy - y*dx^dz + x*dy^dz)",
            }
        ),
        encoding="utf-8",
    )
    code, out = _run(["quantize", str(path), "--order", "2"])
    assert code == 0
    rep = json.loads(out)
    assert rep["first_order_bracket"]["{x,y}"] == "hbar * 1/2*z"
    code, out = _run(["star-table", str(path)])
    assert code == 0


def test_cli_schema_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"schema\": 2}", encoding="utf-8")
    code = main(["check-mdd", str(path)])
    assert code == 2


def test_cli_exp_add_int_mc_pipeline(tmp_path, rng):
    nerve = simplex_nerve(3)
    ts_obj = {
        "schema": 1,
        "kind": "ts",
        "flavor": "poisson",
        "params": {"gens": ["hbar"], "order": 2},
        "nerve": render_nerve(nerve),
        "whitney": [
            {"q": 0, "values": {f"U{i}": "hbar * (dx^dy)" for i in range(3)}}
        ],
        "gauge": [
            {"q": 0, "values": {"U0": "hbar * (x*dx)", "U1": "hbar * (y*dy)", "U2": "hbar * (x*dy)"}},
            {"q": 1, "values": {"U0,U1": "hbar * (x)", "U0,U2": "hbar * (y)", "U1,U2": "hbar * (2*x*y)"}},
        ],
    }
    ts_path = tmp_path / "ts.json"
    ts_path.write_text(dumps(ts_obj), encoding="utf-8")
    add_path = tmp_path / "add.json"
    code, _ = _run(["int-mc", str(ts_path), "--out", str(add_path)])
    assert code == 0
    code, _ = _run(["check-add", str(add_path)])
    assert code == 0
    mdd_path = tmp_path / "mdd.json"
    code, _ = _run(["exp-add", str(add_path), "--out", str(mdd_path)])
    assert code == 0
    code, _ = _run(["check-mdd", str(mdd_path)])
    assert code == 0
    # equiv of a datum with itself succeeds
    code, out = _run(["equiv", str(mdd_path), str(mdd_path)])
    assert code == 0 and json.loads(out)["equivalent"] is True


def test_cli_cohomology(tmp_path):
    path = tmp_path / "nerve.json"
    path.write_text(dumps(render_nerve(octahedron_nerve())), encoding="utf-8")
    code, out = _run(["cohomology", str(path)])
    assert code == 0
    assert json.loads(out)["betti"] == [1, 0, 1]


def test_cli_selftest():
    code, out = _run(["selftest", "--seed", "1"])
    assert code == 0
    assert json.loads(out)["ok"] is True
