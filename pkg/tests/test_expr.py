import math

import pytest
from hypothesis import given, strategies as st

from dbviz.expr import (Attr, Binary, DataError, ExprSyntaxError, ExprTypeError, Format, Literal,
                        evaluate, infer_type, parse_expr, to_source)


def ev(text, **env):
    return evaluate(parse_expr(text), env)


def test_format_string_substitutes_rendered_values():
    e = parse_expr('f"{T.id}={S.id}"')
    assert isinstance(e, Format)
    assert evaluate(e, {"T.id": 3, "S.id": 3}) == "3=3"


def test_literal_zero_is_constant():
    assert ev("0") == 0
    assert ev("0", a=99) == 0


def test_ceil_of_division():
    assert ev("ceil(7 / 3)") == 3
    assert ev("floor(7 / 3)") == 2


def test_facet_formulas():
    assert ev("gid % 3", gid=7) == 1
    assert ev("ceil(gid / 3)", gid=7) == 3


def test_precedence():
    assert ev("1 + 2 * 3") == 7
    assert ev("(1 + 2) * 3") == 9
    assert ev("-2 * 3") == -6
    assert ev("not 1 > 2 and true") is True


def test_division_by_zero_is_a_data_error():
    with pytest.raises(DataError):
        ev("a / b", a=1, b=0)
    with pytest.raises(DataError):
        ev("a % b", a=1, b=0)


def test_syntax_errors_carry_offsets():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("a + * b")
    assert info.value.offset >= 0
    with pytest.raises(ExprSyntaxError):
        parse_expr('f"{a + b}"')
    with pytest.raises(ExprSyntaxError):
        parse_expr("sqrt(a)")


def test_types():
    types = {"a": "integer", "b": "real", "t": "text"}
    assert infer_type(parse_expr("a + 1"), types) == "integer"
    assert infer_type(parse_expr("a / 2"), types) == "real"
    assert infer_type(parse_expr("ceil(b)"), types) == "integer"
    assert infer_type(parse_expr("a > b"), types) == "boolean"
    assert infer_type(parse_expr('f"{t}!"'), types) == "text"
    with pytest.raises(ExprTypeError):
        infer_type(parse_expr("t * 2"), types)
    with pytest.raises(ExprTypeError, match="unknown attribute"):
        infer_type(parse_expr("zz"), types)


def test_qualified_attribute():
    e = parse_expr("T.a")
    assert e == Attr("a", "T")
    assert evaluate(e, {"T.a": 5, "a": 6}) == 5


names = st.sampled_from(["a", "b", "gid", "T.id"])
leaves = st.one_of(
    st.integers(-50, 50).map(Literal),
    st.floats(0.25, 8, allow_nan=False).map(lambda f: Literal(round(f, 2))),
    names.map(lambda n: Attr(*reversed(n.split("."))) if "." in n else Attr(n)),
)
exprs = st.recursive(
    leaves,
    lambda sub: st.builds(Binary, st.sampled_from(["+", "-", "*", "/", "%"]), sub, sub),
    max_leaves=6,
)


@given(exprs)
def test_to_source_round_trips(e):
    assert parse_expr(to_source(e)) == e


@given(exprs, st.integers(1, 9), st.integers(1, 9), st.integers(1, 9), st.integers(1, 9))
def test_evaluation_is_pure(e, a, b, gid, tid):
    env = {"a": a, "b": b, "gid": gid, "T.id": tid}
    try:
        first = evaluate(e, env)
    except DataError:
        with pytest.raises(DataError):
            evaluate(e, env)
        return
    second = evaluate(e, env)
    assert first == second or (math.isnan(first) and math.isnan(second))
