import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from docgen import random_spec
from dbviz.spec import (AttributeMap, Auto, Constant, SpecDocument, SpecError, parse_spec,
                        serialize_spec)


def d0(**view_extra):
    view = {"name": "V_T", "source": "T", "mark": "point", "channels": {"x": "a", "y": "b"}}
    view.update(view_extra)
    return {"schema": {"tables": [{"name": "T", "attributes": [
        {"name": "id", "type": "integer"}, {"name": "a", "type": "real"},
        {"name": "b", "type": "real"}]}]},
        "views": [view]}


def parse(d):
    return parse_spec(json.dumps(d, indent=2))


def test_scatterplot_parses():
    doc = parse(d0())
    assert len(doc.views) == 1 and doc.constraint_mappings == ()
    ch = doc.views[0].channels
    assert isinstance(ch["x"], AttributeMap) and ch["x"].scale is None
    # the omitted id mapping is injected from the primary key
    assert "id" in ch


def test_unknown_table_is_positioned():
    d = d0(source="Z")
    with pytest.raises(SpecError) as info:
        parse(d)
    [diag] = [x for x in info.value.diagnostics if x.rule == "unknown-table"]
    assert "unknown table Z" in diag.message
    text = json.dumps(d, indent=2).splitlines()
    assert '"Z"' in text[diag.line - 1]


def test_auto_only_on_extent_channels():
    d = d0()
    d["views"][0]["channels"]["color"] = {"auto": True}
    with pytest.raises(SpecError) as info:
        parse(d)
    assert [x.rule for x in info.value.diagnostics] == ["auto-channel"]
    d = d0()
    d["views"][0]["channels"]["w"] = {"auto": True}
    assert isinstance(parse(d).views[0].channels["w"], Auto)


def test_constants_and_aliases():
    d = d0()
    d["views"][0]["channels"] = {"sx": 10, "y": {"value": "top"}, "label": "a"}
    ch = parse(d).views[0].channels
    assert ch["x"] == Constant(10) and ch["y"] == Constant("top") and "text" in ch


def test_diagnostics_are_ordered_and_all_reported():
    d = d0()
    d["views"][0]["mark"] = "blob"
    d["views"][0]["channels"]["q"] = "a"
    d["views"].append({"name": "V2", "source": "Nope", "mark": "point", "channels": {}})
    with pytest.raises(SpecError) as info:
        parse(d)
    diags = info.value.diagnostics
    assert {x.rule for x in diags} == {"unknown-mark", "unknown-channel", "unknown-table"}
    assert diags == sorted(diags)


def test_expression_errors():
    d = d0()
    d["views"][0]["channels"]["x"] = "a +"
    with pytest.raises(SpecError, match="expr-syntax"):
        parse(d)
    d["views"][0]["channels"]["x"] = "zz"
    with pytest.raises(SpecError, match="unknown-attribute"):
        parse(d)


def test_bad_json_reports_position():
    with pytest.raises(SpecError) as info:
        parse_spec(b'{\n  "views": [,]\n}')
    assert info.value.diagnostics[0].line == 2


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.iterdir()))
def test_fixture_round_trip(name):
    doc = parse_spec((FIXTURES / name / "spec.json").read_bytes())
    out = serialize_spec(doc)
    assert parse_spec(out) == doc
    assert serialize_spec(parse_spec(out)) == out


def test_empty_document():
    doc = SpecDocument()
    assert parse_spec(serialize_spec(doc)) == doc


def test_serialization_is_canonical():
    doc = parse(d0())
    assert serialize_spec(doc) == serialize_spec(parse(d0()))
    # key order in the input does not matter
    shuffled = dict(reversed(list(d0().items())))
    assert serialize_spec(parse(shuffled)) == serialize_spec(doc)


@settings(max_examples=60)
@given(st.integers(0, 10**6))
def test_generated_documents_round_trip(seed):
    doc = parse_spec(json.dumps(random_spec(random.Random(seed))))
    assert parse_spec(serialize_spec(doc)) == doc
