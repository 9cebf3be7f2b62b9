import pytest
from hypothesis import given, settings, strategies as st

from conftest import build, scene_of, table_decl
from dbviz.compiler import compile_scene
from dbviz.constraints import (check_shared_scale, detect_overplotting, jitter,
                               jitter_table, layout_auto)
from dbviz.encode import CompileError
from dbviz.marks import Mark, MarkTable, bbox
from dbviz.spec import Frame, SharedScale


def table(kind, *props, auto=frozenset()):
    return MarkTable("V", kind, tuple(Mark(i, i, p) for i, p in enumerate(props)),
                     Frame(0, 0, 300, 200), auto=auto)


# --- grid layout ----------------------------------------------------------------

def facets(n, k, w=300, h=200):
    t = table("rect", *({} for _ in range(n)), auto=frozenset("xywh"))
    return layout_auto(t, Frame(0, 0, w, h), k).marks


def test_six_facets_three_per_row():
    ms = facets(6, 3)
    assert {(m.props["w"], m.props["h"]) for m in ms} == {(96.0, 96.0)}
    assert [(m.props["x"], m.props["y"]) for m in ms] == [
        (2, 2), (102, 2), (202, 2), (2, 102), (102, 102), (202, 102)]


def test_single_facet_fills_canvas():
    [m] = facets(1, None)
    assert (m.props["x"], m.props["y"], m.props["w"], m.props["h"]) == (2, 2, 296, 196)


def test_one_per_row_is_a_strip():
    ms = facets(4, 1)
    assert {m.props["x"] for m in ms} == {2}
    assert [m.props["y"] for m in ms] == [2, 52, 102, 152]


def test_empty_view_is_a_no_op():
    t = table("rect", auto=frozenset("wh"))
    assert layout_auto(t, Frame(0, 0, 10, 10)).marks == ()


# --- nesting -----------------------------------------------------------------------

def inside(child, parent):
    x0, y0, x1, y1 = child
    return 0 <= x0 and 0 <= y0 and x1 <= parent[0] and y1 <= parent[1]


def test_small_multiples_containment():
    s = scene_of("small_multiples")
    parents = {m.back_key: m.props for m in s.marks["V_G"].marks}
    child = s.marks["V_T"]
    assert child.parent == "V_G"
    count = 0
    for m in child.marks:
        p = parents[m.canvas[1]]
        count += inside(bbox("point", m), (p["w"], p["h"]))
    assert count == len(child) == 18


def test_nest_partitions_child_rows():
    s = scene_of("gallery_d")
    d = s.sources["V_A"]
    for m in s.marks["V_A"].marks:
        assert m.canvas == ("V_B", d.envs[m.row]["bid"])


def test_empty_subcanvas_keeps_parent(tmp_path):
    spec = {"schema": {"tables": [table_decl("P", "id"), table_decl("C", "id", "pid")],
                       "foreign_keys": [{"name": "F", "source": {"table": "C", "attributes": ["pid"]},
                                         "target": {"table": "P", "attributes": ["id"]}}]},
            "views": [{"name": "VP", "source": "P", "mark": "rect",
                       "channels": {"x": {"auto": True}, "y": {"auto": True}, "w": {"auto": True},
                                    "h": {"auto": True}}},
                      {"name": "VC", "source": "C", "mark": "point", "channels": {"x": "id", "y": 1}}],
            "constraint_mappings": [{"constraint": "F", "method": "nest", "child": "VC", "parent": "VP"}]}
    doc, db = build(tmp_path, spec, {"P": [["id"], [1], [2]], "C": [["id", "pid"], [5, 1]]})
    s = compile_scene(doc, db)
    assert len(s.marks["VP"]) == 2 and {m.canvas for m in s.marks["VC"].marks} == {("VP", 1)}


def test_zero_area_parent_is_a_layout_error(tmp_path):
    spec = {"schema": {"tables": [table_decl("P", "id"), table_decl("C", "id", "pid")],
                       "foreign_keys": [{"name": "F", "source": {"table": "C", "attributes": ["pid"]},
                                         "target": {"table": "P", "attributes": ["id"]}}]},
            "views": [{"name": "VP", "source": "P", "mark": "rect",
                       "channels": {"x": 0, "y": 0, "w": 0, "h": 10}},
                      {"name": "VC", "source": "C", "mark": "point", "channels": {"x": "id", "y": 1}}],
            "constraint_mappings": [{"constraint": "F", "method": "nest", "child": "VC", "parent": "VP"}]}
    doc, db = build(tmp_path, spec, {"P": [["id"], [1]], "C": [["id", "pid"], [5, 1]]})
    with pytest.raises(CompileError, match="zero area"):
        compile_scene(doc, db)


# --- shared scales --------------------------------------------------------------------

@pytest.mark.parametrize("name,level", [("align_a", 0), ("align_b", 1), ("align_c", 2),
                                        ("align_d", 3), ("align_e", 4)])
def test_level_ladder(name, level):
    s = scene_of(name)
    [m] = s.doc.constraint_mappings
    got = check_shared_scale(m, s.doc, s.scales, s.scale_of)
    assert got.level == level


def test_disjoint_domains_are_not_preserved():
    s = scene_of("align_e")
    m = s.doc.constraint_mappings[0]
    scales = dict(s.scales)
    name = s.scale_of[(s.doc.views[0].name, "y")]
    bad = scales[name].__class__(scales[name].spec, ("zz",), scales[name].range)
    other = {k: v for k, v in s.scale_of.items() if k[0] != s.doc.views[0].name}
    other[(s.doc.views[0].name, "y")] = "lonely"
    scales["lonely"] = bad
    got = check_shared_scale(m, s.doc, scales, other)
    assert got.level is None and not got.passed


def test_proximity_threshold_precedence(monkeypatch):
    from dataclasses import replace
    d = scene_of("align_d")
    m = d.doc.constraint_mappings[0]
    assert check_shared_scale(m, d.doc, d.scales, d.scale_of).level == 3
    assert check_shared_scale(m, d.doc, d.scales, d.scale_of, proximity=10**6).level == 4
    monkeypatch.setenv("DBVIZ_PROXIMITY_PX", "1000000")
    assert check_shared_scale(m, d.doc, d.scales, d.scale_of).level == 4
    # the document option beats the environment
    doc = replace(d.doc, options=replace(d.doc.options, proximity_px=0))
    assert check_shared_scale(m, doc, d.scales, d.scale_of).level == 3


def test_unmapped_endpoint_is_not_preserved():
    s = scene_of("gallery_d_no_nest")
    fk = s.doc.schema.foreign_keys[0]
    got = check_shared_scale(SharedScale(fk.name, 0), s.doc, s.scales, s.scale_of)
    assert got.level is None and "not both mapped" in got.reason


# --- overplotting --------------------------------------------------------------------

def test_identical_points_form_one_group():
    t = table("point", {"x": 1, "y": 1, "color": "red"}, {"x": 1, "y": 1, "color": "red"},
              {"x": 9, "y": 9, "color": "red"})
    [g] = detect_overplotting(t)
    assert g.back_keys == (0, 1)


def test_distinct_labels_are_distinguishable():
    t = table("text", {"x": 1, "y": 1, "text": "a"}, {"x": 1, "y": 1, "text": "b"})
    assert detect_overplotting(t) == []


def test_epsilon_is_inclusive_of_small_offsets():
    t = table("point", {"x": 0, "y": 0}, {"x": 0.4, "y": 0})
    assert len(detect_overplotting(t, 0.5)) == 1
    assert detect_overplotting(t, 0.3) == []


def test_groups_are_transitive():
    t = table("point", {"x": 0, "y": 0}, {"x": 0.4, "y": 0}, {"x": 0.8, "y": 0})
    [g] = detect_overplotting(t, 0.5)
    assert g.back_keys == (0, 1, 2)


def test_overplot_fixture():
    s = scene_of("overplot")
    [g] = detect_overplotting(s.marks["V_T"], s.doc.options.epsilon)
    assert len(g.back_keys) == 2


def test_marks_in_different_canvases_never_collide():
    a = Mark(0, 0, {"x": 1, "y": 1}, ("P", 1))
    b = Mark(1, 1, {"x": 1, "y": 1}, ("P", 2))
    t = MarkTable("V", "point", (a, b), Frame(0, 0, 10, 10))
    assert detect_overplotting(t) == []


# --- jitter ------------------------------------------------------------------------------

def test_jitter_is_deterministic_and_bounded():
    t = table("point", *({"x": 10.0, "y": 10.0} for _ in range(20)))
    a, b = jitter_table(t, 5, 7), jitter_table(t, 5, 7)
    assert a == b and a != t
    assert all(abs(m.props[c] - 10) <= 5 for m in a.marks for c in "xy")


def test_zero_jitter_is_identity():
    t = table("point", {"x": 1, "y": 2})
    assert jitter_table(t, 0, 1) is t


def test_jitter_keeps_links_attached():
    s = scene_of("hierarchy")
    before = len(detect_overplotting(s.marks["V_N"]))
    out = jitter(s.marks, "V_N", 5, 11)
    assert len(detect_overplotting(out["V_N"])) <= before
    e = out["V_E"]
    assert all(e.marks[l.mark].props[l.channel] == out[l.view].marks[l.target].props[l.prop]
               for l in e.links)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=8),
       st.floats(0, 2))
def test_overplot_groups_match_brute_force(points, eps):
    t = table("point", *({"x": x, "y": y} for x, y in points))
    groups = detect_overplotting(t, eps)
    # oracle: connected components of the "within eps on both axes" graph
    n = len(points)
    adj = {i: {j for j in range(n) if j != i and abs(points[i][0] - points[j][0]) <= eps
               and abs(points[i][1] - points[j][1]) <= eps} for i in range(n)}
    seen, comps = set(), []
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], set()
        while stack:
            k = stack.pop()
            if k not in comp:
                comp.add(k)
                stack.extend(adj[k])
        seen |= comp
        if len(comp) > 1:
            comps.append(tuple(sorted(comp)))
    assert sorted(g.back_keys for g in groups) == sorted(comps)
