import re

import pytest

from conftest import FIXTURES, build, scene_of, table_decl
from dbviz.compiler import compile_scene
from dbviz.marks import MarkTable
from dbviz.render import RenderError, num, plan_guides, render


def d0(tmp_path):
    spec = {"schema": {"tables": [table_decl("T", "id", "a:real", "b:real")]},
            "views": [{"name": "V_T", "source": "T", "mark": "point", "channels": {"x": "a", "y": "b"}}]}
    return build(tmp_path, spec, {"T": [["id", "a", "b"], [1, 0, 0], [2, 1, 2], [3, 2, 1]]})


def test_scatterplot_elements(tmp_path):
    svg = render(compile_scene(*d0(tmp_path))).decode()
    assert svg.count("<circle") == 3
    assert svg.count('class="axis" data-channel="x"') == 1
    assert svg.count('class="axis" data-channel="y"') == 1
    assert 'class="legend"' not in svg


def test_nested_groups_per_parent():
    s = scene_of("gallery_d")
    svg = render(s).decode()
    parents = len(s.marks["V_B"])
    assert svg.count("<rect data-view=\"V_B\"") == parents
    groups = re.findall(r'<g class="canvas" data-owner="V_B:([^"]+)" transform="translate\(', svg)
    assert len(groups) == parents
    assert svg.count('<circle data-view="V_A"') == len(s.marks["V_A"])


def test_mark_type_mapping():
    svg = render(scene_of("gallery_c")).decode()
    assert "<line data-view=\"V_T\"" in svg and "<text data-view=\"V_A\"" in svg


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.iterdir()))
def test_render_is_byte_deterministic(name):
    assert render(scene_of(name)) == render(scene_of(name))


def test_one_axis_per_shared_scale():
    s = scene_of("gallery_b")
    axes = [g for g in plan_guides(s) if g.kind == "axis"]
    assert sorted((g.channel, g.scale) for g in axes) == [("x", "sb"), ("y", "sa")]
    sa = next(g for g in axes if g.scale == "sa")
    assert sa.views == ("V_T", "V_A")


def test_small_multiples_axes_per_facet():
    s = scene_of("small_multiples")
    per_facet = [g for g in plan_guides(s) if g.canvas[0] == "V_G"]
    assert len(per_facet) == 2 * len(s.marks["V_G"])


def test_unresolved_auto_is_a_render_error():
    s = scene_of("small_multiples")
    t = s.marks["V_G"]
    s.marks["V_G"] = MarkTable(t.view, t.mark, t.marks, t.frame, t.links, t.auto,
                               frozenset({"w"}), t.parent)
    with pytest.raises(RenderError):
        render(s)


def test_number_format():
    assert num(-0.0001) == "0.000" and num(1 / 3) == "0.333" and num(2) == "2.000"
