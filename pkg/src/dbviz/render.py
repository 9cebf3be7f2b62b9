"""Deterministic SVG output for a compiled scene, with axes and legends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any
from xml.sax.saxutils import escape, quoteattr

from .compiler import Scene
from .expr import render_value
from .marks import DEFAULT_SIZE, POINT_RADIUS, Mark, MarkTable
from .spec import RECT_MARKS

FONT_SIZE = 10
TICK = 4
UNGUIDED = ("id", "text")


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class Guide:
    canvas: tuple  # ("frame", x, y, w, h) for root views, else (parent view, back_key)
    kind: str  # "axis" or "legend"
    channel: str
    scale: str
    views: tuple[str, ...]


def guide_channel(channel: str) -> tuple[str, str]:
    if channel in ("x", "x2"):
        return "axis", "x"
    if channel in ("y", "y2"):
        return "axis", "y"
    return "legend", channel


def canvas_key(table: MarkTable, mark: Mark) -> tuple:
    if mark.canvas is not None:
        return mark.canvas
    f = table.frame
    return ("frame", f.x, f.y, f.width, f.height)


def plan_guides(scene: Scene) -> list[Guide]:
    """One guide per (canvas, guide channel, scale) over every scaled,
    data-driven channel that has marks on that canvas."""
    found: dict[tuple, list[str]] = {}
    for name in scene.plan.order:
        table = scene.marks[name]
        canvases = list(dict.fromkeys(canvas_key(table, m) for m in table.marks))
        for ch in scene.doc.view(name).channels:
            scale = scene.scale_of.get((name, ch))
            if ch in UNGUIDED or scale is None or scale not in scene.scales:
                continue
            kind, gch = guide_channel(ch)
            for c in canvases:
                views = found.setdefault((c, kind, gch, scale), [])
                if name not in views:
                    views.append(name)
    return [Guide(c, k, ch, s, tuple(v)) for (c, k, ch, s), v in found.items()]


def num(v: Any) -> str:
    s = f"{float(v):.3f}"
    return "0.000" if s == "-0.000" else s


def _label(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return render_value(v)


def _sort_key(v: Any):
    if isinstance(v, tuple):
        return tuple(_sort_key(x) for x in v)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, v, "")
    return (1, 0, str(v))


def _style(mark: Mark, fill_default: str) -> str:
    p = mark.props
    color = str(p.get("color", "black"))
    out = []
    if fill_default == "none":
        out.append(f'fill="none" stroke={quoteattr(color)}')
    elif fill_default == "stroke":
        out.append(f'stroke={quoteattr(color)}')
    else:
        out.append(f"fill={quoteattr(color)}")
    if "opacity" in p:
        out.append(f'opacity="{num(p["opacity"])}"')
    return " ".join(out)


def mark_element(kind: str, view: str, mark: Mark) -> str:
    p = mark.props
    key = quoteattr(_label(mark.back_key))
    head = f"data-view={quoteattr(view)} data-key={key}"
    x, y = p.get("x", 0.0), p.get("y", 0.0)
    if kind in RECT_MARKS:
        w, h = p.get("w", DEFAULT_SIZE), p.get("h", DEFAULT_SIZE)
        return (f'<rect {head} x="{num(min(x, x + w))}" y="{num(min(y, y + h))}" '
                f'width="{num(abs(w))}" height="{num(abs(h))}" {_style(mark, "none")}/>')
    if kind in ("line", "link"):
        return (f'<line {head} x1="{num(x)}" y1="{num(y)}" x2="{num(p.get("x2", x))}" '
                f'y2="{num(p.get("y2", y))}" {_style(mark, "stroke")}/>')
    if kind in ("text", "label"):
        tx, ty = x + p.get("dx", 0.0), y + p.get("dy", 0.0)
        return (f'<text {head} x="{num(tx)}" y="{num(ty)}" font-size="{FONT_SIZE}" '
                f'{_style(mark, "fill")}>{escape(str(p.get("text", "")))}</text>')
    return (f'<circle {head} cx="{num(x)}" cy="{num(y)}" r="{num(POINT_RADIUS)}" '
            f'{_style(mark, "fill")}/>')


def guide_elements(scene: Scene, guide: Guide, width: float, height: float) -> list[str]:
    s = scene.scales[guide.scale]
    ticks = s.ticks(5)
    attrs = (f'data-channel="{guide.channel}" data-scale={quoteattr(guide.scale)} '
             f'data-views={quoteattr(",".join(guide.views))}')
    out = [f'<g class="{guide.kind}" {attrs}>']
    if guide.kind == "axis" and guide.channel == "x":
        pos = [t[1] for t in ticks]
        out.append(f'<line x1="{num(min(pos))}" y1="{num(height)}" x2="{num(max(pos))}" '
                   f'y2="{num(height)}" stroke="black"/>')
        for v, px in ticks:
            out.append(f'<line x1="{num(px)}" y1="{num(height)}" x2="{num(px)}" '
                       f'y2="{num(height - TICK)}" stroke="black"/>')
            out.append(f'<text x="{num(px)}" y="{num(height - TICK - 1)}" font-size="{FONT_SIZE}" '
                       f'text-anchor="middle">{escape(_label(v))}</text>')
    elif guide.kind == "axis":
        pos = [t[1] for t in ticks]
        out.append(f'<line x1="0.000" y1="{num(min(pos))}" x2="0.000" y2="{num(max(pos))}" '
                   'stroke="black"/>')
        for v, py in ticks:
            out.append(f'<line x1="0.000" y1="{num(py)}" x2="{num(TICK)}" y2="{num(py)}" '
                       'stroke="black"/>')
            out.append(f'<text x="{num(TICK + 1)}" y="{num(py)}" font-size="{FONT_SIZE}">'
                       f"{escape(_label(v))}</text>")
    else:
        x0 = width - 60
        out.append(f'<text x="{num(x0)}" y="{num(FONT_SIZE)}" font-size="{FONT_SIZE}">'
                   f"{escape(guide.channel)}: {escape(guide.scale)}</text>")
        for i, (v, out_v) in enumerate(ticks):
            y = FONT_SIZE * (i + 2)
            swatch = quoteattr(str(out_v)) if guide.channel == "color" else '"none"'
            out.append(f'<rect x="{num(x0)}" y="{num(y - 8)}" width="8.000" height="8.000" '
                       f'fill={swatch} stroke="black"/>')
            out.append(f'<text x="{num(x0 + 10)}" y="{num(y)}" font-size="{FONT_SIZE}">'
                       f"{escape(_label(v))} = {escape(_label(out_v))}</text>")
    out.append("</g>")
    return out


def render(scene: Scene) -> bytes:
    """SVG 1.1 document: root views in plan order, marks by back_key, each
    nested view drawn inside a translated group per parent mark."""
    for t in scene.marks.values():
        if t.unresolved:
            raise RenderError(f"view {t.view} has unresolved auto channels {sorted(t.unresolved)}")
    doc = scene.doc
    guides = plan_guides(scene)
    by_canvas: dict[tuple, list[Guide]] = {}
    for g in guides:
        by_canvas.setdefault(g.canvas, []).append(g)
    children: dict[str, list[str]] = {}
    for name in scene.plan.order:
        parent = scene.marks[name].parent
        if parent is not None:
            children.setdefault(parent, []).append(name)

    def sorted_marks(t: MarkTable, canvas=None, nested=False):
        ms = [m for m in t.marks if not nested or m.canvas == canvas]
        return sorted(ms, key=lambda m: _sort_key(m.back_key))

    def draw(name: str, canvas, nested: bool, indent: str) -> list[str]:
        t = scene.marks[name]
        lines = []
        for m in sorted_marks(t, canvas, nested):
            lines.append(indent + mark_element(t.mark, name, m))
            kids = children.get(name, ())
            if kids:
                owner = (name, m.back_key)
                w = abs(m.props.get("w", DEFAULT_SIZE))
                h = abs(m.props.get("h", DEFAULT_SIZE))
                ox = min(m.props.get("x", 0.0), m.props.get("x", 0.0) + m.props.get("w", DEFAULT_SIZE))
                oy = min(m.props.get("y", 0.0), m.props.get("y", 0.0) + m.props.get("h", DEFAULT_SIZE))
                lines.append(f'{indent}<g class="canvas" data-owner={quoteattr(name + ":" + _label(m.back_key))} '
                             f'transform="translate({num(ox)},{num(oy)})">')
                for k in kids:
                    lines.extend(draw(k, owner, True, indent + "  "))
                for g in by_canvas.get(owner, ()):
                    lines.extend(indent + "  " + e for e in guide_elements(scene, g, w, h))
                lines.append(f"{indent}</g>")
        return lines

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{num(doc.width)}" '
           f'height="{num(doc.height)}" viewBox="0 0 {num(doc.width)} {num(doc.height)}">']
    frames: list[tuple] = []
    for name in scene.plan.order:
        t = scene.marks[name]
        if t.parent is not None:
            continue
        f = t.frame
        key = ("frame", f.x, f.y, f.width, f.height)
        if key not in frames:
            frames.append(key)
        out.append(f'  <g class="view" data-view={quoteattr(name)} '
                   f'transform="translate({num(f.x)},{num(f.y)})">')
        out.extend(draw(name, None, False, "    "))
        out.append("  </g>")
    for key in frames:
        _, x, y, w, h = key
        gs = by_canvas.get(key, ())
        if not gs:
            continue
        out.append(f'  <g class="guides" transform="translate({num(x)},{num(y)})">')
        for g in gs:
            out.extend("    " + e for e in guide_elements(scene, g, w, h))
        out.append("  </g>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
