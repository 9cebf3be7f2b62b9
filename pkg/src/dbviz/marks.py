"""Materialized mark tables, canvases and foreign-reference re-resolution."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from .spec import Frame, RECT_MARKS

POINT_RADIUS = 3.0
DEFAULT_SIZE = 10.0


@dataclass(frozen=True)
class Mark:
    back_key: Any
    row: int  # index into the view's source rows
    props: Mapping[str, Any]
    canvas: tuple | None = None  # (parent view, parent back_key) when nested


@dataclass(frozen=True)
class Link:
    """Channel *channel* of mark *mark* copies property *prop* of mark
    *target* in view *view*."""
    mark: int
    channel: str
    view: str
    target: int
    prop: str


@dataclass(frozen=True)
class MarkTable:
    view: str
    mark: str
    marks: tuple[Mark, ...]
    frame: Frame
    links: tuple[Link, ...] = ()
    auto: frozenset = frozenset()
    unresolved: frozenset = frozenset()
    parent: str | None = None

    def __len__(self) -> int:
        return len(self.marks)

    def index(self) -> dict[Any, int]:
        return {m.back_key: i for i, m in enumerate(self.marks)}

    def with_marks(self, marks: Iterable[Mark], **changes) -> "MarkTable":
        return replace(self, marks=tuple(marks), **changes)


@dataclass(frozen=True)
class Canvas:
    extent: Frame
    owner: tuple | None = None  # None for the root, else (view, back_key)
    views: tuple[str, ...] = ()
    children: tuple["Canvas", ...] = field(default=())


def prop(mark: Mark, name: str, default: Any = 0.0) -> Any:
    return mark.props.get(name, default)


def bbox(kind: str, mark: Mark) -> tuple[float, float, float, float]:
    """(x0, y0, x1, y1) of a mark in its canvas' coordinates."""
    p = mark.props
    x, y = p.get("x", 0.0), p.get("y", 0.0)
    if kind in RECT_MARKS:
        w, h = p.get("w", DEFAULT_SIZE), p.get("h", DEFAULT_SIZE)
        return min(x, x + w), min(y, y + h), max(x, x + w), max(y, y + h)
    if kind in ("line", "link"):
        x2, y2 = p.get("x2", x), p.get("y2", y)
        return min(x, x2), min(y, y2), max(x, x2), max(y, y2)
    if kind in ("text", "label"):
        ax, ay = x + p.get("dx", 0.0), y + p.get("dy", 0.0)
        return ax, ay, ax, ay
    return x - POINT_RADIUS, y - POINT_RADIUS, x + POINT_RADIUS, y + POINT_RADIUS


def canvas_tree(marks: Mapping[str, MarkTable], width: float, height: float) -> Canvas:
    root_views = tuple(v for v, t in marks.items() if t.parent is None)
    children_of: dict[str, list[str]] = {}
    for v, t in marks.items():
        if t.parent is not None:
            children_of.setdefault(t.parent, []).append(v)

    def nested(view: str) -> tuple[Canvas, ...]:
        out = []
        kids = children_of.get(view, ())
        if not kids:
            return ()
        for m in marks[view].marks:
            p = m.props
            extent = Frame(p.get("x", 0.0), p.get("y", 0.0), p.get("w", DEFAULT_SIZE),
                           p.get("h", DEFAULT_SIZE))
            sub = tuple(c for k in kids for c in nested(k))
            out.append(Canvas(extent, (view, m.back_key), tuple(kids), sub))
        return tuple(out)

    children = tuple(c for v in root_views for c in nested(v))
    return Canvas(Frame(0, 0, width, height), None, root_views, children)


def reresolve(marks: Mapping[str, MarkTable], perturbed: str) -> dict[str, MarkTable]:
    """Recompute every foreign-reference channel downstream of *perturbed*
    so that it again equals the referenced mark property.  *marks* must be
    in plan order."""
    out = dict(marks)
    dirty = {perturbed}
    for name, table in marks.items():
        if not any(l.view in dirty for l in table.links):
            continue
        props = [dict(m.props) for m in table.marks]
        for l in table.links:
            props[l.mark][l.channel] = out[l.view].marks[l.target].props[l.prop]
        out[name] = table.with_marks(replace(m, props=p) for m, p in zip(table.marks, props))
        dirty.add(name)
    return out
