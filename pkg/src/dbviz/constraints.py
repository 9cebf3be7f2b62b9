"""Constraint-mapping methods: spatial nesting, automatic grid layout,
shared-scale reinforcement levels, and the overplotting intervention."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .encode import Encoder
from .marks import DEFAULT_SIZE, Canvas, Mark, MarkTable, reresolve
from .relational import Database, ForeignKey
from .scales import TrainedScale
from .spec import AttributeMap, Auto, Frame, SharedScale, SpecDocument, ViewSpec
from . import expr as ex

GUTTER = 4.0
DEFAULT_PROXIMITY = 20.0
LEVEL_NAMES = ("shared-domain", "relative-alignment", "shared-channel", "absolute-alignment",
               "spatial-proximity")
SPATIAL = ("x", "y", "x2", "y2", "w", "h")
JITTERED = ("x", "y", "x2", "y2")


class LayoutError(ValueError):
    pass


# --- grid layout -------------------------------------------------------------

def grid(marks: Sequence[Mark], auto: frozenset, width: float, height: float,
         k_per_row: int | None) -> list[Mark]:
    n = len(marks)
    if n == 0 or not auto:
        return list(marks)
    ncols = k_per_row or n
    nrows = math.ceil(n / ncols)
    cw, chh = width / ncols, height / nrows
    out = []
    for i, m in enumerate(marks):
        p = dict(m.props)
        if "w" in auto:
            p["w"] = cw - GUTTER
        if "h" in auto:
            p["h"] = chh - GUTTER
        if "x" in auto:
            p["x"] = (i % ncols) * cw + GUTTER / 2
        if "y" in auto:
            p["y"] = (i // ncols) * chh + GUTTER / 2
        out.append(replace(m, props=p))
    return out


def layout_auto(view: MarkTable, canvas: Canvas | Frame, k_per_row: int | None = None) -> MarkTable:
    """Fill Auto channels with a k-per-row grid over *canvas*."""
    extent = canvas.extent if isinstance(canvas, Canvas) else canvas
    marks = grid(view.marks, view.auto, extent.width, extent.height, k_per_row)
    return view.with_marks(marks, unresolved=frozenset())


# --- nesting -----------------------------------------------------------------

def apply_nest(parent: MarkTable, child: ViewSpec, fk: ForeignKey, db: Database,
               encoder: Encoder) -> MarkTable:
    """Materialize *child* inside the marks of *parent*, one subcanvas per
    parent mark holding the child rows that reference it."""
    psrc = encoder.sources[parent.view]
    csrc = encoder.sources[child.name]
    owner_of: dict[tuple, Mark] = {}
    for m in parent.marks:
        w, h = m.props.get("w", DEFAULT_SIZE), m.props.get("h", DEFAULT_SIZE)
        if w == 0 or h == 0:
            raise LayoutError(f"nest {child.name} in {parent.view}: parent mark {m.back_key!r} "
                              "has zero area")
        owner_of[tuple(psrc.envs[m.row][a] for a in fk.target_attrs)] = m
    canvas: dict[int, tuple] = {}
    parts: dict[Any, list[int]] = {m.back_key: [] for m in parent.marks}
    for i, env in enumerate(csrc.envs):
        m = owner_of.get(tuple(env[a] for a in fk.source_attrs))
        if m is None:
            raise LayoutError(f"nest {child.name} in {parent.view}: row {csrc.back_keys[i]!r} "
                              "references no parent mark")
        canvas[i] = (parent.view, m.back_key)
        parts[m.back_key].append(i)
    if parent.marks:
        width = min(m.props.get("w", DEFAULT_SIZE) for m in parent.marks)
        height = min(m.props.get("h", DEFAULT_SIZE) for m in parent.marks)
    else:
        width, height = encoder.doc.width, encoder.doc.height
    marks, _ = encoder.encode(child, range(len(csrc)), abs(width), abs(height), canvas=canvas)
    auto = frozenset(ch for ch, cv in child.channels.items() if isinstance(cv, Auto))
    if auto:
        for pm in parent.marks:
            idx = parts[pm.back_key]
            laid = grid([marks[i] for i in idx], auto, abs(pm.props.get("w", DEFAULT_SIZE)),
                        abs(pm.props.get("h", DEFAULT_SIZE)), child.k_per_row)
            for i, m in zip(idx, laid):
                marks[i] = m
    return MarkTable(child.name, child.mark, tuple(marks), Frame(0, 0, width, height),
                     auto=auto, parent=parent.view)


# --- shared scales -------------------------------------------------------------

@dataclass(frozen=True)
class AchievedLevel:
    constraint: str
    declared: int
    level: int | None
    views: tuple[str, str] | None = None
    channels: tuple[str, str] | None = None
    scales: tuple[str, str] | None = None
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.level is not None and self.level >= self.declared

    def to_json(self) -> dict:
        return {"constraint": self.constraint, "declared": self.declared, "level": self.level,
                "name": LEVEL_NAMES[self.level] if self.level is not None else None,
                "views": list(self.views) if self.views else None,
                "channels": list(self.channels) if self.channels else None,
                "scales": list(self.scales) if self.scales else None,
                "reason": self.reason, "pass": self.passed}


def proximity_threshold(doc: SpecDocument) -> float:
    if doc.options.proximity_px is not None:
        return float(doc.options.proximity_px)
    env = os.environ.get("DBVIZ_PROXIMITY_PX")
    if env:
        try:
            return float(env)
        except ValueError:
            pass
    return DEFAULT_PROXIMITY


def view_extent(doc: SpecDocument, view: ViewSpec) -> Frame:
    return view.frame if view.frame is not None else Frame(0, 0, doc.width, doc.height)


def _endpoint_channels(doc: SpecDocument, table: str, attrs: tuple[str, ...]):
    """(view, channel) pairs mapping an expression over *attrs* of *table*
    to a spatial position channel."""
    out = []
    allowed = set(attrs) | {f"{table}.{a}" for a in attrs}
    for v in doc.views:
        if v.source != table or doc.nest_of(v.name) is not None:
            continue
        for ch in ("x", "y"):
            cv = v.channels.get(ch)
            if isinstance(cv, AttributeMap):
                used = {a.qualified for a in ex.attributes(cv.expr)}
                if used and used <= allowed:
                    out.append((v, ch))
    return out


def _level(doc: SpecDocument, a: tuple[ViewSpec, str], b: tuple[ViewSpec, str],
           sa: TrainedScale, sb: TrainedScale, proximity: float) -> tuple[int | None, str]:
    if sa.domain != sb.domain:
        return None, f"domains differ ({sa.name} vs {sb.name})"
    if sa.range != sb.range:
        return 0, "ranges differ"
    if a[1] != b[1]:
        return 1, f"channels differ ({a[1]} vs {b[1]})"
    ea, eb = view_extent(doc, a[0]), view_extent(doc, b[0])
    if a[1] == "x":
        pa, pb = (ea.x, ea.x + ea.width), (eb.x, eb.x + eb.width)
        qa, qb = (ea.y, ea.y + ea.height), (eb.y, eb.y + eb.height)
    else:
        pa, pb = (ea.y, ea.y + ea.height), (eb.y, eb.y + eb.height)
        qa, qb = (ea.x, ea.x + ea.width), (eb.x, eb.x + eb.width)
    if pa != pb:
        return 2, "view extents are not aligned along the shared channel"
    gap = max(0.0, max(qa[0], qb[0]) - min(qa[1], qb[1]))
    if gap > proximity:
        return 3, f"views are {gap:g} px apart (threshold {proximity:g})"
    return 4, ""


def check_shared_scale(mapping: SharedScale, doc: SpecDocument, scales: Mapping[str, TrainedScale],
                       scale_of: Mapping[tuple[str, str], str],
                       proximity: float | None = None) -> AchievedLevel:
    """Highest reinforcement level reached by any pair of endpoint views."""
    fk = doc.schema.fk(mapping.constraint)
    if proximity is None:
        proximity = proximity_threshold(doc)
    src = _endpoint_channels(doc, fk.source, fk.source_attrs)
    dst = _endpoint_channels(doc, fk.target, fk.target_attrs)
    best = None
    for a in src:
        for b in dst:
            if a[0].name == b[0].name and a[1] == b[1]:
                continue
            if mapping.views is not None and {a[0].name, b[0].name} != set(mapping.views):
                continue
            na, nb = scale_of.get((a[0].name, a[1])), scale_of.get((b[0].name, b[1]))
            if na is None or nb is None or na not in scales or nb not in scales:
                continue
            if mapping.scale is not None and mapping.scale not in (na, nb):
                continue
            level, reason = _level(doc, a, b, scales[na], scales[nb], proximity)
            cand = AchievedLevel(mapping.constraint, mapping.level, level, (a[0].name, b[0].name),
                                 (a[1], b[1]), (na, nb), reason)
            rank = -1 if level is None else level
            if best is None or rank > (-1 if best.level is None else best.level):
                best = cand
    if best is None:
        return AchievedLevel(mapping.constraint, mapping.level, None,
                             reason="endpoint attributes are not both mapped to a spatial channel")
    return best


# --- overplotting --------------------------------------------------------------

@dataclass(frozen=True)
class ViolationGroup:
    view: str
    canvas: tuple | None
    back_keys: tuple

    def to_json(self) -> dict:
        return {"view": self.view, "canvas": _jsonable(self.canvas),
                "back_keys": [_jsonable(k) for k in self.back_keys]}


def _jsonable(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _indistinct(kind: str, a: Mark, b: Mark, eps: float) -> bool:
    pa, pb = a.props, b.props
    for ch in set(pa) | set(pb):
        if ch == "id":
            continue
        va, vb = pa.get(ch), pb.get(ch)
        if ch in SPATIAL or ch in ("dx", "dy"):
            va = 0.0 if va is None else va
            vb = 0.0 if vb is None else vb
            if ch in ("x", "y") and kind in ("text", "label"):
                off = "dx" if ch == "x" else "dy"
                va, vb = va + pa.get(off, 0.0), vb + pb.get(off, 0.0)
            if abs(va - vb) > eps:
                return False
        elif va != vb:
            return False
    return True


def detect_overplotting(view: MarkTable, epsilon: float = 0.5) -> list[ViolationGroup]:
    """Groups (connected components) of marks that render indistinguishably
    within one canvas."""
    parent = list(range(len(view.marks)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_canvas: dict[Any, list[int]] = {}
    for i, m in enumerate(view.marks):
        by_canvas.setdefault(m.canvas, []).append(i)
    for idx in by_canvas.values():
        for p, i in enumerate(idx):
            for j in idx[p + 1:]:
                if _indistinct(view.mark, view.marks[i], view.marks[j], epsilon):
                    parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(view.marks)):
        groups.setdefault(find(i), []).append(i)
    out = [ViolationGroup(view.view, view.marks[g[0]].canvas,
                          tuple(view.marks[i].back_key for i in g))
           for g in groups.values() if len(g) > 1]
    return out


# --- jitter --------------------------------------------------------------------

def jitter_table(view: MarkTable, magnitude: float, seed: int) -> MarkTable:
    """Uniform noise in [-magnitude, magnitude] on every free position channel."""
    if magnitude == 0 or not view.marks:
        return view
    linked = {l.channel for l in view.links}
    chans = [c for c in JITTERED if c not in linked and any(c in m.props for m in view.marks)]
    noise = np.random.default_rng(seed).uniform(-magnitude, magnitude,
                                                size=(len(view.marks), len(chans)))
    marks = []
    for m, row in zip(view.marks, noise):
        p = dict(m.props)
        for c, d in zip(chans, row):
            if c in p:
                p[c] = float(p[c]) + float(d)
        marks.append(replace(m, props=p))
    return view.with_marks(marks)


def jitter(marks: Mapping[str, MarkTable], view: str, magnitude: float, seed: int) -> dict[str, MarkTable]:
    """Jitter one view and re-resolve every foreign reference downstream."""
    out = dict(marks)
    out[view] = jitter_table(marks[view], magnitude, seed)
    return reresolve(out, view)

