"""Channel evaluation shared by the view compiler and the nesting layout.

An :class:`Encoder` evaluates every attribute mapping of a document once,
assigns each mapped channel a scale (named, or an anonymous per-channel one)
and trains scales lazily: the domain over all contributors, the default
range from the first contributor to ask for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from . import expr as ex
from .marks import Link, Mark
from .relational import Database
from .scales import PALETTE, ScaleError, ScaleTypeError, TrainedScale, train
from .sources import SourceRows, build_source
from .spec import (AttributeMap, Auto, Constant, Diagnostic, ScaleSpec, SpecDocument,
                   SpecError, ViewSpec)

UNSCALED = ("text",)


class CompileError(SpecError):
    """Planning or materialization failure; carries positioned diagnostics."""

    def __init__(self, diagnostics, filename: str = "<spec>"):
        super().__init__(list(diagnostics), filename)


def view_error(view: ViewSpec, rule: str, message: str) -> Diagnostic:
    line, col = view.pos
    return Diagnostic(line, col, rule, message)


def anonymous_name(view: str, channel: str) -> str:
    return f"{view}:{channel}"


def default_kind(channel: str, value_type: str) -> str:
    if channel == "id":
        return "identity"
    if channel == "color":
        return "ordinal"
    return "linear" if value_type in ex.NUMERIC else "ordinal"


def default_range(channel: str, kind: str, width: float, height: float) -> tuple | None:
    if kind == "identity":
        return ()
    if channel == "color":
        return PALETTE
    if channel in ("x", "x2"):
        pad = min(10.0, width * 0.1)
        return (pad, width - pad) if kind == "linear" else (0.0, float(width))
    if channel in ("y", "y2"):
        pad = min(10.0, height * 0.1)
        return (height - pad, pad) if kind == "linear" else (0.0, float(height))
    if channel == "w":
        return (0.0, float(width))
    if channel == "h":
        return (0.0, float(height))
    if channel in ("dx", "dy"):
        return (0.0, 10.0)
    if channel == "opacity":
        return (0.2, 1.0)
    return None


@dataclass(frozen=True)
class RefPlan:
    """How channel *channel* of *view* finds its mark in *target*: evaluate
    *key* on the row and match against *lookup* attributes of the target."""
    view: str
    channel: str
    target: str
    prop: str
    key: tuple[ex.Expr, ...]
    lookup: tuple[str, ...]


@dataclass
class Encoder:
    doc: SpecDocument
    db: Database
    sources: dict[str, SourceRows] = field(default_factory=dict)
    columns: dict[tuple[str, str], list] = field(default_factory=dict)
    scale_of: dict[tuple[str, str], str] = field(default_factory=dict)
    specs: dict[str, ScaleSpec] = field(default_factory=dict)
    contributors: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    trained: dict[str, TrainedScale] = field(default_factory=dict)

    def __post_init__(self):
        diags = []
        named = {s.name: s for s in self.doc.scales}
        for v in self.doc.views:
            src = self.sources.get(v.name) or build_source(self.db, v.source)
            self.sources[v.name] = src
            types = src.types()
            for ch, cv in v.channels.items():
                if not isinstance(cv, AttributeMap):
                    continue
                try:
                    self.columns[(v.name, ch)] = [ex.evaluate(cv.expr, env) for env in src.envs]
                except ex.DataError as exc:
                    diags.append(view_error(v, "data-error", f"view {v.name} channel {ch}: {exc}"))
                    continue
                if ch in UNSCALED and cv.scale is None:
                    continue
                if cv.scale is not None:
                    name = cv.scale
                    self.specs[name] = named[name]
                else:
                    name = anonymous_name(v.name, ch)
                    kind = default_kind(ch, ex.infer_type(cv.expr, types))
                    self.specs[name] = ScaleSpec(name, kind)
                self.scale_of[(v.name, ch)] = name
                self.contributors.setdefault(name, []).append((v.name, ch))
        if diags:
            raise CompileError(diags)

    def scale(self, view: str, channel: str, width: float, height: float) -> TrainedScale:
        name = self.scale_of[(view, channel)]
        if name not in self.trained:
            spec = self.specs[name]
            cols = [self.columns[c] for c in self.contributors[name]]
            rng = default_range(channel, spec.kind, width, height)
            try:
                self.trained[name] = train(spec, cols, rng, self.contributors[name])
            except (ScaleError, ScaleTypeError) as exc:
                raise CompileError([view_error(self.doc.view(view), "scale-error", str(exc))]) from None
        return self.trained[name]

    def encode(self, view: ViewSpec, rows: Sequence[int], width: float, height: float,
               refs: Mapping[str, tuple[RefPlan, dict]] | None = None,
               targets: Mapping[str, Sequence[Mark]] | None = None,
               canvas: Mapping[int, tuple] | None = None) -> tuple[list[Mark], list[Link]]:
        """Marks for the given source rows of *view*.  *refs* maps a channel
        to its plan and the target's lookup index; *targets* holds the
        already materialized marks of referenced views."""
        src = self.sources[view.name]
        marks, links = [], []
        for pos, i in enumerate(rows):
            props: dict[str, Any] = {}
            for ch, cv in view.channels.items():
                if isinstance(cv, Constant):
                    props[ch] = cv.value
                elif isinstance(cv, Auto):
                    props[ch] = 0.0
                elif isinstance(cv, AttributeMap):
                    v = self.columns[(view.name, ch)][i]
                    if (view.name, ch) in self.scale_of:
                        s = self.scale(view.name, ch, width, height)
                        try:
                            v = s.apply(v)
                        except ScaleError as exc:
                            raise CompileError([view_error(view, "scale-error", str(exc))]) from None
                    props[ch] = ex.render_value(v) if ch == "text" and not isinstance(v, str) else v
                else:
                    plan, index = refs[ch]
                    try:
                        key = tuple(ex.evaluate(k, src.envs[i]) for k in plan.key)
                    except ex.DataError as exc:
                        raise CompileError([view_error(view, "data-error", str(exc))]) from None
                    hits = index.get(key, [])
                    if len(hits) != 1:
                        raise CompileError([view_error(
                            view, "ref-unresolved",
                            f"view {view.name} channel {ch}: row {src.back_keys[i]!r} key "
                            f"{key!r} selects {len(hits)} marks of {plan.target}")])
                    target = targets[plan.target][hits[0]]
                    if plan.prop not in target.props:
                        raise CompileError([view_error(
                            view, "ref-unresolved",
                            f"view {view.name} channel {ch}: {plan.target} marks have no {plan.prop}")])
                    props[ch] = target.props[plan.prop]
                    links.append(Link(pos, ch, plan.target, hits[0], plan.prop))
            owner = canvas.get(i) if canvas is not None else None
            marks.append(Mark(src.back_keys[i], i, props, owner))
        return marks, links
