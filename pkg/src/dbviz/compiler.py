"""Plan and materialize a specification against a database."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import expr as ex
from .constraints import LayoutError, apply_nest, grid, jitter
from .encode import CompileError, Encoder, RefPlan, view_error
from .marks import MarkTable
from .relational import Ambiguous, Database, join_path
from .scales import TrainedScale
from .sources import SourceRows, base_table
from .spec import Auto, ForeignRef, Frame, Nest, SpecDocument, ViewSpec


@dataclass(frozen=True)
class CompilationPlan:
    order: tuple[str, ...]
    scale_schedule: tuple[tuple[str, str], ...]  # (scale, first view training it)
    mapping_schedule: tuple[tuple[int, str], ...]  # (mapping index, stage)
    refs: tuple[RefPlan, ...] = ()

    def refs_of(self, view: str) -> list[RefPlan]:
        return [r for r in self.refs if r.view == view]


@dataclass
class Scene:
    doc: SpecDocument
    db: Database
    plan: CompilationPlan
    marks: dict[str, MarkTable]
    scales: dict[str, TrainedScale]
    scale_of: dict[tuple[str, str], str]
    sources: dict[str, SourceRows] = field(default_factory=dict)
    jittered: tuple[str, ...] = ()


def _resolve_ref(doc: SpecDocument, db: Database, view: ViewSpec, ch: str, ref: ForeignRef,
                 diags: list) -> RefPlan | None:
    fks = {c.name: c for c in db.constraints}
    target = doc.view(ref.view)
    here = base_table(fks, view.source)
    if target.source not in db.tables:
        diags.append(view_error(view, "ref-target", f"view {view.name} channel {ch}: "
                                f"referenced view {target.name} must draw a table"))
        return None
    there = target.source
    tt = db.table(there)
    if ref.via is not None:
        fk = fks[ref.via]
        if here == fk.source and there == fk.target:
            key, lookup = fk.source_attrs, fk.target_attrs
        else:
            key, lookup = fk.target_attrs, fk.source_attrs
        key_exprs = tuple(ex.Attr(a) for a in key)
    else:
        key_exprs = (ref.key,)
        lookup = None
        if isinstance(ref.key, ex.Attr) and ref.key.table in (None, here):
            a = ref.key.name
            fwd = [c for c in db.constraints
                   if c.source == here and c.target == there and c.source_attrs == (a,)]
            back = [c for c in db.constraints if c.target == here and c.source == there
                    and c.source != c.target and c.target_attrs == (a,)]
            if len(fwd) + len(back) > 1:
                diags.append(view_error(view, "ref-ambiguous", f"view {view.name} channel {ch}: "
                                        f"{a} is covered by several foreign keys into {there}"))
                return None
            if fwd:
                lookup = fwd[0].target_attrs
            elif back:
                lookup = back[0].source_attrs
        if lookup is None:
            if tt.primary_key is None or len(tt.primary_key) != 1:
                diags.append(view_error(view, "ref-not-key", f"view {view.name} channel {ch}: "
                                        f"{there} has no single-attribute primary key to look up"))
                return None
            lookup = tt.primary_key
            if here != there:
                path = join_path(db, here, there)
                if path is None:
                    diags.append(view_error(view, "no-join-path", f"view {view.name} channel {ch}: "
                                            f"no join path from {here} to {there}"))
                    return None
                if isinstance(path, Ambiguous):
                    diags.append(view_error(view, "ambiguous-join-path",
                                            f"view {view.name} channel {ch}: "
                                            f"{len(path.paths)} join paths from {here} to {there}"))
                    return None
    if not tt.is_declared_key(lookup):
        diags.append(view_error(view, "ref-not-key", f"view {view.name} channel {ch}: "
                                f"{there}({', '.join(lookup)}) is not a declared key, so the "
                                "reference does not select a unique mark"))
        return None
    return RefPlan(view.name, ch, target.name, ref.prop, key_exprs, tuple(lookup))


def plan(doc: SpecDocument, db: Database) -> CompilationPlan:
    """Order views so every referenced or enclosing view comes first."""
    diags = []
    names = [v.name for v in doc.views]
    deps: dict[str, set[str]] = {n: set() for n in names}
    refs = []
    nested = {m.child: m for m in doc.constraint_mappings if isinstance(m, Nest)}
    for v in doc.views:
        for ch, cv in v.channels.items():
            if not isinstance(cv, ForeignRef):
                continue
            target = doc.view(cv.view)
            if v.name in nested or target.name in nested:
                diags.append(view_error(v, "ref-canvas", f"view {v.name} channel {ch}: foreign "
                                        "references into or out of nested views are not supported"))
                continue
            if v.frame != target.frame:
                diags.append(view_error(v, "ref-canvas", f"view {v.name} channel {ch}: "
                                        f"{target.name} is drawn in a different frame"))
                continue
            deps[v.name].add(cv.view)
            r = _resolve_ref(doc, db, v, ch, cv, diags)
            if r is not None:
                refs.append(r)
    for child, m in nested.items():
        deps[child].add(m.parent)
    order: list[str] = []
    done: set[str] = set()
    while len(order) < len(names):
        ready = [n for n in names if n not in done and deps[n] <= done]
        if not ready:
            stuck = [n for n in names if n not in done]
            first = doc.view(stuck[0])
            diags.append(view_error(first, "cycle", "cyclic view dependencies among "
                                    + ", ".join(stuck)))
            break
        order.append(ready[0])
        done.add(ready[0])
    if diags:
        raise CompileError(diags)
    schedule, seen = [], set()
    for n in order:
        v = doc.view(n)
        for ch, cv in v.channels.items():
            s = getattr(cv, "scale", None)
            if s is not None and s not in seen:
                seen.add(s)
                schedule.append((s, n))
    stages = []
    for i, m in enumerate(doc.constraint_mappings):
        stages.append((i, "layout" if isinstance(m, Nest) else "check"))
    return CompilationPlan(tuple(order), tuple(schedule), tuple(stages), tuple(refs))


def materialize(cplan: CompilationPlan, doc: SpecDocument, db: Database,
                encoder: Encoder | None = None) -> tuple[dict[str, MarkTable], Encoder]:
    enc = encoder or Encoder(doc, db)
    nests = {m.child: m for m in doc.constraint_mappings if isinstance(m, Nest)}
    fks = {c.name: c for c in db.constraints}
    out: dict[str, MarkTable] = {}
    for name in cplan.order:
        v = doc.view(name)
        auto = frozenset(ch for ch, cv in v.channels.items() if isinstance(cv, Auto))
        if name in nests:
            m = nests[name]
            try:
                out[name] = apply_nest(out[m.parent], v, fks[m.constraint], db, enc)
            except LayoutError as exc:
                raise CompileError([view_error(v, "layout-error", str(exc))]) from None
            continue
        frame = v.frame or Frame(0, 0, doc.width, doc.height)
        refs: dict[str, tuple[RefPlan, dict]] = {}
        for r in cplan.refs_of(name):
            tsrc = enc.sources[r.target]
            index: dict[tuple, list[int]] = {}
            for i, mk in enumerate(out[r.target].marks):
                index.setdefault(tuple(tsrc.envs[mk.row][a] for a in r.lookup), []).append(i)
            refs[r.channel] = (r, index)
        marks, links = enc.encode(v, range(len(enc.sources[name])), frame.width, frame.height,
                                  refs, {t: out[t].marks for t in {r.target for r in cplan.refs_of(name)}})
        marks = grid(marks, auto, frame.width, frame.height, v.k_per_row)
        out[name] = MarkTable(name, v.mark, tuple(marks), frame, tuple(links), auto)
    return out, enc


def compile_scene(doc: SpecDocument, db: Database, jitter_views: tuple[str, ...] | None = None,
                  magnitude: float | None = None, seed: int | None = None) -> Scene:
    """Plan, materialize and (optionally) jitter.  Jitter settings default to
    the document options."""
    cplan = plan(doc, db)
    marks, enc = materialize(cplan, doc, db)
    o = doc.options
    magnitude = o.jitter_magnitude if magnitude is None else magnitude
    seed = o.jitter_seed if seed is None else seed
    views = o.jitter_views if jitter_views is None else jitter_views
    applied = ()
    if magnitude and views:
        for i, v in enumerate(views):
            marks = jitter(marks, v, magnitude, seed + i)
        applied = tuple(views)
    return Scene(doc, db, cplan, marks, dict(enc.trained), dict(enc.scale_of), enc.sources, applied)


def marks_json(scene: Scene) -> dict[str, Any]:
    def conv(v):
        return list(map(conv, v)) if isinstance(v, tuple) else v
    out = {}
    for name in scene.plan.order:
        t = scene.marks[name]
        out[name] = {
            "mark": t.mark,
            "parent": t.parent,
            "marks": [{"back_key": conv(m.back_key), "canvas": conv(m.canvas),
                       "props": dict(sorted(m.props.items()))} for m in t.marks],
        }
    return out
