"""Faithfulness check over a compiled scene, multiview-consistency lints,
and the report file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import expr as ex
from .compiler import Scene
from .constraints import AchievedLevel, check_shared_scale, detect_overplotting, proximity_threshold
from .encode import anonymous_name
from .marks import bbox
from .relational import ForeignKey
from .render import UNGUIDED, canvas_key, guide_channel, plan_guides
from .scales import TrainedScale
from .sources import base_table
from .spec import (AttributeMap, ExplicitView, ForeignRef, Nest, SharedScale, SpecDocument,
                   ViewSpec)


@dataclass(frozen=True)
class Finding:
    rule: str
    message: str
    views: tuple[str, ...] = ()
    scales: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"rule": self.rule, "message": self.message, "views": list(self.views),
                "scales": list(self.scales)}


@dataclass
class FaithfulnessReport:
    tables: dict = field(default_factory=dict)
    views: dict = field(default_factory=dict)
    attributes: list = field(default_factory=list)
    guides: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    overplot: list = field(default_factory=list)
    nesting: list = field(default_factory=list)
    scales: list = field(default_factory=list)
    lints: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    clauses: dict = field(default_factory=dict)
    verdict: bool = False

    def constraint(self, name: str) -> dict:
        return next(c for c in self.constraints if c["constraint"] == name)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "clauses": self.clauses,
            "tables": self.tables,
            "views": self.views,
            "attributes": self.attributes,
            "guides": self.guides,
            "constraints": self.constraints,
            "overplot": self.overplot,
            "nesting": self.nesting,
            "scales": self.scales,
            "lints": [f.to_json() for f in self.lints],
            "warnings": [f.to_json() for f in self.warnings],
        }

    def dumps(self) -> bytes:
        return (json.dumps(self.to_json(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()


def _j(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_j(x) for x in v]
    return v


def _fks(doc: SpecDocument) -> dict[str, ForeignKey]:
    return {c.name: c for c in doc.schema.foreign_keys}


def _channel_exprs(view: ViewSpec):
    for ch, cv in view.channels.items():
        if isinstance(cv, AttributeMap):
            yield ch, cv.expr
        elif isinstance(cv, ForeignRef) and cv.key is not None:
            yield ch, cv.key


def _resolve_attr(doc: SpecDocument, view: ViewSpec, a: ex.Attr) -> tuple[str, str]:
    if a.table is not None:
        return a.table, a.name
    return base_table(_fks(doc), view.source), a.name


def _coverage(doc: SpecDocument, nests_ok: set[str]) -> dict[tuple[str, str], list[str]]:
    fks = _fks(doc)
    used: dict[tuple[str, str], list[str]] = {}
    for v in doc.views:
        for ch, e in _channel_exprs(v):
            for a in ex.attributes(e):
                used.setdefault(_resolve_attr(doc, v, a), []).append(f"{v.name}.{ch}")
        here = base_table(fks, v.source)
        for ch, cv in v.channels.items():
            if isinstance(cv, ForeignRef) and cv.via is not None:
                fk = fks[cv.via]
                attrs = fk.source_attrs if here == fk.source else fk.target_attrs
                for a in attrs:
                    used.setdefault((here, a), []).append(f"{v.name}.{ch}")
    for m in doc.constraint_mappings:
        if isinstance(m, Nest) and m.constraint in nests_ok:
            fk = fks[m.constraint]
            for a in fk.source_attrs:
                used.setdefault((fk.source, a), []).append(f"nest:{m.constraint}")
    return used


# --- clause 4 ------------------------------------------------------------------

def _exactness(scene: Scene, view: str) -> tuple[int, int]:
    t = scene.marks[view]
    bad = sum(1 for l in t.links
              if t.marks[l.mark].props[l.channel] != scene.marks[l.view].marks[l.target].props[l.prop])
    return len(t.links), bad


def _maps_attrs(doc: SpecDocument, table: str, attrs: tuple[str, ...]) -> list[str]:
    """Views over *table* with a data mapping that references one of *attrs*."""
    out = []
    for v in doc.views:
        if v.source != table:
            continue
        for ch, e in _channel_exprs(v):
            if any(_resolve_attr(doc, v, a) in {(table, x) for x in attrs} for a in ex.attributes(e)):
                out.append(v.name)
                break
    return out


def check_explicit(scene: Scene, fk: ForeignKey, m: ExplicitView) -> dict:
    doc = scene.doc
    view = doc.view(m.view)
    fks = _fks(doc)
    base = base_table(fks, view.source)
    refs = scene.plan.refs_of(view.name)
    target_base = {r.channel: base_table(fks, doc.view(r.target).source) for r in refs}
    evidence = {}
    # source endpoint: one mark per referencing row, or a reference into a view over S
    if base == fk.source:
        evidence["source"] = f"{view.name} draws one mark per {fk.source} row"
    else:
        hit = [r for r in refs if target_base[r.channel] == fk.source]
        if hit:
            evidence["source"] = f"{view.name}.{hit[0].channel} references {hit[0].target}"
    # target endpoint: a reference that follows X to Y, or a shared data label
    x_names = {ex.Attr(a) for a in fk.source_attrs} | {ex.Attr(a, fk.source) for a in fk.source_attrs}
    for r in refs:
        if (target_base[r.channel] == fk.target and r.lookup == fk.target_attrs
                and set(r.key) <= x_names):
            evidence["target"] = f"{view.name}.{r.channel} references {r.target} via {fk.name}"
            break
    else:
        mapped_here = set()
        for ch, e in _channel_exprs(view):
            for a in ex.attributes(e):
                mapped_here.add(_resolve_attr(doc, view, a))
        label_x = {(fk.source, a) for a in fk.source_attrs} <= mapped_here
        label_y = {(fk.target, a) for a in fk.target_attrs} <= mapped_here
        if (label_x or label_y) and base == fk.source:
            others = _maps_attrs(doc, fk.target, fk.target_attrs)
            others = [o for o in others if o != view.name]
            if others:
                evidence["target"] = f"{view.name} shows the {fk.name} reference as data also mapped by {others[0]}"
    links, bad = _exactness(scene, view.name)
    ok = "source" in evidence and "target" in evidence and bad == 0
    reason = ""
    if "source" not in evidence:
        reason = f"no mark of {view.name} is anchored to {fk.source}"
    elif "target" not in evidence:
        reason = f"no channel of {view.name} identifies the referenced {fk.target} row"
    elif bad:
        reason = f"{bad} of {links} foreign-reference values differ from their targets"
    return {"method": "explicit", "view": view.name, "pass": ok, "evidence": evidence,
            "references": links, "mismatched": bad, "reason": reason}


def check_nest(scene: Scene, fk: ForeignKey, m: Nest) -> tuple[dict, dict]:
    child, parent = scene.marks[m.child], scene.marks[m.parent]
    psrc, csrc = scene.sources[m.parent], scene.sources[m.child]
    owners = {tuple(psrc.envs[pm.row][a] for a in fk.target_attrs): pm for pm in parent.marks}
    contained = 0
    misplaced = 0
    canvases: dict[Any, list] = {pm.back_key: [] for pm in parent.marks}
    for cm in child.marks:
        pm = owners.get(tuple(csrc.envs[cm.row][a] for a in fk.source_attrs))
        if pm is None or cm.canvas != (m.parent, pm.back_key):
            misplaced += 1
            continue
        canvases[pm.back_key].append(cm.back_key)
        w, h = abs(pm.props.get("w", 0.0)), abs(pm.props.get("h", 0.0))
        x0, y0, x1, y1 = bbox(child.mark, cm)
        if 0 <= x0 and x1 <= w and 0 <= y0 and y1 <= h:
            contained += 1
    rows = sorted(cm.row for cm in child.marks)
    partition = misplaced == 0 and rows == list(range(len(csrc)))
    ok = partition and contained == len(child.marks)
    reason = ""
    if not partition:
        reason = f"{misplaced} child marks are not in the canvas of the row they reference"
    elif not ok:
        reason = f"{len(child.marks) - contained} child marks leave their parent extent"
    verdict = {"method": "nest", "child": m.child, "parent": m.parent, "pass": ok,
               "contained": contained, "child_marks": len(child.marks), "partition": partition,
               "reason": reason}
    tree = {"constraint": fk.name, "child": m.child, "parent": m.parent,
            "canvases": [{"owner": _j(k), "children": [_j(c) for c in v]} for k, v in canvases.items()]}
    return verdict, tree


# --- lints -----------------------------------------------------------------------

def _kind(ch: str) -> str:
    return {"x2": "x", "y2": "y"}.get(ch, ch)


def _fk_related(doc: SpecDocument, a: tuple[str, str], b: tuple[str, str]) -> bool:
    for c in doc.schema.foreign_keys:
        for x, y in zip(c.source_attrs, c.target_attrs):
            if {a, b} == {(c.source, x), (c.target, y)}:
                return True
    return False


def lint_consistency(doc: SpecDocument, scales: Mapping[str, TrainedScale]) -> list[Finding]:
    entries = []
    for v in doc.views:
        for ch, cv in v.channels.items():
            if ch == "id" or not isinstance(cv, AttributeMap) or not isinstance(cv.expr, ex.Attr):
                continue
            if ch == "text" and cv.scale is None:
                continue
            name = cv.scale or anonymous_name(v.name, ch)
            if name not in scales:
                continue
            entries.append((v.name, ch, _kind(ch), _resolve_attr(doc, v, cv.expr), name))
    out: list[Finding] = []
    seen = set()

    def emit(rule, key, message, views, names):
        if (rule, key) not in seen:
            seen.add((rule, key))
            out.append(Finding(rule, message, tuple(views), tuple(names)))

    for i, (va, ca, ka, aa, sa) in enumerate(entries):
        for vb, cb, kb, ab, sb in entries[i + 1:]:
            A, B = scales[sa], scales[sb]
            attr = f"{aa[0]}.{aa[1]}"
            pair = tuple(sorted((sa, sb)))
            if aa == ab:
                if ka == kb and sa != sb and A.domain != B.domain:
                    emit("SAME-ATTR-DIFF-DOMAIN", (aa, ka, pair),
                         f"{attr} is mapped to {ka} in {va} and {vb} with different domains",
                         (va, vb), pair)
                if ka == kb == "color" and sa != sb and A.range != B.range:
                    emit("SAME-ATTR-COLOR-DIFF-RANGE", (aa, pair),
                         f"{attr} is colored differently in {va} and {vb}", (va, vb), pair)
                continue
            if _fk_related(doc, aa, ab):
                continue
            attrs = tuple(sorted((f"{aa[0]}.{aa[1]}", f"{ab[0]}.{ab[1]}")))
            if sa == sb:
                emit("DIFF-ATTR-SHARED-DOMAIN", (sa, attrs),
                     f"unrelated attributes {attrs[0]} and {attrs[1]} share scale {sa}",
                     (va, vb), (sa,))
            elif ka == kb == "color":
                ca_ = {A.apply(d) for d in A.domain}
                cb_ = {B.apply(d) for d in B.domain}
                if ca_ & cb_:
                    emit("DIFF-ATTR-COLOR-OVERLAP", (pair, attrs),
                         f"unrelated attributes {attrs[0]} and {attrs[1]} use overlapping colors "
                         f"{sorted(map(str, ca_ & cb_))}", (va, vb), pair)
    return out


def naive_constraint_table_guard(doc: SpecDocument) -> list[Finding]:
    """Explicit constraint views that just plot X against Y."""
    fks = _fks(doc)
    out = []
    for m in doc.constraint_mappings:
        if not isinstance(m, ExplicitView):
            continue
        v = doc.view(m.view)
        fk = fks[m.constraint]
        if any(isinstance(cv, ForeignRef) for cv in v.channels.values()):
            continue
        bare = {_resolve_attr(doc, v, cv.expr) for ch, cv in v.channels.items()
                if ch != "id" and isinstance(cv, AttributeMap) and isinstance(cv.expr, ex.Attr)}
        if any((fk.source, a) in bare for a in fk.source_attrs) and \
                any((fk.target, a) in bare for a in fk.target_attrs if (fk.target, a) not in
                    {(fk.source, x) for x in fk.source_attrs}):
            out.append(Finding("NAIVE-CONSTRAINT-TABLE",
                               f"view {v.name} plots {fk.name}'s endpoint attributes directly; since "
                               "X equals Y on every row this shows nothing about the relationship. "
                               "Reference the endpoint views instead.", (v.name,)))
    return out


# --- the check ---------------------------------------------------------------------

def check_faithfulness(scene: Scene, levels: Mapping[str, AchievedLevel] | None = None) -> FaithfulnessReport:
    doc, db = scene.doc, scene.db
    rep = FaithfulnessReport()
    fks = {c.name: c for c in db.constraints}

    # clause 1
    for t in db.tables:
        rep.tables[t] = [v.name for v in doc.views if v.source == t]
    c1 = all(rep.tables.values())

    # clause 2
    c2 = True
    for name in scene.plan.order:
        t = scene.marks[name]
        keys = [m.back_key for m in t.marks]
        rows = len(scene.sources[name])
        unique = len(set(keys)) == len(keys)
        ok = len(t.marks) == rows and unique and not t.unresolved
        c2 &= ok
        rep.views[name] = {"source": doc.view(name).source, "rows": rows, "marks": len(t.marks),
                           "unique_back_keys": unique, "unresolved_auto": sorted(t.unresolved),
                           "pass": ok}

    # clause 4 first: nest verdicts feed clause 3 coverage
    verdicts = []
    nests_ok = set()
    for name, fk in fks.items():
        methods = []
        for i, m in enumerate(doc.constraint_mappings):
            if m.constraint != name:
                continue
            if isinstance(m, ExplicitView):
                methods.append(check_explicit(scene, fk, m))
            elif isinstance(m, Nest):
                v, tree = check_nest(scene, fk, m)
                methods.append(v)
                rep.nesting.append(tree)
                if v["pass"]:
                    nests_ok.add(name)
            elif isinstance(m, SharedScale):
                lv = (levels or {}).get(name) or check_shared_scale(
                    m, doc, scene.scales, scene.scale_of, proximity_threshold(doc))
                d = lv.to_json()
                d["method"] = "shared_scale"
                methods.append(d)
        preserved = any(x["pass"] for x in methods)
        verdicts.append({"constraint": name, "source": f"{fk.source}({', '.join(fk.source_attrs)})",
                         "target": f"{fk.target}({', '.join(fk.target_attrs)})",
                         "cardinality": fk.cardinality, "preserved": preserved, "methods": methods,
                         "reason": "" if preserved else (
                             "no constraint mapping" if not methods else
                             "; ".join(x["reason"] for x in methods if x["reason"]))})
    rep.constraints = verdicts
    eps = doc.options.epsilon
    for name in scene.plan.order:
        rep.overplot.extend(g.to_json() for g in detect_overplotting(scene.marks[name], eps))
    c4 = all(v["preserved"] for v in verdicts) and not rep.overplot

    # clause 3
    used = _coverage(doc, nests_ok)
    c3 = True
    for tname, t in db.tables.items():
        for a in t.attributes:
            where = used.get((tname, a), [])
            c3 &= bool(where)
            rep.attributes.append({"table": tname, "attribute": a, "mapped": bool(where),
                                   "by": sorted(set(where))})
    guides = plan_guides(scene)
    have = {(g.canvas, g.kind, g.channel, g.scale) for g in guides}
    for name in scene.plan.order:
        t = scene.marks[name]
        for ch in doc.view(name).channels:
            s = scene.scale_of.get((name, ch))
            if ch in UNGUIDED or s is None or not t.marks:
                continue
            kind, gch = guide_channel(ch)
            missing = sorted({str(canvas_key(t, m)) for m in t.marks
                              if (canvas_key(t, m), kind, gch, s) not in have})
            c3 &= not missing
            rep.guides.append({"view": name, "channel": ch, "scale": s, "guide": kind,
                               "missing_canvases": missing, "pass": not missing})

    rep.scales = [{"name": s.name, "kind": s.kind, "domain": list(s.domain), "range": list(s.range),
                   "contributors": [list(c) for c in s.contributors]}
                  for s in sorted(scene.scales.values(), key=lambda s: s.name)]
    rep.lints = lint_consistency(doc, scene.scales)
    rep.warnings = naive_constraint_table_guard(doc)
    rep.clauses = {"1_tables_have_views": c1, "2_rows_have_marks": c2,
                   "3_attributes_mapped": c3, "4_constraints_preserved": c4}
    rep.verdict = c1 and c2 and c3 and c4
    return rep
