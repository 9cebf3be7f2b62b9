"""Specification documents: data model, JSON parser with positioned
diagnostics, and canonical serializer.  The file format is described in
``spec-format.md``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

from json_source_map import calculate as _source_map

from . import expr as ex
from .relational import (CARDINALITIES, AttributeDomain, ForeignKey, SchemaError)
from .sources import base_table, source_columns

CHANNELS = ("x", "y", "x2", "y2", "w", "h", "text", "color", "opacity", "dx", "dy", "id")
CHANNEL_ALIASES = {"sx": "x", "sy": "y", "ex": "x2", "ey": "y2", "x1": "x", "y1": "y",
                   "width": "w", "height": "h", "label": "text"}
AUTO_CHANNELS = ("x", "y", "w", "h")
POSITION_CHANNELS = ("x", "y", "x2", "y2")
MARKS = ("point", "circle", "square", "rect", "bbox", "line", "link", "label", "text", "bar")
RECT_MARKS = ("square", "rect", "bbox", "bar")
REQUIRED_CHANNELS = {"link": ("x", "y", "x2", "y2"), "line": ("x", "y", "x2", "y2"),
                     "text": ("text",), "label": ("text",)}
SCALE_KINDS = ("linear", "ordinal", "identity")
MAX_LEVEL = 4


# --- model -----------------------------------------------------------------

@dataclass(frozen=True)
class AttributeMap:
    expr: ex.Expr
    scale: str | None = None


@dataclass(frozen=True)
class Constant:
    value: Any


@dataclass(frozen=True)
class ForeignRef:
    """Copy property *prop* of the mark in *view* selected either by the
    key expression *key* or by following foreign key *via*."""
    view: str
    prop: str
    key: ex.Expr | None = None
    via: str | None = None


@dataclass(frozen=True)
class Auto:
    pass


ChannelValue = Union[AttributeMap, Constant, ForeignRef, Auto]


@dataclass(frozen=True)
class Frame:
    x: float
    y: float
    width: float
    height: float


@dataclass(frozen=True)
class ViewSpec:
    name: str
    source: str
    mark: str
    channels: Mapping[str, ChannelValue]
    frame: Frame | None = None
    k_per_row: int | None = None
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "channels", dict(self.channels))


@dataclass(frozen=True)
class ScaleSpec:
    name: str
    kind: str
    domain: tuple | None = None
    range: tuple | None = None


@dataclass(frozen=True)
class ExplicitView:
    constraint: str
    view: str


@dataclass(frozen=True)
class Nest:
    constraint: str
    child: str
    parent: str


@dataclass(frozen=True)
class SharedScale:
    constraint: str
    level: int = 0
    scale: str | None = None
    views: tuple[str, str] | None = None


ConstraintMappingSpec = Union[ExplicitView, Nest, SharedScale]


@dataclass(frozen=True)
class TableDecl:
    name: str
    attributes: tuple[tuple[str, AttributeDomain], ...]
    keys: tuple[tuple[str, ...], ...] = ()
    primary_key: tuple[str, ...] | None = None
    file: str | None = None


@dataclass(frozen=True)
class SchemaBlock:
    tables: tuple[TableDecl, ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()

    def table(self, name: str) -> TableDecl | None:
        return next((t for t in self.tables if t.name == name), None)

    def fk(self, name: str) -> ForeignKey | None:
        return next((c for c in self.foreign_keys if c.name == name), None)


@dataclass(frozen=True)
class Options:
    epsilon: float = 0.5
    proximity_px: float | None = None
    jitter_magnitude: float = 0.0
    jitter_seed: int = 0
    jitter_views: tuple[str, ...] = ()


@dataclass(frozen=True)
class SpecDocument:
    schema: SchemaBlock = SchemaBlock()
    scales: tuple[ScaleSpec, ...] = ()
    views: tuple[ViewSpec, ...] = ()
    constraint_mappings: tuple[ConstraintMappingSpec, ...] = ()
    width: float = 400
    height: float = 300
    options: Options = Options()

    def view(self, name: str) -> ViewSpec:
        for v in self.views:
            if v.name == name:
                return v
        raise KeyError(name)

    def scale(self, name: str) -> ScaleSpec | None:
        return next((s for s in self.scales if s.name == name), None)

    def source_of(self, view: str) -> str:
        """Base table of a view (the referencing table for foreign-key sources)."""
        fks = {c.name: c for c in self.schema.foreign_keys}
        return base_table(fks, self.view(view).source)

    def nest_of(self, view: str) -> Nest | None:
        return next((m for m in self.constraint_mappings
                     if isinstance(m, Nest) and m.child == view), None)


# --- diagnostics -----------------------------------------------------------

@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    rule: str
    message: str

    def format(self, filename: str = "<spec>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.rule}: {self.message}"


class SpecError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic], filename: str = "<spec>"):
        self.diagnostics = sorted(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


# --- parsing ---------------------------------------------------------------

def _esc(key: str) -> str:
    return str(key).replace("~", "~0").replace("/", "~1")


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diags: list[Diagnostic] = []
        self.smap: dict = {}

    def pos(self, pointer: str, key: bool = False) -> tuple[int, int]:
        while True:
            entry = self.smap.get(pointer)
            if entry is not None:
                loc = entry.key_start if key and entry.key_start is not None else entry.value_start
                return loc.line + 1, loc.column + 1
            if not pointer:
                return 1, 1
            pointer = pointer.rsplit("/", 1)[0]

    def error(self, pointer: str, rule: str, message: str, key: bool = False) -> None:
        line, col = self.pos(pointer, key)
        self.diags.append(Diagnostic(line, col, rule, message))

    def obj(self, value: Any, pointer: str, what: str) -> dict | None:
        if not isinstance(value, dict):
            self.error(pointer, "type", f"{what} must be an object")
            return None
        return value

    def known(self, obj: dict, allowed: tuple, pointer: str) -> None:
        for k in obj:
            if k not in allowed:
                self.error(f"{pointer}/{_esc(k)}", "unknown-field", f"unknown field {k!r}", key=True)

    def name(self, obj: dict, pointer: str, what: str) -> str | None:
        n = obj.get("name")
        if not isinstance(n, str) or not n:
            self.error(pointer, "missing-name", f"{what} needs a non-empty string name")
            return None
        return n

    # -- schema --
    def domain(self, a: dict, p: str) -> AttributeDomain | None:
        kind = a.get("type")
        interval = a.get("interval")
        cats = a.get("categories")
        try:
            if interval is not None and not (isinstance(interval, list) and len(interval) == 2
                                             and all(_is_number(v) for v in interval)):
                raise SchemaError("interval must be a pair of numbers")
            if cats is not None and not (isinstance(cats, list) and all(isinstance(c, str) for c in cats)):
                raise SchemaError("categories must be a list of strings")
            return AttributeDomain(kind, tuple(interval) if interval is not None else None,
                                   tuple(cats) if cats is not None else None)
        except SchemaError as exc:
            self.error(p, "bad-domain", str(exc))
            return None

    def table(self, t: Any, p: str) -> TableDecl | None:
        t = self.obj(t, p, "table")
        if t is None:
            return None
        self.known(t, ("name", "attributes", "keys", "primary_key", "file"), p)
        name = self.name(t, p, "table")
        attrs = []
        raw_attrs = t.get("attributes")
        if not isinstance(raw_attrs, list) or not raw_attrs:
            self.error(f"{p}/attributes", "type", "attributes must be a non-empty list")
            raw_attrs = []
        for i, a in enumerate(raw_attrs):
            ap = f"{p}/attributes/{i}"
            a = self.obj(a, ap, "attribute")
            if a is None:
                continue
            self.known(a, ("name", "type", "interval", "categories"), ap)
            an = self.name(a, ap, "attribute")
            dom = self.domain(a, ap)
            if an is None or dom is None:
                continue
            if any(n == an for n, _ in attrs):
                self.error(ap, "duplicate-name", f"attribute {an} declared twice in {name}")
                continue
            attrs.append((an, dom))
        names = [n for n, _ in attrs]

        def attr_list(v: Any, vp: str) -> tuple[str, ...] | None:
            if not (isinstance(v, list) and v and all(isinstance(x, str) for x in v)):
                self.error(vp, "type", "expected a non-empty list of attribute names")
                return None
            for x in v:
                if x not in names:
                    self.error(vp, "unknown-attribute", f"unknown attribute {x} in table {name}")
                    return None
            return tuple(v)

        keys = []
        for i, k in enumerate(t.get("keys", []) or []):
            k = attr_list(k, f"{p}/keys/{i}")
            if k is not None:
                keys.append(k)
        if "primary_key" in t:
            pk = None if t["primary_key"] is None else attr_list(t["primary_key"], f"{p}/primary_key")
        else:
            pk = ("id",) if "id" in names else None
        if pk is not None and pk not in keys:
            keys.insert(0, pk)
        file = t.get("file")
        if file is not None and not isinstance(file, str):
            self.error(f"{p}/file", "type", "file must be a string")
            file = None
        if name is None:
            return None
        return TableDecl(name, tuple(attrs), tuple(keys), pk, file)

    def foreign_key(self, c: Any, p: str, tables: dict[str, TableDecl]) -> ForeignKey | None:
        c = self.obj(c, p, "foreign key")
        if c is None:
            return None
        self.known(c, ("name", "source", "target", "cardinality"), p)
        name = self.name(c, p, "foreign key")
        ends = []
        for side in ("source", "target"):
            sp = f"{p}/{side}"
            e = self.obj(c.get(side), sp, f"foreign key {side}")
            if e is None:
                return None
            self.known(e, ("table", "attributes"), sp)
            tname = e.get("table")
            attrs = e.get("attributes")
            if tname not in tables:
                self.error(f"{sp}/table", "unknown-table", f"unknown table {tname}")
                return None
            if not (isinstance(attrs, list) and attrs and all(isinstance(a, str) for a in attrs)):
                self.error(f"{sp}/attributes", "type", "expected a non-empty list of attribute names")
                return None
            known = dict(tables[tname].attributes)
            for a in attrs:
                if a not in known:
                    self.error(f"{sp}/attributes", "unknown-attribute",
                               f"unknown attribute {tname}.{a}")
                    return None
            ends.append((tname, tuple(attrs)))
        card = c.get("cardinality", "many-one")
        if card not in CARDINALITIES:
            self.error(f"{p}/cardinality", "bad-cardinality", f"unknown cardinality {card!r}")
            return None
        (s, x), (t, y) = ends
        if len(x) != len(y):
            self.error(p, "fk-arity", f"foreign key {name}: attribute lists differ in length")
            return None
        sd, td = dict(tables[s].attributes), dict(tables[t].attributes)
        for a, b in zip(x, y):
            if not sd[a].compatible(td[b]):
                self.error(p, "fk-domain", f"foreign key {name}: {s}.{a} and {t}.{b} have "
                                           "incompatible domains")
                return None
        if name is None:
            return None
        return ForeignKey(name, s, x, t, y, card)

    def schema(self, raw: Any) -> SchemaBlock:
        raw = self.obj(raw, "/schema", "schema")
        if raw is None:
            return SchemaBlock()
        self.known(raw, ("tables", "foreign_keys"), "/schema")
        tables: dict[str, TableDecl] = {}
        for i, t in enumerate(raw.get("tables", []) or []):
            decl = self.table(t, f"/schema/tables/{i}")
            if decl is None:
                continue
            if decl.name in tables:
                self.error(f"/schema/tables/{i}", "duplicate-name", f"table {decl.name} declared twice")
                continue
            tables[decl.name] = decl
        fks: dict[str, ForeignKey] = {}
        for i, c in enumerate(raw.get("foreign_keys", []) or []):
            fk = self.foreign_key(c, f"/schema/foreign_keys/{i}", tables)
            if fk is None:
                continue
            if fk.name in fks or fk.name in tables:
                self.error(f"/schema/foreign_keys/{i}", "duplicate-name", f"name {fk.name} already used")
                continue
            fks[fk.name] = fk
        return SchemaBlock(tuple(tables.values()), tuple(fks.values()))

    # -- scales --
    def scale(self, s: Any, p: str) -> ScaleSpec | None:
        s = self.obj(s, p, "scale")
        if s is None:
            return None
        self.known(s, ("name", "kind", "domain", "range"), p)
        name = self.name(s, p, "scale")
        kind = s.get("kind")
        if kind not in SCALE_KINDS:
            self.error(f"{p}/kind", "unknown-scale-kind", f"unknown scale kind {kind!r}")
            return None
        domain = s.get("domain")
        rng = s.get("range")
        ok = True
        if domain is not None:
            if not isinstance(domain, list) or not domain:
                self.error(f"{p}/domain", "bad-domain", "domain must be a non-empty list")
                ok = False
            elif kind == "linear" and not (len(domain) == 2 and all(_is_number(v) for v in domain)
                                           and domain[0] <= domain[1]):
                self.error(f"{p}/domain", "bad-domain", "linear domain must be [min, max] numbers")
                ok = False
            elif kind != "linear" and len(set(map(json.dumps, domain))) != len(domain):
                self.error(f"{p}/domain", "bad-domain", "ordinal domain has duplicate values")
                ok = False
        if rng is not None:
            numeric = isinstance(rng, list) and len(rng) == 2 and all(_is_number(v) for v in rng)
            categories = (isinstance(rng, list) and rng and kind == "ordinal"
                          and all(isinstance(v, str) for v in rng))
            if not (numeric or categories):
                self.error(f"{p}/range", "bad-range",
                           "range must be a [lo, hi] pixel interval or, for ordinal scales, "
                           "a list of categories")
                ok = False
        if name is None or not ok:
            return None
        return ScaleSpec(name, kind, tuple(domain) if domain is not None else None,
                         tuple(rng) if rng is not None else None)

    # -- views --
    def channel(self, v: Any, p: str, types: dict[str, str] | None, ctx: dict) -> ChannelValue | None:
        if isinstance(v, str):
            v = {"expr": v}
        elif _is_number(v):
            v = {"value": v}
        if not isinstance(v, dict):
            self.error(p, "bad-channel", "channel value must be an object, expression string or number")
            return None
        forms = [k for k in ("expr", "value", "ref", "auto") if k in v]
        if len(forms) != 1:
            self.error(p, "bad-channel", "channel needs exactly one of expr, value, ref, auto")
            return None
        form = forms[0]
        if form == "value":
            self.known(v, ("value",), p)
            val = v["value"]
            if not (_is_number(val) or isinstance(val, (str, bool))):
                self.error(p, "bad-channel", "constant must be a number, string or boolean")
                return None
            return Constant(val)
        if form == "auto":
            self.known(v, ("auto",), p)
            if v["auto"] is not True:
                self.error(p, "bad-channel", "auto must be true")
                return None
            return Auto()
        if form == "expr":
            self.known(v, ("expr", "scale"), p)
            e = self.expression(v["expr"], f"{p}/expr", types)
            scale = v.get("scale")
            if scale is not None and scale not in ctx["scales"]:
                self.error(f"{p}/scale", "unknown-scale", f"unknown scale {scale}")
                return None
            return None if e is None else AttributeMap(e, scale)
        self.known(v, ("ref", "key", "via", "prop"), p)
        target = v["ref"]
        if target not in ctx["views"]:
            self.error(f"{p}/ref", "unknown-view", f"unknown view {target}")
            return None
        prop = v.get("prop", ctx["channel"])
        prop = CHANNEL_ALIASES.get(prop, prop)
        if prop not in CHANNELS:
            self.error(f"{p}/prop", "unknown-channel", f"unknown mark property {prop}")
            return None
        if ("key" in v) == ("via" in v):
            self.error(p, "bad-ref", "a foreign reference needs exactly one of key, via")
            return None
        if "via" in v:
            via = v["via"]
            fk = ctx["fks"].get(via)
            if fk is None:
                self.error(f"{p}/via", "unknown-constraint", f"unknown foreign key {via}")
                return None
            return ForeignRef(target, prop, via=via)
        key = self.expression(v["key"], f"{p}/key", types)
        return None if key is None else ForeignRef(target, prop, key=key)

    def expression(self, text: Any, p: str, types: dict[str, str] | None) -> ex.Expr | None:
        if not isinstance(text, str):
            self.error(p, "type", "expression must be a string")
            return None
        try:
            e = ex.parse_expr(text)
        except ex.ExprSyntaxError as exc:
            self.error(p, "expr-syntax", f"{exc} (offset {exc.offset})")
            return None
        if types is not None:
            try:
                ex.infer_type(e, types)
            except ex.ExprTypeError as exc:
                rule = "unknown-attribute" if "unknown attribute" in str(exc) else "type-error"
                self.error(p, rule, str(exc))
                return None
        return e

    def view(self, v: Any, p: str, ctx: dict) -> ViewSpec | None:
        v = self.obj(v, p, "view")
        if v is None:
            return None
        self.known(v, ("name", "source", "mark", "channels", "frame", "k_per_row"), p)
        name = self.name(v, p, "view")
        source = v.get("source")
        cols = source_columns(ctx["schemas"], ctx["fks"], source) if isinstance(source, str) else None
        types = None
        if cols is None:
            self.error(f"{p}/source", "unknown-table", f"unknown table {source}")
        else:
            types = {c.name: c.domain.kind for c in cols}
        mark = v.get("mark")
        if mark not in MARKS:
            self.error(f"{p}/mark", "unknown-mark", f"unknown mark type {mark!r}")
        raw = v.get("channels", {})
        if not isinstance(raw, dict):
            self.error(f"{p}/channels", "type", "channels must be an object")
            raw = {}
        channels: dict[str, ChannelValue] = {}
        for key, value in raw.items():
            cp = f"{p}/channels/{_esc(key)}"
            ch = CHANNEL_ALIASES.get(key, key)
            if ch not in CHANNELS:
                self.error(cp, "unknown-channel", f"unknown channel {key}", key=True)
                continue
            if ch in channels:
                self.error(cp, "duplicate-channel", f"channel {ch} given twice", key=True)
                continue
            cv = self.channel(value, cp, types, dict(ctx, channel=ch))
            if cv is None:
                continue
            if isinstance(cv, Auto) and ch not in AUTO_CHANNELS:
                self.error(cp, "auto-channel", f"auto() is only allowed on spatial extent channels "
                                               f"{', '.join(AUTO_CHANNELS)}, not {ch}")
                continue
            channels[ch] = cv
        if "id" not in channels and cols is not None:
            base = base_table(ctx["fks"], source)
            pk = ctx["pks"].get(base)
            if pk is not None and len(pk) == 1:
                channels["id"] = AttributeMap(ex.Attr(pk[0]))
        if mark in REQUIRED_CHANNELS:
            for ch in REQUIRED_CHANNELS[mark]:
                if ch not in channels:
                    self.error(f"{p}/channels", "missing-channel", f"{mark} marks need channel {ch}")
        frame = None
        if "frame" in v:
            fp = f"{p}/frame"
            f = self.obj(v["frame"], fp, "frame")
            if f is not None:
                self.known(f, ("x", "y", "width", "height"), fp)
                vals = [f.get(k, 0) for k in ("x", "y")] + [f.get(k) for k in ("width", "height")]
                if not all(_is_number(x) for x in vals) or vals[2] <= 0 or vals[3] <= 0:
                    self.error(fp, "bad-frame", "frame needs numeric x, y and positive width, height")
                else:
                    frame = Frame(*vals)
        k = v.get("k_per_row")
        if k is not None and not (isinstance(k, int) and not isinstance(k, bool) and k > 0):
            self.error(f"{p}/k_per_row", "type", "k_per_row must be a positive integer")
            k = None
        if name is None or cols is None or mark not in MARKS:
            return None
        return ViewSpec(name, source, mark, channels, frame, k, pos=self.pos(p))

    # -- constraint mappings --
    def mapping(self, m: Any, p: str, ctx: dict, views: dict[str, ViewSpec]) -> ConstraintMappingSpec | None:
        m = self.obj(m, p, "constraint mapping")
        if m is None:
            return None
        method = m.get("method")
        cname = m.get("constraint")
        fk = ctx["fks"].get(cname)
        if fk is None:
            self.error(f"{p}/constraint", "unknown-constraint", f"unknown foreign key {cname}")
        if method == "explicit":
            self.known(m, ("constraint", "method", "view"), p)
            vname = m.get("view")
            view = views.get(vname)
            if view is None:
                self.error(f"{p}/view", "unknown-view", f"unknown view {vname}")
                return None
            if fk is None:
                return None
            # one link view may serve several constraints (parallel coordinates),
            # so only demand that some reference lands on this constraint's endpoints
            targets = {base_table(ctx["fks"], views[cv.view].source)
                       for cv in view.channels.values()
                       if isinstance(cv, ForeignRef) and cv.view in views}
            if targets and not targets & {fk.source, fk.target}:
                self.error(f"{p}/view", "explicit-endpoint",
                           f"view {vname} references no view that draws an endpoint of {cname}")
                return None
            return ExplicitView(cname, vname)
        if method == "nest":
            self.known(m, ("constraint", "method", "child", "parent"), p)
            child, parent = m.get("child"), m.get("parent")
            bad = False
            for role, vn in (("child", child), ("parent", parent)):
                if vn not in views:
                    self.error(f"{p}/{role}", "unknown-view", f"unknown view {vn}")
                    bad = True
            if bad or fk is None:
                return None
            if fk.cardinality != "many-one":
                self.error(p, "nest-cardinality",
                           f"nesting needs a many-one foreign key, {cname} is {fk.cardinality}")
                return None
            if views[child].source != fk.source or views[parent].source != fk.target:
                self.error(p, "nest-cardinality",
                           f"nest {child} in {parent} must draw {fk.source} inside marks of {fk.target}")
                return None
            if views[parent].mark not in RECT_MARKS:
                self.error(f"{p}/parent", "nest-parent", f"parent view {parent} must use an area mark")
                return None
            return Nest(cname, child, parent)
        if method == "shared_scale":
            self.known(m, ("constraint", "method", "scale", "level", "views"), p)
            level = m.get("level", 0)
            if not (isinstance(level, int) and not isinstance(level, bool) and 0 <= level <= MAX_LEVEL):
                self.error(f"{p}/level", "bad-level", f"level must be an integer 0..{MAX_LEVEL}")
                return None
            scale = m.get("scale")
            if scale is not None and scale not in ctx["scales"]:
                self.error(f"{p}/scale", "unknown-scale", f"unknown scale {scale}")
                return None
            vs = m.get("views")
            if vs is not None:
                if not (isinstance(vs, list) and len(vs) == 2 and all(x in views for x in vs)):
                    self.error(f"{p}/views", "unknown-view", "views must name two existing views")
                    return None
                vs = tuple(vs)
            return None if fk is None else SharedScale(cname, level, scale, vs)
        self.error(f"{p}/method", "unknown-method", f"unknown constraint mapping method {method!r}")
        return None

    def document(self) -> SpecDocument | None:
        try:
            raw = json.loads(self.text)
        except json.JSONDecodeError as exc:
            self.diags.append(Diagnostic(exc.lineno, exc.colno, "syntax", exc.msg))
            return None
        self.smap = _source_map(self.text)
        raw = self.obj(raw, "", "specification")
        if raw is None:
            return None
        self.known(raw, ("schema", "scales", "views", "constraint_mappings", "canvas", "options"), "")
        schema = self.schema(raw.get("schema", {}))
        scales: dict[str, ScaleSpec] = {}
        for i, s in enumerate(raw.get("scales", []) or []):
            sc = self.scale(s, f"/scales/{i}")
            if sc is None:
                continue
            if sc.name in scales:
                self.error(f"/scales/{i}", "duplicate-name", f"scale {sc.name} declared twice")
                continue
            scales[sc.name] = sc
        raw_views = raw.get("views", []) or []
        if not isinstance(raw_views, list):
            self.error("/views", "type", "views must be a list")
            raw_views = []
        view_names = {v.get("name") for v in raw_views if isinstance(v, dict)}
        ctx = {
            "schemas": {t.name: t.attributes for t in schema.tables},
            "pks": {t.name: t.primary_key for t in schema.tables},
            "fks": {c.name: c for c in schema.foreign_keys},
            "scales": scales,
            "views": view_names,
        }
        views: dict[str, ViewSpec] = {}
        for i, v in enumerate(raw_views):
            vs = self.view(v, f"/views/{i}", ctx)
            if vs is None:
                continue
            if vs.name in views:
                self.error(f"/views/{i}", "duplicate-name", f"view {vs.name} declared twice")
                continue
            views[vs.name] = vs
        for v in views.values():
            for ch, cv in v.channels.items():
                if isinstance(cv, ForeignRef) and cv.via is not None and cv.view in views:
                    fk = ctx["fks"][cv.via]
                    here = base_table(ctx["fks"], v.source)
                    there = base_table(ctx["fks"], views[cv.view].source)
                    if {here, there} != {fk.source, fk.target}:
                        line, col = v.pos
                        self.diags.append(Diagnostic(
                            line, col, "bad-ref",
                            f"view {v.name} channel {ch}: {cv.via} does not connect "
                            f"{here} and {there}"))
        mappings = []
        for i, m in enumerate(raw.get("constraint_mappings", []) or []):
            cm = self.mapping(m, f"/constraint_mappings/{i}", ctx, views)
            if cm is not None:
                mappings.append(cm)
        width, height = 400, 300
        if "canvas" in raw:
            c = self.obj(raw["canvas"], "/canvas", "canvas")
            if c is not None:
                self.known(c, ("width", "height"), "/canvas")
                width, height = c.get("width", width), c.get("height", height)
                if not (_is_number(width) and _is_number(height) and width > 0 and height > 0):
                    self.error("/canvas", "bad-canvas", "canvas width and height must be positive numbers")
                    width, height = 400, 300
        options = self.options(raw.get("options", {}), set(views))
        if self.diags:
            return None
        return SpecDocument(schema, tuple(scales.values()), tuple(views.values()), tuple(mappings),
                            width, height, options)

    def options(self, raw: Any, views: set[str]) -> Options:
        raw = self.obj(raw, "/options", "options")
        if raw is None:
            return Options()
        self.known(raw, ("epsilon", "proximity_px", "jitter"), "/options")
        eps = raw.get("epsilon", 0.5)
        if not (_is_number(eps) and eps >= 0):
            self.error("/options/epsilon", "bad-option", "epsilon must be a non-negative number")
            eps = 0.5
        prox = raw.get("proximity_px")
        if prox is not None and not (_is_number(prox) and prox >= 0):
            self.error("/options/proximity_px", "bad-option", "proximity_px must be non-negative")
            prox = None
        j = raw.get("jitter", {})
        if not isinstance(j, dict):
            self.error("/options/jitter", "type", "jitter must be an object")
            j = {}
        self.known(j, ("magnitude", "seed", "views"), "/options/jitter")
        mag, seed, jv = j.get("magnitude", 0.0), j.get("seed", 0), j.get("views", [])
        if not (_is_number(mag) and mag >= 0):
            self.error("/options/jitter/magnitude", "bad-option", "magnitude must be non-negative")
            mag = 0.0
        if not (isinstance(seed, int) and not isinstance(seed, bool)):
            self.error("/options/jitter/seed", "bad-option", "seed must be an integer")
            seed = 0
        if not (isinstance(jv, list) and all(v in views for v in jv)):
            self.error("/options/jitter/views", "unknown-view", "jitter views must name existing views")
            jv = []
        return Options(eps, prox, mag, seed, tuple(jv))


def parse_spec(text: bytes | str, filename: str = "<spec>") -> SpecDocument:
    """Parse and validate a specification; raises :class:`SpecError` with
    every diagnostic found."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SpecError([Diagnostic(1, exc.start + 1, "encoding", "file is not UTF-8")], filename)
    p = _Parser(text)
    doc = p.document()
    if doc is None:
        raise SpecError(p.diags, filename)
    return doc


# --- serialization ---------------------------------------------------------

def _domain_json(name: str, d: AttributeDomain) -> dict:
    out: dict[str, Any] = {"name": name, "type": d.kind}
    if d.interval is not None:
        out["interval"] = list(d.interval)
    if d.categories is not None:
        out["categories"] = list(d.categories)
    return out


def _channel_json(cv: ChannelValue) -> dict:
    if isinstance(cv, AttributeMap):
        out: dict[str, Any] = {"expr": ex.to_source(cv.expr)}
        if cv.scale is not None:
            out["scale"] = cv.scale
        return out
    if isinstance(cv, Constant):
        return {"value": cv.value}
    if isinstance(cv, Auto):
        return {"auto": True}
    out = {"ref": cv.view, "prop": cv.prop}
    if cv.via is not None:
        out["via"] = cv.via
    else:
        out["key"] = ex.to_source(cv.key)
    return out


def _mapping_json(m: ConstraintMappingSpec) -> dict:
    if isinstance(m, ExplicitView):
        return {"constraint": m.constraint, "method": "explicit", "view": m.view}
    if isinstance(m, Nest):
        return {"constraint": m.constraint, "method": "nest", "child": m.child, "parent": m.parent}
    out: dict[str, Any] = {"constraint": m.constraint, "method": "shared_scale", "level": m.level}
    if m.scale is not None:
        out["scale"] = m.scale
    if m.views is not None:
        out["views"] = list(m.views)
    return out


def to_json(doc: SpecDocument) -> dict:
    tables = []
    for t in doc.schema.tables:
        entry: dict[str, Any] = {
            "name": t.name,
            "attributes": [_domain_json(n, d) for n, d in t.attributes],
            "keys": [list(k) for k in t.keys],
            "primary_key": list(t.primary_key) if t.primary_key is not None else None,
        }
        if t.file is not None:
            entry["file"] = t.file
        tables.append(entry)
    fks = [{"name": c.name, "cardinality": c.cardinality,
            "source": {"table": c.source, "attributes": list(c.source_attrs)},
            "target": {"table": c.target, "attributes": list(c.target_attrs)}}
           for c in doc.schema.foreign_keys]
    scales = []
    for s in doc.scales:
        entry = {"name": s.name, "kind": s.kind}
        if s.domain is not None:
            entry["domain"] = list(s.domain)
        if s.range is not None:
            entry["range"] = list(s.range)
        scales.append(entry)
    views = []
    for v in doc.views:
        entry = {"name": v.name, "source": v.source, "mark": v.mark,
                 "channels": {ch: _channel_json(cv) for ch, cv in v.channels.items()}}
        if v.frame is not None:
            entry["frame"] = {"x": v.frame.x, "y": v.frame.y,
                              "width": v.frame.width, "height": v.frame.height}
        if v.k_per_row is not None:
            entry["k_per_row"] = v.k_per_row
        views.append(entry)
    o = doc.options
    options: dict[str, Any] = {"epsilon": o.epsilon,
                               "jitter": {"magnitude": o.jitter_magnitude, "seed": o.jitter_seed,
                                          "views": list(o.jitter_views)}}
    if o.proximity_px is not None:
        options["proximity_px"] = o.proximity_px
    return {
        "schema": {"tables": tables, "foreign_keys": fks},
        "scales": scales,
        "views": views,
        "constraint_mappings": [_mapping_json(m) for m in doc.constraint_mappings],
        "canvas": {"width": doc.width, "height": doc.height},
        "options": options,
    }


def serialize_spec(doc: SpecDocument) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(to_json(doc), sort_keys=True, indent=2, ensure_ascii=False,
                      allow_nan=False)
    return (text + "\n").encode("utf-8")
