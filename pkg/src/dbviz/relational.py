"""In-memory relational engine: tables, keys, foreign keys and the
transformation operators (join, projection, selection, decompositions)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .expr import (BOOLEAN, INTEGER, NUMERIC, REAL, TEXT, Attr, DataError, Expr,
                   as_expr, evaluate, infer_type)

KINDS = (INTEGER, REAL, TEXT, BOOLEAN)
CARDINALITIES = ("one-one", "many-one", "many-many-link")


class SchemaError(ValueError):
    """Structural problem: unknown table or attribute, malformed schema."""


class DomainError(TypeError):
    """Attribute domains are incompatible for the requested operation."""


class LossyDecomposition(ValueError):
    def __init__(self, message: str, witness: tuple | None = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class AttributeDomain:
    kind: str
    interval: tuple[float, float] | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown attribute type {self.kind!r}")
        if self.interval is not None:
            if self.kind not in NUMERIC:
                raise SchemaError("an interval is only allowed on integer/real attributes")
            lo, hi = self.interval
            if lo > hi:
                raise SchemaError(f"empty interval [{lo}, {hi}]")
            object.__setattr__(self, "interval", (lo, hi))
        if self.categories is not None:
            if self.kind != TEXT:
                raise SchemaError("categories are only allowed on text attributes")
            cats = tuple(self.categories)
            if not cats:
                raise SchemaError("category set must be non-empty")
            if len(set(cats)) != len(cats):
                raise SchemaError("category set contains duplicates")
            object.__setattr__(self, "categories", cats)

    def contains(self, value: Any) -> bool:
        if self.kind == BOOLEAN:
            return isinstance(value, bool)
        if isinstance(value, bool):
            return False
        if self.kind == INTEGER and not isinstance(value, int):
            return False
        if self.kind == REAL and not isinstance(value, (int, float)):
            return False
        if self.kind == TEXT:
            if not isinstance(value, str):
                return False
            return self.categories is None or value in self.categories
        if self.interval is not None:
            lo, hi = self.interval
            return lo <= value <= hi
        return True

    def coerce(self, raw: Any) -> Any:
        """Parse *raw* (usually a string from a data file) into this domain."""
        if raw is None or raw == "":
            raise ValueError("missing value")
        if self.kind == INTEGER:
            value = raw if isinstance(raw, int) and not isinstance(raw, bool) else int(str(raw).strip())
        elif self.kind == REAL:
            value = float(raw) if not isinstance(raw, bool) else None
            if value is None:
                raise ValueError(f"not a number: {raw!r}")
        elif self.kind == BOOLEAN:
            if isinstance(raw, bool):
                value = raw
            elif str(raw).strip().lower() in ("true", "1"):
                value = True
            elif str(raw).strip().lower() in ("false", "0"):
                value = False
            else:
                raise ValueError(f"not a boolean: {raw!r}")
        else:
            value = raw if isinstance(raw, str) else str(raw)
        if not self.contains(value):
            raise ValueError(f"{value!r} is outside the {self.describe()} domain")
        return value

    def compatible(self, other: "AttributeDomain") -> bool:
        if self.kind in NUMERIC and other.kind in NUMERIC:
            return True
        return self.kind == other.kind

    def describe(self) -> str:
        if self.interval:
            return f"{self.kind}[{self.interval[0]}, {self.interval[1]}]"
        if self.categories:
            return f"{self.kind}{{{', '.join(self.categories)}}}"
        return self.kind


@dataclass(frozen=True)
class Table:
    name: str
    schema: tuple[tuple[str, AttributeDomain], ...]
    rows: tuple[tuple, ...] = ()
    keys: tuple[tuple[str, ...], ...] = ()
    primary_key: tuple[str, ...] | None = None

    def __post_init__(self):
        schema = tuple((n, d) for n, d in self.schema)
        names = [n for n, _ in schema]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names in table {self.name}")
        rows = tuple(tuple(r) for r in self.rows)
        for i, row in enumerate(rows):
            if len(row) != len(schema):
                raise SchemaError(
                    f"{self.name} row {i} has {len(row)} values, schema has {len(schema)}")
            for value, (attr, dom) in zip(row, schema):
                if not dom.contains(value):
                    raise SchemaError(
                        f"{self.name} row {i}: {value!r} not in domain of {attr} ({dom.describe()})")
        keys = tuple(tuple(k) for k in self.keys)
        pk = tuple(self.primary_key) if self.primary_key is not None else None
        if pk is not None and pk not in keys:
            keys = (pk,) + keys
        for k in keys:
            if not k:
                raise SchemaError(f"empty key on table {self.name}")
            for a in k:
                if a not in names:
                    raise SchemaError(f"key attribute {a} is not in table {self.name}")
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "primary_key", pk)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.schema)

    def index(self, attr: str) -> int:
        try:
            return self.attributes.index(attr)
        except ValueError:
            raise SchemaError(f"table {self.name} has no attribute {attr}") from None

    def domain(self, attr: str) -> AttributeDomain:
        return self.schema[self.index(attr)][1]

    def column(self, attr: str) -> list:
        i = self.index(attr)
        return [r[i] for r in self.rows]

    def values(self, row: tuple, attrs: Sequence[str]) -> tuple:
        return tuple(row[self.index(a)] for a in attrs)

    def row_dict(self, row: tuple) -> dict[str, Any]:
        return dict(zip(self.attributes, row))

    def back_key(self, i: int) -> Any:
        """Primary-key value of row *i* (scalar for single-attribute keys); the
        row index when the table has no primary key."""
        if not self.primary_key:
            return i
        vals = self.values(self.rows[i], self.primary_key)
        return vals[0] if len(vals) == 1 else vals

    def types(self) -> dict[str, str]:
        return {n: d.kind for n, d in self.schema}

    def is_declared_key(self, attrs: Iterable[str]) -> bool:
        s = set(attrs)
        return any(set(k) <= s for k in self.keys)

    def holds_key(self, attrs: Sequence[str]) -> bool:
        """True when no two current rows agree on *attrs*."""
        seen = set()
        for r in self.rows:
            v = self.values(r, attrs)
            if v in seen:
                return False
            seen.add(v)
        return True

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ForeignKey:
    name: str
    source: str
    source_attrs: tuple[str, ...]
    target: str
    target_attrs: tuple[str, ...]
    cardinality: str = "many-one"

    def __post_init__(self):
        object.__setattr__(self, "source_attrs", tuple(self.source_attrs))
        object.__setattr__(self, "target_attrs", tuple(self.target_attrs))
        if self.cardinality not in CARDINALITIES:
            raise SchemaError(f"unknown cardinality {self.cardinality!r}")
        if len(self.source_attrs) != len(self.target_attrs) or not self.source_attrs:
            raise SchemaError(
                f"foreign key {self.name}: source and target attribute lists differ in length")


@dataclass(frozen=True)
class Database:
    tables: Mapping[str, Table]
    constraints: tuple[ForeignKey, ...] = ()

    def __post_init__(self):
        tables = dict(self.tables)
        constraints = tuple(self.constraints)
        for name, t in tables.items():
            if name != t.name:
                raise SchemaError(f"table registered as {name} is named {t.name}")
        names = [c.name for c in constraints]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate foreign key names")
        for c in constraints:
            for tname, attrs in ((c.source, c.source_attrs), (c.target, c.target_attrs)):
                if tname not in tables:
                    raise SchemaError(f"foreign key {c.name} refers to unknown table {tname}")
                for a in attrs:
                    if a not in tables[tname].attributes:
                        raise SchemaError(
                            f"foreign key {c.name} refers to unknown attribute {tname}.{a}")
            src, tgt = tables[c.source], tables[c.target]
            for x, y in zip(c.source_attrs, c.target_attrs):
                if not src.domain(x).compatible(tgt.domain(y)):
                    raise DomainError(
                        f"foreign key {c.name}: {c.source}.{x} and {c.target}.{y} have "
                        "incompatible domains")
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "constraints", constraints)

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise SchemaError(f"unknown table {name}") from None

    def constraint(self, name: str) -> ForeignKey:
        for c in self.constraints:
            if c.name == name:
                return c
        raise SchemaError(f"unknown foreign key {name}")


@dataclass(frozen=True)
class Violation:
    kind: str  # "key" | "foreign-key" | "cardinality"
    table: str
    rows: tuple[int, ...]
    message: str
    constraint: str | None = None


def validate_database(db: Database) -> list[Violation]:
    """Every key, foreign-key and cardinality violation in *db*."""
    out: list[Violation] = []
    for t in db.tables.values():
        for key in t.keys:
            groups: dict[tuple, list[int]] = {}
            for i, r in enumerate(t.rows):
                groups.setdefault(t.values(r, key), []).append(i)
            for val, idx in groups.items():
                if len(idx) > 1:
                    out.append(Violation(
                        "key", t.name, tuple(idx),
                        f"{t.name} rows {idx} share key ({', '.join(key)})={val}"))
    for c in db.constraints:
        src, tgt = db.table(c.source), db.table(c.target)
        targets = Counter(tgt.values(r, c.target_attrs) for r in tgt.rows)
        for i, r in enumerate(src.rows):
            val = src.values(r, c.source_attrs)
            if val not in targets:
                out.append(Violation(
                    "foreign-key", src.name, (i,),
                    f"{c.name}: {src.name} row {i} references {val} absent from "
                    f"{tgt.name}({', '.join(c.target_attrs)})", c.name))
        dup_targets = sorted(
            (i for i, r in enumerate(tgt.rows) if targets[tgt.values(r, c.target_attrs)] > 1))
        if dup_targets:
            out.append(Violation(
                "cardinality", tgt.name, tuple(dup_targets),
                f"{c.name} is {c.cardinality} but {tgt.name}({', '.join(c.target_attrs)}) "
                "is not a key", c.name))
        if c.cardinality == "one-one":
            sources = Counter(src.values(r, c.source_attrs) for r in src.rows)
            dups = tuple(i for i, r in enumerate(src.rows)
                         if sources[src.values(r, c.source_attrs)] > 1)
            if dups:
                out.append(Violation(
                    "cardinality", src.name, dups,
                    f"{c.name} is one-one but {src.name}({', '.join(c.source_attrs)}) "
                    "is not a key", c.name))
    return out


# --- operators -------------------------------------------------------------

def join(r: Table, s: Table, on: Sequence[str], name: str | None = None) -> Table:
    """Equi-join with bag semantics; join attributes appear once."""
    on = tuple(on)
    for a in on:
        if not r.domain(a).compatible(s.domain(a)):
            raise DomainError(f"join attribute {a} has incompatible domains")
    rest = [a for a in s.attributes if a not in on]
    out_names = [(a if a not in r.attributes else f"{s.name}.{a}") for a in rest]
    schema = list(r.schema) + [(n, s.domain(a)) for n, a in zip(out_names, rest)]
    index: dict[tuple, list[tuple]] = {}
    for row in s.rows:
        index.setdefault(s.values(row, on), []).append(row)
    rest_idx = [s.index(a) for a in rest]
    rows = []
    for row in r.rows:
        for match in index.get(r.values(row, on), ()):
            rows.append(row + tuple(match[i] for i in rest_idx))
    return Table(name or f"{r.name}_{s.name}", tuple(schema), tuple(rows))


def _domain_for(expr: Expr, t: Table) -> AttributeDomain:
    if isinstance(expr, Attr):
        return t.domain(expr.qualified)
    return AttributeDomain(infer_type(expr, t.types()))


def project(t: Table, exprs: Sequence[tuple[Expr | str, str]], name: str | None = None) -> Table:
    """One output row per input row; a key survives when all of its
    attributes are carried over unmodified."""
    parsed = [(as_expr(e), n) for e, n in exprs]
    names = [n for _, n in parsed]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate output names in projection")
    schema = tuple((n, _domain_for(e, t)) for e, n in parsed)
    rows = []
    for i, row in enumerate(t.rows):
        env = t.row_dict(row)
        try:
            rows.append(tuple(evaluate(e, env) for e, _ in parsed))
        except DataError as exc:
            raise DataError(f"{t.name} row {i}: {exc}") from None
    renamed = {e.name: n for e, n in parsed if isinstance(e, Attr) and e.table is None}

    def carry(key):
        if key and all(a in renamed for a in key):
            return tuple(renamed[a] for a in key)
        return None

    keys = tuple(k for k in (carry(k) for k in t.keys) if k)
    pk = carry(t.primary_key) if t.primary_key else None
    return Table(name or t.name, schema, tuple(rows), keys, pk)


def select(t: Table, predicate: Expr | str) -> Table:
    """Rows satisfying *predicate*; schema and keys unchanged."""
    p = as_expr(predicate)
    if infer_type(p, t.types()) != BOOLEAN:
        raise DomainError("filter predicate must be boolean")
    rows = []
    for i, row in enumerate(t.rows):
        try:
            if evaluate(p, t.row_dict(row)):
                rows.append(row)
        except DataError as exc:
            raise DataError(f"{t.name} row {i}: {exc}") from None
    return Table(t.name, t.schema, tuple(rows), t.keys, t.primary_key)


def distinct(t: Table) -> Table:
    return Table(t.name, t.schema, tuple(dict.fromkeys(t.rows)), t.keys, t.primary_key)


def _project_attrs(t: Table, attrs: Sequence[str], name: str) -> Table:
    idx = [t.index(a) for a in attrs]
    rows = tuple(dict.fromkeys(tuple(r[i] for i in idx) for r in t.rows))
    keys = tuple(k for k in t.keys if set(k) <= set(attrs))
    pk = t.primary_key if t.primary_key and set(t.primary_key) <= set(attrs) else None
    return Table(name, tuple((a, t.domain(a)) for a in attrs), rows, keys, pk)


def decompose_lossless(t: Table, attrs_r: Sequence[str], attrs_s: Sequence[str],
                       names: tuple[str, str] | None = None) -> tuple[Table, Table]:
    """Split *t* into two deduplicated projections sharing the attributes
    ``attrs_r & attrs_s``; refuse unless the shared attributes are a key of
    one side, which guarantees that joining the parts gives back *t*."""
    attrs_r = tuple(dict.fromkeys(attrs_r))
    attrs_s = tuple(dict.fromkeys(attrs_s))
    for a in attrs_r + attrs_s:
        t.index(a)
    if set(attrs_r) | set(attrs_s) != set(t.attributes):
        raise SchemaError("decomposition must cover every attribute of the table")
    shared = tuple(a for a in t.attributes if a in attrs_r and a in attrs_s)
    rname, sname = names or (f"{t.name}_R", f"{t.name}_S")
    r = _project_attrs(t, attrs_r, rname)
    s = _project_attrs(t, attrs_s, sname)
    dupes = [row for row, n in Counter(t.rows).items() if n > 1]
    if dupes:
        raise LossyDecomposition(
            f"{t.name} contains duplicate rows; deduplicated parts cannot restore them",
            dupes[0])
    if not shared or not (r.holds_key(shared) or s.holds_key(shared)):
        witness = _spurious_witness(t, r, s, shared)
        raise LossyDecomposition(
            f"shared attributes ({', '.join(shared) or 'none'}) are not a key of "
            f"{rname} or {sname}", witness)
    if shared:
        if r.holds_key(shared) and shared not in r.keys:
            r = Table(r.name, r.schema, r.rows, r.keys + (shared,), r.primary_key)
        if s.holds_key(shared) and shared not in s.keys:
            s = Table(s.name, s.schema, s.rows, s.keys + (shared,), s.primary_key)
    back = _reorder(join(r, s, shared), t.attributes)
    if Counter(back) != Counter(t.rows):
        raise AssertionError("lossless decomposition failed its join-back check")
    return r, s


def _reorder(joined: Table, attrs: Sequence[str]) -> list[tuple]:
    idx = [joined.index(a) for a in attrs]
    return [tuple(r[i] for i in idx) for r in joined.rows]


def _spurious_witness(t: Table, r: Table, s: Table, shared: tuple[str, ...]) -> tuple | None:
    original = set(t.rows)
    for row in _reorder(join(r, s, shared), t.attributes):
        if row not in original:
            return row
    return None


def decompose_dedup(t: Table, attrs: Sequence[str], *, group_name: str | None = None,
                    key: str = "gid", fk_name: str | None = None) -> tuple[Table, Table, ForeignKey]:
    """Move the distinct values of *attrs* into a group table with a dense
    surrogate key (0-based, first-appearance order) and replace them in *t*
    by a reference to that key."""
    attrs = tuple(dict.fromkeys(attrs))
    if not attrs:
        raise SchemaError("need at least one attribute to factor out")
    for a in attrs:
        t.index(a)
    if set(attrs) == set(t.attributes):
        raise SchemaError("cannot factor out every attribute: nothing would reference the groups")
    if key in t.attributes and key not in attrs:
        raise SchemaError(f"surrogate key name {key} already used in {t.name}")
    group_name = group_name or f"{t.name}_{'_'.join(attrs)}"
    ids: dict[tuple, int] = {}
    for row in t.rows:
        ids.setdefault(t.values(row, attrs), len(ids))
    key_domain = AttributeDomain(INTEGER, (0, max(len(ids) - 1, 0)))
    g = Table(group_name,
              ((key, key_domain),) + tuple((a, t.domain(a)) for a in attrs),
              tuple((i,) + vals for vals, i in ids.items()),
              primary_key=(key,))
    first = min(t.index(a) for a in attrs)
    schema = []
    for i, (n, d) in enumerate(t.schema):
        if i == first:
            schema.append((key, key_domain))
        if n not in attrs:
            schema.append((n, d))
    keep = [t.index(n) for n, _ in schema if n != key]
    rows = []
    for row in t.rows:
        gid = ids[t.values(row, attrs)]
        vals = [row[i] for i in keep]
        pos = next(j for j, (n, _) in enumerate(schema) if n == key)
        vals.insert(pos, gid)
        rows.append(tuple(vals))
    keys = tuple(k for k in t.keys if not set(k) & set(attrs))
    pk = t.primary_key if t.primary_key and not set(t.primary_key) & set(attrs) else None
    rest = Table(t.name, tuple(schema), tuple(rows), keys, pk)
    fk = ForeignKey(fk_name or f"{t.name}_{key}", t.name, (key,), group_name, (key,), "many-one")
    return g, rest, fk


# --- join paths ------------------------------------------------------------

@dataclass(frozen=True)
class Hop:
    constraint: str
    forward: bool  # True: source -> target of the foreign key
    start: str
    end: str


@dataclass(frozen=True)
class JoinPath:
    hops: tuple[Hop, ...] = ()

    def __len__(self) -> int:
        return len(self.hops)


@dataclass(frozen=True)
class Ambiguous:
    paths: tuple[JoinPath, ...] = field(default=())


def join_path(db: Database, start: str, end: str) -> JoinPath | Ambiguous | None:
    """The unique foreign-key chain from *start* to *end* along which every
    row determines a single row of the next table; ``Ambiguous`` when several
    chains exist and ``None`` when there is none."""
    db.table(start)
    db.table(end)
    if start == end:
        return JoinPath(())
    edges: dict[str, list[Hop]] = {}
    for c in db.constraints:
        if db.table(c.target).is_declared_key(c.target_attrs):
            edges.setdefault(c.source, []).append(Hop(c.name, True, c.source, c.target))
        if c.source != c.target and db.table(c.source).is_declared_key(c.source_attrs):
            edges.setdefault(c.target, []).append(Hop(c.name, False, c.target, c.source))
    found: list[JoinPath] = []

    def walk(node: str, seen: set[str], hops: list[Hop]):
        if node == end:
            found.append(JoinPath(tuple(hops)))
            return
        for hop in edges.get(node, ()):
            if hop.end in seen:
                continue
            seen.add(hop.end)
            hops.append(hop)
            walk(hop.end, seen, hops)
            hops.pop()
            seen.discard(hop.end)

    walk(start, {start}, [])
    if not found:
        return None
    if len(found) > 1:
        return Ambiguous(tuple(found))
    return found[0]
