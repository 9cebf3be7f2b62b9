"""Row environments for view sources.

A view draws either a table or a foreign key.  A foreign-key source
``C(S.X, T.Y)`` yields one row per related (S, T) pair; S attributes are
visible bare and as ``S.a``, T attributes as ``T.b`` (when T differs from S).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .relational import AttributeDomain, Database, ForeignKey


@dataclass(frozen=True)
class Column:
    name: str
    table: str
    attr: str
    side: str  # "source" or "target"
    domain: AttributeDomain


def source_columns(schemas: Mapping[str, Sequence[tuple[str, AttributeDomain]]],
                   fks: Mapping[str, ForeignKey], source: str) -> list[Column] | None:
    if source in schemas:
        cols = []
        for a, d in schemas[source]:
            cols.append(Column(a, source, a, "source", d))
            cols.append(Column(f"{source}.{a}", source, a, "source", d))
        return cols
    fk = fks.get(source)
    if fk is None or fk.source not in schemas or fk.target not in schemas:
        return None
    cols = []
    for a, d in schemas[fk.source]:
        cols.append(Column(a, fk.source, a, "source", d))
        cols.append(Column(f"{fk.source}.{a}", fk.source, a, "source", d))
    if fk.target != fk.source:
        for a, d in schemas[fk.target]:
            cols.append(Column(f"{fk.target}.{a}", fk.target, a, "target", d))
    return cols


def base_table(fks: Mapping[str, ForeignKey], source: str) -> str:
    """Table whose rows a view over *source* is in 1-1 correspondence with."""
    fk = fks.get(source)
    return fk.source if fk is not None else source


@dataclass(frozen=True)
class SourceRows:
    name: str
    table: str  # base table (foreign-key sources: the referencing table)
    columns: tuple[Column, ...]
    envs: tuple[dict, ...]
    back_keys: tuple[Any, ...]
    base_rows: tuple[int, ...]  # row index into the base table

    def types(self) -> dict[str, str]:
        return {c.name: c.domain.kind for c in self.columns}

    def __len__(self) -> int:
        return len(self.envs)


def build_source(db: Database, source: str) -> SourceRows:
    schemas = {n: t.schema for n, t in db.tables.items()}
    fks = {c.name: c for c in db.constraints}
    cols = source_columns(schemas, fks, source)
    if cols is None:
        raise KeyError(f"unknown view source {source}")
    if source in db.tables:
        t = db.tables[source]
        envs = []
        for row in t.rows:
            env = t.row_dict(row)
            env.update({f"{source}.{a}": v for a, v in zip(t.attributes, row)})
            envs.append(env)
        return SourceRows(source, source, tuple(cols), tuple(envs),
                          tuple(t.back_key(i) for i in range(len(t))), tuple(range(len(t))))
    fk = fks[source]
    s, t = db.table(fk.source), db.table(fk.target)
    index: dict[tuple, list[int]] = {}
    for j, row in enumerate(t.rows):
        index.setdefault(t.values(row, fk.target_attrs), []).append(j)
    pairs = [(i, j) for i, row in enumerate(s.rows)
             for j in index.get(s.values(row, fk.source_attrs), ())]
    unique = all(len(index.get(s.values(r, fk.source_attrs), ())) <= 1 for r in s.rows)
    envs, keys = [], []
    for i, j in pairs:
        env = s.row_dict(s.rows[i])
        env.update({f"{s.name}.{a}": v for a, v in zip(s.attributes, s.rows[i])})
        if t.name != s.name:
            env.update({f"{t.name}.{a}": v for a, v in zip(t.attributes, t.rows[j])})
        envs.append(env)
        keys.append(s.back_key(i) if unique else (s.back_key(i), t.back_key(j)))
    return SourceRows(source, s.name, tuple(cols), tuple(envs), tuple(keys),
                      tuple(i for i, _ in pairs))
