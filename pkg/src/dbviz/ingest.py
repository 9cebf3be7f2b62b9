"""Load table data files (CSV with header row, or a JSON array of flat
objects) against the schema block of a specification."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .relational import Database, Table
from .spec import SchemaBlock, TableDecl


class LoadError(OSError):
    def __init__(self, message: str, file: str | None = None, row: int | None = None,
                 column: str | None = None):
        where = ":".join(str(x) for x in (file, row) if x is not None)
        if column is not None:
            where = f"{where} column {column}" if where else f"column {column}"
        super().__init__(f"{where}: {message}" if where else message)
        self.file, self.row, self.column = file, row, column


def _find_file(decl: TableDecl, data_dir: Path) -> Path:
    if decl.file is not None:
        path = data_dir / decl.file
        if not path.is_file():
            raise LoadError("data file not found", str(path))
        return path
    for suffix in (".csv", ".json"):
        path = data_dir / f"{decl.name}{suffix}"
        if path.is_file():
            return path
    raise LoadError(f"no data file for table {decl.name} (tried {decl.name}.csv, {decl.name}.json)",
                    str(data_dir))


def _records(path: Path) -> tuple[list[str] | None, list[tuple[int, dict]]]:
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(f"invalid JSON: {exc.msg}", str(path), exc.lineno) from None
        if not isinstance(data, list) or not all(isinstance(r, dict) for r in data):
            raise LoadError("expected a JSON array of objects", str(path))
        for i, r in enumerate(data):
            for k, v in r.items():
                if isinstance(v, (dict, list)):
                    raise LoadError("nested values are not supported", str(path), i + 1, k)
        return None, list(enumerate(data, start=1))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, strict=True)
        try:
            header = reader.fieldnames
            rows = [(reader.line_num, dict(r)) for r in reader]
        except csv.Error as exc:
            raise LoadError(f"malformed CSV: {exc}", str(path), reader.line_num) from None
    if header is None:
        raise LoadError("missing header row", str(path))
    return list(header), rows


def load_table(decl: TableDecl, path: Path) -> Table:
    header, records = _records(path)
    names = [n for n, _ in decl.attributes]
    if header is not None:
        missing = [n for n in names if n not in header]
        if missing:
            raise LoadError(f"header lacks columns {', '.join(missing)}", str(path), 1)
    rows = []
    for line, rec in records:
        if None in rec:
            raise LoadError("row has more fields than the header", str(path), line)
        row = []
        for attr, dom in decl.attributes:
            if attr not in rec:
                raise LoadError("missing value", str(path), line, attr)
            try:
                row.append(dom.coerce(rec[attr]))
            except ValueError as exc:
                raise LoadError(str(exc), str(path), line, attr) from None
        rows.append(tuple(row))
    return Table(decl.name, decl.attributes, tuple(rows), decl.keys, decl.primary_key)


def load_database(schema: SchemaBlock, data_dir: str | Path) -> Database:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise LoadError("data directory not found", str(data_dir))
    tables = {d.name: load_table(d, _find_file(d, data_dir)) for d in schema.tables}
    return Database(tables, schema.foreign_keys)
