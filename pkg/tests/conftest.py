from pathlib import Path

import pytest

from dbviz import compile_scene, load_database, parse_spec

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# acceptance results, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def load(name):
    d = FIXTURES / name
    doc = parse_spec((d / "spec.json").read_bytes(), str(d / "spec.json"))
    return doc, load_database(doc.schema, d / "data")


def scene_of(name, **kw):
    doc, db = load(name)
    return compile_scene(doc, db, **kw)


@pytest.fixture
def fixture_scene():
    return scene_of


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


def build(tmp_path, spec, data):
    """Parse *spec* (a dict) and load *data* ({table: [header, *rows]})."""
    import csv
    import json
    d = tmp_path / "data"
    d.mkdir(exist_ok=True)
    for name, rows in data.items():
        with open(d / f"{name}.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    doc = parse_spec(json.dumps(spec, indent=2))
    return doc, load_database(doc.schema, d)


def table_decl(name, *attrs, pk=("id",)):
    types = {"id": "integer"}
    out = {"name": name, "attributes": [{"name": a.split(":")[0],
                                         "type": a.split(":")[1] if ":" in a else types.get(a, "integer")}
                                        for a in attrs]}
    out["primary_key"] = list(pk) if pk else None
    return out
