from collections import Counter
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from dbviz.relational import (Ambiguous, AttributeDomain, Database, DomainError, ForeignKey,
                              JoinPath, LossyDecomposition, SchemaError, Table, decompose_dedup,
                              decompose_lossless, join, join_path, project, select,
                              validate_database)

INT = AttributeDomain("integer")
TXT = AttributeDomain("text")


def table(name, cols, rows, pk=None, keys=()):
    return Table(name, tuple((c, TXT if isinstance(rows[0][i] if rows else 0, str) else INT)
                             for i, c in enumerate(cols)), rows, keys, pk)


# --- oracles ------------------------------------------------------------------

def nested_loop_join(r_rows, r_cols, s_rows, s_cols, on):
    """Every pair of rows agreeing on *on*, as attribute dicts."""
    out = []
    for a, b in product(r_rows, s_rows):
        da, db = dict(zip(r_cols, a)), dict(zip(s_cols, b))
        if all(da[k] == db[k] for k in on):
            out.append({**db, **da})
    return out


def as_multiset(dicts, cols):
    return Counter(tuple(d[c] for c in cols) for d in dicts)


# --- validation -------------------------------------------------------------------

def test_duplicate_key_is_one_violation():
    t = table("T", ["id", "a"], [(1, "x"), (1, "y")], pk=("id",))
    v = validate_database(Database({"T": t}))
    assert len(v) == 1 and v[0].kind == "key" and v[0].rows == (0, 1)


def d2(bids):
    a = Table("A", (("id", INT), ("bid", TXT)), [(i, b) for i, b in enumerate(bids)], primary_key=("id",))
    b = Table("B", (("bid", TXT), ("b", TXT)), [("b1", "n"), ("b2", "s")], primary_key=("bid",))
    return Database({"A": a, "B": b}, (ForeignKey("C", "A", ("bid",), "B", ("bid",)),))


def test_gallery_d2_data_is_valid():
    assert validate_database(d2(["b1", "b2", "b1"])) == []


def test_dangling_reference_names_the_row():
    v = validate_database(d2(["b1", "b9", "b2"]))
    assert [(x.kind, x.rows) for x in v] == [("foreign-key", (1,))]


def test_many_one_needs_unique_target():
    a = Table("A", (("x", INT),), [(1,)])
    b = Table("B", (("y", INT),), [(1,), (1,)])
    v = validate_database(Database({"A": a, "B": b}, (ForeignKey("C", "A", ("x",), "B", ("y",)),)))
    assert [x.kind for x in v] == ["cardinality"]


def test_structural_errors_are_not_violations():
    a = Table("A", (("x", INT),), [(1,)])
    with pytest.raises(SchemaError):
        Database({"A": a}, (ForeignKey("C", "A", ("x",), "Z", ("y",)),))
    b = Table("B", (("y", TXT),), [("1",)])
    with pytest.raises(DomainError):
        Database({"A": a, "B": b}, (ForeignKey("C", "A", ("x",), "B", ("y",)),))


def test_out_of_domain_value_rejected():
    with pytest.raises(SchemaError):
        Table("T", (("a", AttributeDomain("integer", (0, 5))),), [(9,)])
    with pytest.raises(SchemaError):
        Table("T", (("c", AttributeDomain("text", categories=("p", "q"))),), [("r",)])


# --- operators ----------------------------------------------------------------------

def test_join_bag_semantics():
    r = table("R", ["id", "a"], [(1, "x")])
    s = table("S", ["id", "b"], [(1, "p"), (1, "q")])
    assert join(r, s, ["id"]).rows == ((1, "x", "p"), (1, "x", "q"))


def test_join_disjoint_is_empty():
    r = table("R", ["id", "a"], [(1, "x")])
    s = table("S", ["id", "b"], [(2, "p")])
    assert join(r, s, ["id"]).rows == ()


def test_projection_examples():
    t = table("T", ["gid", "a"], [(7, 1)])
    p = project(t, [("gid % 3", "fx"), ("ceil(gid / 3)", "fy")])
    assert p.rows == ((1, 3),)
    t5 = table("T", ["id"], [(i,) for i in range(5)], pk=("id",))
    p5 = project(t5, [("id", "id")])
    assert len(p5) == 5 and p5.primary_key == ("id",)
    t_i = table("T", ["i"], [(4,), (4,)])
    assert project(t_i, [("10 * i", "x")]).column("x") == [40, 40]


def test_projection_drops_modified_keys():
    t = table("T", ["id", "a"], [(1, 2)], pk=("id",))
    assert project(t, [("id + 1", "id")]).primary_key is None


def test_filter_examples():
    t = table("T", ["id", "a"], [(1, -1), (2, 3)], pk=("id",))
    assert select(t, "a > 0").rows == ((2, 3),)
    assert select(t, "true").rows == t.rows
    empty = select(t, "false")
    assert empty.rows == () and empty.schema == t.schema and empty.keys == t.keys
    with pytest.raises(DomainError):
        select(t, "a + 1")


def test_lossless_split_on_key():
    t = table("T", ["id", "a", "b"], [(1, "x", "p"), (2, "x", "q")])
    r, s = decompose_lossless(t, ["id", "a"], ["id", "b"])
    got = as_multiset(nested_loop_join(r.rows, r.attributes, s.rows, s.attributes, ["id"]),
                      t.attributes)
    assert got == Counter(t.rows)


def test_lossy_split_reports_spurious_witness():
    t = table("T", ["id", "a", "b"], [(1, "x", "p"), (2, "x", "q"), (3, "y", "p")])
    with pytest.raises(LossyDecomposition) as info:
        decompose_lossless(t, ["id", "a"], ["a", "b"])
    w = info.value.witness
    assert w is not None and w not in t.rows
    joined = nested_loop_join([(1, "x"), (2, "x"), (3, "y")], ["id", "a"],
                              [("x", "p"), ("x", "q"), ("y", "p")], ["a", "b"], ["a"])
    assert w in as_multiset(joined, ["id", "a", "b"])


def test_split_must_cover_schema():
    t = table("T", ["id", "a", "b"], [(1, "x", "p")])
    with pytest.raises(SchemaError):
        decompose_lossless(t, ["a"], ["b"])


def test_dedup_example():
    t = table("T", ["g", "a", "b"], [("g1", 1, 2), ("g1", 3, 4), ("g2", 5, 6)])
    g, rest, fk = decompose_dedup(t, ["g"])
    assert g.rows == ((0, "g1"), (1, "g2"))
    assert rest.rows == ((0, 1, 2), (0, 3, 4), (1, 5, 6))
    assert (fk.source, fk.target, fk.cardinality) == ("T", g.name, "many-one")


def test_dedup_extremes():
    same = table("T", ["g", "a"], [("g", i) for i in range(4)])
    assert len(decompose_dedup(same, ["g"])[0]) == 1
    distinct = table("T", ["g", "a"], [(f"g{i}", i) for i in range(4)])
    assert len(decompose_dedup(distinct, ["g"])[0]) == 4
    with pytest.raises(SchemaError):
        decompose_dedup(same, ["g", "a"])


# --- join paths ---------------------------------------------------------------------

def d1():
    a = Table("A", (("aid", TXT),), [("a1",)], primary_key=("aid",))
    b = Table("B", (("bid", TXT),), [("b1",)], primary_key=("bid",))
    t = Table("T", (("id", INT), ("aid", TXT), ("bid", TXT)), [(1, "a1", "b1")], primary_key=("id",))
    return Database({"A": a, "B": b, "T": t}, (ForeignKey("C_TA", "T", ("aid",), "A", ("aid",)),
                                              ForeignKey("C_TB", "T", ("bid",), "B", ("bid",))))


def test_join_path_single_hop():
    p = join_path(d1(), "T", "A")
    assert isinstance(p, JoinPath) and [h.constraint for h in p.hops] == ["C_TA"]


def test_join_path_parallel_keys_are_ambiguous():
    a = Table("A", (("id", INT), ("x", INT), ("y", INT)), [(1, 1, 1)], primary_key=("id",))
    b = Table("B", (("id", INT),), [(1,)], primary_key=("id",))
    db = Database({"A": a, "B": b}, (ForeignKey("C1", "A", ("x",), "B", ("id",)),
                                     ForeignKey("C2", "A", ("y",), "B", ("id",))))
    assert isinstance(join_path(db, "A", "B"), Ambiguous)


def test_join_path_disconnected():
    a = Table("A", (("id", INT),), [(1,)])
    b = Table("B", (("id", INT),), [(1,)])
    assert join_path(Database({"A": a, "B": b}), "A", "B") is None


def test_join_path_does_not_fan_out():
    # A -> B is many-one; going from B back to A would not give a unique row
    p = join_path(d1(), "A", "B")
    assert p is None


# --- properties ------------------------------------------------------------------------

@st.composite
def small_tables(draw):
    ncols = draw(st.integers(2, 4))
    nrows = draw(st.integers(0, 6))
    cols = [f"c{i}" for i in range(ncols)]
    rows = draw(st.lists(st.tuples(*[st.integers(0, 2)] * ncols), min_size=nrows, max_size=nrows))
    return Table("T", tuple((c, INT) for c in cols), rows)


@st.composite
def table_and_split(draw):
    t = draw(small_tables())
    cols = list(t.attributes)
    side = draw(st.lists(st.sampled_from(["r", "s", "both"]), min_size=len(cols), max_size=len(cols)))
    r = [c for c, x in zip(cols, side) if x != "s"]
    s = [c for c, x in zip(cols, side) if x != "r"]
    if not r:
        r = [cols[0]]
    if not s:
        s = [cols[-1]]
    return t, r, s


@settings(max_examples=200)
@given(table_and_split())
def test_accepted_lossless_splits_join_back(case):
    t, r_attrs, s_attrs = case
    try:
        r, s = decompose_lossless(t, r_attrs, s_attrs)
    except LossyDecomposition as exc:
        shared = [a for a in t.attributes if a in r_attrs and a in s_attrs]
        if len(set(t.rows)) < len(t.rows):
            assert Counter(t.rows)[exc.witness] > 1
        elif exc.witness is not None:
            rr = {tuple(row[t.index(a)] for a in r_attrs) for row in t.rows}
            ss = {tuple(row[t.index(a)] for a in s_attrs) for row in t.rows}
            joined = nested_loop_join(rr, r_attrs, ss, s_attrs, shared)
            assert exc.witness in as_multiset(joined, t.attributes)
            assert exc.witness not in t.rows
        return
    shared = [a for a in t.attributes if a in r_attrs and a in s_attrs]
    joined = nested_loop_join(r.rows, r.attributes, s.rows, s.attributes, shared)
    assert as_multiset(joined, t.attributes) == Counter(t.rows)


@settings(max_examples=200)
@given(small_tables(), st.data())
def test_dedup_properties(t, data):
    cols = list(t.attributes)
    attrs = data.draw(st.lists(st.sampled_from(cols), min_size=1, max_size=len(cols) - 1, unique=True))
    g, rest, fk = decompose_dedup(t, attrs)
    assert validate_database(Database({g.name: g, rest.name: rest}, (fk,))) == []
    assert g.holds_key(("gid",))
    joined = nested_loop_join(rest.rows, rest.attributes, g.rows, g.attributes, ["gid"])
    assert as_multiset(joined, t.attributes) == Counter(t.rows)


@given(small_tables())
def test_validate_is_idempotent(t):
    keyed = Table(t.name, t.schema, t.rows, (("c0",),))
    db = Database({"T": keyed})
    assert validate_database(db) == validate_database(db)


@given(small_tables(), small_tables())
def test_join_commutes_up_to_order(r, s):
    s = Table("S", s.schema, s.rows)
    on = ["c0"]
    rs = join(r, s, on)
    sr = join(s, r, on)
    oracle = nested_loop_join(r.rows, r.attributes, s.rows, s.attributes, on)
    assert len(rs) == len(sr) == len(oracle)
    # same multiset of value bags; only the column order differs
    assert Counter(frozenset(Counter(row).items()) for row in rs.rows) == \
        Counter(frozenset(Counter(row).items()) for row in sr.rows)
