"""Random valid specification documents, as JSON-ready dicts."""

import random

KINDS = ("integer", "real", "text")


def random_spec(rng: random.Random) -> dict:
    tables = []
    for t in range(rng.randint(1, 3)):
        attrs = [{"name": "id", "type": "integer"}]
        for a in range(rng.randint(0, 3)):
            kind = rng.choice(KINDS)
            d = {"name": f"a{a}", "type": kind}
            if kind == "integer" and rng.random() < 0.3:
                d["interval"] = [0, rng.randint(1, 50)]
            if kind == "text" and rng.random() < 0.3:
                d["categories"] = ["p", "q", "r"]
            attrs.append(d)
        tables.append({"name": f"T{t}", "attributes": attrs, "primary_key": ["id"]})
    fks = []
    for i, t in enumerate(tables[1:], 1):
        if rng.random() < 0.7:
            t["attributes"].append({"name": "ref", "type": "integer"})
            fks.append({"name": f"C{i}", "source": {"table": t["name"], "attributes": ["ref"]},
                        "target": {"table": "T0", "attributes": ["id"]},
                        "cardinality": rng.choice(["many-one", "one-one"])})
    scales = []
    for s in range(rng.randint(0, 2)):
        kind = rng.choice(["linear", "ordinal", "identity"])
        d = {"name": f"s{s}", "kind": kind}
        if kind == "linear" and rng.random() < 0.5:
            d["domain"] = [0, rng.randint(1, 9)]
            d["range"] = [rng.randint(0, 20), rng.randint(100, 300)]
        if kind == "ordinal" and rng.random() < 0.5:
            d["range"] = ["red", "blue"]
        scales.append(d)
    views = []
    for i, t in enumerate(tables):
        numeric = [a["name"] for a in t["attributes"] if a["type"] != "text"]
        channels = {"x": {"expr": rng.choice(numeric) + rng.choice(["", " * 2", " + 1"])},
                    "y": rng.choice([{"value": rng.randint(0, 100)},
                                     {"expr": rng.choice(numeric)}])}
        if scales and rng.random() < 0.5:
            channels["x"]["scale"] = rng.choice(scales)["name"]
        if rng.random() < 0.3:
            channels["text"] = f'f"{{{rng.choice(numeric)}}}!"'
        v = {"name": f"V{i}", "source": t["name"], "mark": rng.choice(["point", "rect", "text"]),
             "channels": channels}
        if v["mark"] == "text" and "text" not in channels:
            channels["text"] = {"value": "t"}
        if v["mark"] == "rect" and rng.random() < 0.5:
            channels["w"] = {"auto": True}
            channels["h"] = {"auto": True}
            v["k_per_row"] = rng.randint(1, 4)
        if rng.random() < 0.2:
            v["frame"] = {"x": rng.randint(0, 50), "y": 0, "width": 100, "height": 80}
        views.append(v)
    mappings = []
    for fk in fks:
        src = next(v["name"] for v in views if v["source"] == fk["source"]["table"])
        m = rng.choice(["shared", "explicit"])
        if m == "shared":
            mappings.append({"constraint": fk["name"], "method": "shared_scale",
                             "level": rng.randint(0, 4)})
        else:
            views.append({"name": f"L{fk['name']}", "source": fk["name"], "mark": "link",
                          "channels": {"x": {"ref": "V0", "via": fk["name"]},
                                       "y": {"ref": "V0", "via": fk["name"]},
                                       "x2": {"ref": src, "key": "id", "prop": "x"},
                                       "y2": {"ref": src, "key": "id", "prop": "y"}}})
            mappings.append({"constraint": fk["name"], "method": "explicit",
                             "view": f"L{fk['name']}"})
    doc = {"schema": {"tables": tables, "foreign_keys": fks}, "scales": scales, "views": views,
           "constraint_mappings": mappings,
           "canvas": {"width": rng.choice([300, 400, 640]), "height": rng.choice([200, 300])}}
    if rng.random() < 0.5:
        doc["options"] = {"epsilon": rng.choice([0, 0.5, 1.5]),
                          "jitter": {"magnitude": rng.choice([0, 5]), "seed": rng.randint(0, 99)}}
    return doc
