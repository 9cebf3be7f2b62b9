"""Achieved reinforcement level for the five alignment fixtures, optionally
under a different proximity threshold."""

import argparse
from pathlib import Path

from dbviz import compile_scene, load_database, parse_spec
from dbviz.constraints import LEVEL_NAMES, check_shared_scale

ROOT = Path(__file__).resolve().parent.parent / "fixtures"


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--proximity", type=float)
    args = ap.parse_args()
    for name in ("align_a", "align_b", "align_c", "align_d", "align_e"):
        d = ROOT / name
        doc = parse_spec((d / "spec.json").read_bytes())
        s = compile_scene(doc, load_database(doc.schema, d / "data"))
        for m in doc.constraint_mappings:
            lv = check_shared_scale(m, doc, s.scales, s.scale_of, args.proximity)
            label = LEVEL_NAMES[lv.level] if lv.level is not None else "not preserved"
            print(f"{name}  {m.constraint}: level {lv.level} ({label})  {lv.reason}")


if __name__ == "__main__":
    run()
