"""Render every fixture to out/<name>.svg with its report alongside."""

import argparse
from pathlib import Path

from dbviz.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    ap.add_argument("names", nargs="*")
    args = ap.parse_args()
    fixtures = ROOT / "fixtures"
    names = args.names or sorted(p.name for p in fixtures.iterdir())
    for name in names:
        d = fixtures / name
        rc = main(["render", "--spec", str(d / "spec.json"), "--data", str(d / "data"),
                   "--out", str(args.out / f"{name}.svg")])
        print(f"{name:24s} exit {rc}")


if __name__ == "__main__":
    run()
