"""How often does jitter separate the duplicate pair of the overplot fixture?

Prints the empirical clearing rate per magnitude next to the closed form for
two points each displaced uniformly in [-m, m] on both axes: the pair stays
overplotted only if both coordinate differences are within epsilon."""

import argparse
from pathlib import Path

from dbviz import compile_scene, load_database, parse_spec
from dbviz.constraints import detect_overplotting, jitter

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "overplot"


def p_close(eps, m):
    # P(|U1 - U2| <= eps) for U1, U2 ~ U[-m, m]: triangular difference on [-2m, 2m]
    a = min(eps / (2 * m), 1.0)
    return 1 - (1 - a) ** 2


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10000)
    ap.add_argument("--magnitudes", type=float, nargs="+", default=[1, 2, 5, 10, 20])
    args = ap.parse_args()
    doc = parse_spec((FIXTURE / "spec.json").read_bytes())
    scene = compile_scene(doc, load_database(doc.schema, FIXTURE / "data"))
    eps = doc.options.epsilon
    print(f"epsilon {eps}, {args.seeds} seeds")
    print("magnitude  cleared  predicted  P(>=99 of 100)")
    for m in args.magnitudes:
        ok = sum(not detect_overplotting(jitter(scene.marks, "V_T", m, s)["V_T"], eps)
                 for s in range(args.seeds))
        p = 1 - p_close(eps, m) ** 2
        q = 1 - p
        at_least_99 = p ** 100 + 100 * p ** 99 * q
        print(f"{m:9g}  {ok / args.seeds:7.4f}  {p:9.4f}  {at_least_99:14.3f}")


if __name__ == "__main__":
    run()
