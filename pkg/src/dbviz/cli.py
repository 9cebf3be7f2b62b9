"""Command-line entry point: ingest, validate, compile, check, render."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

from .checker import check_faithfulness
from .compiler import compile_scene, marks_json, plan
from .constraints import detect_overplotting
from .encode import CompileError
from .ingest import LoadError, load_database
from .relational import DomainError, SchemaError, validate_database
from .render import RenderError, render
from .spec import SpecError, parse_spec

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
ARTIFACTS = ("marks", "report", "svg")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    spec: Path
    data: Path
    out: Path | None = None
    report: Path | None = None
    emit: tuple[str, ...] = ()
    strict: bool = False
    jitter: float | None = None
    seed: int = 0
    epsilon: float | None = None
    proximity: float | None = None


def write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _targets(cfg: RunConfig) -> dict[str, Path | None]:
    emit = cfg.emit or (("svg", "report") if cfg.mode == "render" else ("report",))
    stem = cfg.out or cfg.report
    out = {}
    if "svg" in emit:
        out["svg"] = cfg.out
    if "report" in emit:
        out["report"] = cfg.report or (cfg.out.with_suffix(".report.json") if cfg.out else None)
    if "marks" in emit:
        out["marks"] = stem.with_name(stem.name.split(".")[0] + ".marks.json") if stem else None
    return out


def run(cfg: RunConfig) -> int:
    try:
        text = cfg.spec.read_bytes()
    except OSError as exc:
        _err(f"{cfg.spec}: cannot read spec: {exc.strerror or exc}")
        return EXIT_IO
    try:
        doc = parse_spec(text, str(cfg.spec))
    except SpecError as exc:
        _err(str(exc))
        return EXIT_FAIL
    opts = doc.options
    if cfg.epsilon is not None:
        opts = replace(opts, epsilon=cfg.epsilon)
    if cfg.proximity is not None:
        opts = replace(opts, proximity_px=cfg.proximity)
    doc = replace(doc, options=opts)
    try:
        db = load_database(doc.schema, cfg.data)
    except (LoadError, SchemaError, DomainError) as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    violations = validate_database(db)
    if violations:
        for v in violations:
            _err(f"{cfg.data}: {v.kind}: {v.message}")
        return EXIT_FAIL
    try:
        if cfg.mode == "check":
            plan(doc, db)
            return EXIT_OK
        scene = compile_scene(doc, db)
        if cfg.jitter:
            views = opts.jitter_views or tuple(
                n for n in scene.plan.order if detect_overplotting(scene.marks[n], opts.epsilon))
            scene = compile_scene(doc, db, views, cfg.jitter, cfg.seed)
        report = check_faithfulness(scene)
        outputs = {}
        targets = _targets(cfg)
        if "svg" in targets:
            outputs["svg"] = render(scene)
        if "report" in targets:
            outputs["report"] = report.dumps()
        if "marks" in targets:
            outputs["marks"] = (json.dumps(marks_json(scene), sort_keys=True, indent=2) + "\n").encode()
    except CompileError as exc:
        _err(str(exc).replace("<spec>", str(cfg.spec)))
        return EXIT_FAIL
    except RenderError as exc:
        _err(f"render error: {exc}")
        return EXIT_FAIL
    try:
        for kind in ARTIFACTS:
            if kind not in outputs:
                continue
            path = targets[kind]
            if path is None:
                sys.stdout.write(outputs[kind].decode())
            else:
                write_atomic(path, outputs[kind])
    except OSError as exc:
        _err(f"error: cannot write output: {exc}")
        return EXIT_IO
    for c in report.constraints:
        if not c["preserved"]:
            _err(f"{cfg.spec}: constraint {c['constraint']} not preserved: {c['reason']}")
    for g in report.overplot:
        _err(f"{cfg.spec}: view {g['view']}: indistinguishable marks {g['back_keys']}")
    for a in report.attributes:
        if not a["mapped"]:
            _err(f"{cfg.spec}: attribute {a['table']}.{a['attribute']} is not mapped")
    for t, vs in report.tables.items():
        if not vs:
            _err(f"{cfg.spec}: table {t} has no view")
    for f in [*report.lints, *report.warnings]:
        _err(f"{cfg.spec}: {'error' if cfg.strict else 'warning'}: {f.rule}: {f.message}")
    if not report.verdict:
        return EXIT_FAIL
    if cfg.strict and (report.lints or report.warnings):
        return EXIT_FAIL
    return EXIT_OK


def _emit_list(text: str) -> tuple[str, ...]:
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in items if x not in ARTIFACTS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown artifact(s) {', '.join(bad)}; "
                                         f"choose from {', '.join(ARTIFACTS)}")
    return items


def _nonneg(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbviz", description="Compile, check and render database "
                                "visualization specifications.")
    p.add_argument("mode", choices=("check", "compile", "render"))
    p.add_argument("--spec", required=True, type=Path, help="specification JSON file")
    p.add_argument("--data", required=True, type=Path, help="directory with one file per table")
    p.add_argument("--out", type=Path, help="SVG output path")
    p.add_argument("--report", type=Path, help="faithfulness report path")
    p.add_argument("--emit", type=_emit_list, default=(),
                   help="comma-separated artifacts: marks, report, svg")
    p.add_argument("--strict", action="store_true", help="treat lint findings as failures")
    p.add_argument("--jitter", type=_nonneg, metavar="MAG", help="jitter magnitude in pixels")
    p.add_argument("--seed", type=int, default=0, metavar="N", help="jitter seed")
    p.add_argument("--epsilon", type=_nonneg, help="overplotting tolerance in pixels")
    p.add_argument("--proximity", type=_nonneg, metavar="PX",
                   help="spatial-proximity threshold in pixels")
    return p


def main(argv: list[str] | None = None) -> int:
    a = parser().parse_args(argv)
    cfg = RunConfig(a.mode, a.spec, a.data, a.out, a.report, a.emit, a.strict, a.jitter, a.seed,
                    a.epsilon, a.proximity)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
