"""Compile database visualization specifications to SVG and check that the
result faithfully represents tables, rows, attributes and foreign keys."""

from .checker import FaithfulnessReport, check_faithfulness, lint_consistency, naive_constraint_table_guard
from .compiler import CompilationPlan, Scene, compile_scene, materialize, plan
from .ingest import load_database
from .marks import MarkTable, reresolve
from .render import render
from .spec import SpecDocument, SpecError, parse_spec, serialize_spec

__all__ = [
    "CompilationPlan", "FaithfulnessReport", "MarkTable", "Scene", "SpecDocument", "SpecError",
    "check_faithfulness", "compile_scene", "lint_consistency", "load_database", "materialize",
    "naive_constraint_table_guard", "parse_spec", "plan", "render", "reresolve", "serialize_spec",
]
