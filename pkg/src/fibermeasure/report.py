"""Machine-readable reports.

Schema (JSON, keys sorted, two-space indent, trailing newline)::

    {
      "schema": "fibermeasure-report/1",
      "command": str,
      "input_digest": sha256 hex of the canonical config and flags,
      "certificates": {name: str},      # exact rationals as "num/den"
      "tables": {name: {"columns": [str], "rows": [[cell]]}},
      "warnings": [str],
      "wall_clock": float | null        # only with --timing
    }

Cells are str, int, float, bool or null.  Floats are written with ``repr``
so they round-trip.  CSV output is RFC 4180 (CRLF, minimal quoting) with
the table's frozen column order as header.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from numbers import Rational
from dataclasses import dataclass, field

from gmpy2 import mpq

from .errors import InputError

SCHEMA = "fibermeasure-report/1"

# frozen CSV headers, one per table name
COLUMNS = {
    "family": ("label", "subset", "q", "fiber_weights"),
    "consistency": ("letter", "p", "reconstructed"),
    "samples": ("index", "word", "x"),
    "cells": ("cell", "diff", "bound"),
    "window": ("x", "r", "N1", "N2", "M", "gap", "digits"),
    "ball_mass": ("x", "r", "lower", "upper", "depth", "converged"),
    "decay": ("eps", "sup_ratio", "bound"),
    "doubling": ("trial", "omega_seed", "x", "r", "ratio_upper", "converged"),
    "counterexample": ("n", "k_n", "eps_n", "ratio_n"),
    "pv": ("horizon", "partial_sum", "trend"),
    "hits": ("q", "p", "certain"),
    "dirichlet": ("t", "best", "delta", "running_inf"),
    "survival": ("threshold", "fraction"),
}


def cell(v):
    """Normalize a value to a JSON-native table cell; rationals become "num/den"."""
    if v is None or isinstance(v, (bool, str, int, float)):
        return v
    if isinstance(v, (mpq, Rational)):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (tuple, list)):
        return " ".join(str(cell(x)) for x in v)
    try:
        return cell(mpq(v))
    except (TypeError, ValueError):
        return str(v)


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        rows = tuple(tuple(cell(v) for v in r) for r in self.rows)
        if any(len(r) != len(self.columns) for r in rows):
            raise InputError("every table row must match the column count")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def named(cls, name: str, rows) -> "Table":
        return cls(COLUMNS[name], rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow(_csv_cell(v) for v in r)
        return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass(frozen=True)
class ReportRecord:
    command: str
    input_digest: str
    certificates: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    warnings: tuple = ()
    wall_clock: float | None = None

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "input_digest": self.input_digest,
            "certificates": {k: cell(v) for k, v in self.certificates.items()},
            "tables": {k: {"columns": list(t.columns), "rows": [list(r) for r in t.rows]} for k, t in self.tables.items()},
            "warnings": list(self.warnings),
            "wall_clock": self.wall_clock,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportRecord":
        raw = json.loads(text)
        if raw.get("schema") != SCHEMA:
            raise InputError(f"unknown report schema {raw.get('schema')!r}")
        tables = {k: Table(t["columns"], t["rows"]) for k, t in raw["tables"].items()}
        return cls(
            raw["command"],
            raw["input_digest"],
            dict(raw["certificates"]),
            tables,
            tuple(raw["warnings"]),
            raw["wall_clock"],
        )

    def to_csv(self) -> str:
        """All tables in sorted-name order; several tables are separated by a blank line."""
        return "\r\n".join(self.tables[k].to_csv() for k in sorted(self.tables))

    def __eq__(self, other):
        return isinstance(other, ReportRecord) and self.as_dict() == other.as_dict()


def digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"\0")
    return h.hexdigest()
