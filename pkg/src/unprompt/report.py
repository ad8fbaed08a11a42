"""Export metric reports as CSV or key-value text.

Numbers are printed with 6 significant digits.  Columns are fixed, with any
``extra`` fields appended in sorted order, and each row carries the schema
version and config hash.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import IoFailure
from .metrics import SCHEMA_VERSION, MetricReport

COLUMNS = (
    "schema_version",
    "label",
    "config_hash",
    "forgetting_similarity",
    "forgotten",
    "per_seed_l2",
    "ssim",
    "frechet_pre",
    "frechet_real",
    "n_seeds",
)


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _rows(reports: list[MetricReport]) -> tuple[list[str], list[dict]]:
    extra = sorted({k for r in reports for k in r.extra})
    cols = list(COLUMNS) + [f"extra.{k}" for k in extra]
    rows = []
    for r in reports:
        d = r.as_dict()
        row = {"schema_version": SCHEMA_VERSION}
        row.update({k: d[k] for k in COLUMNS[1:]})
        row.update({f"extra.{k}": r.extra.get(k, "") for k in extra})
        rows.append({k: fmt_value(v) for k, v in row.items()})
    return cols, rows


def render(reports: list[MetricReport], fmt: str = "csv") -> str:
    if not reports:
        raise ValueError("no reports to export")
    cols, rows = _rows(reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "kv-text":
        blocks = []
        for i, row in enumerate(rows):
            lines = [f"# report {i}"] + [f"{k} = {row[k]}" for k in cols]
            blocks.append("\n".join(lines) + "\n")
        return "\n".join(blocks)
    raise ValueError(f"unknown report format {fmt!r}")


def export_report(reports: list[MetricReport], fmt: str, path) -> None:
    text = render(reports, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc.strerror}") from None


def read_csv(path) -> list[dict]:
    """Parse an exported CSV back into dicts of floats/bools/strings."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read report {path}: {exc.strerror}") from None
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if v in ("true", "false"):
                parsed[k] = v == "true"
            else:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        out.append(parsed)
    return out
