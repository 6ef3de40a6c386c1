"""CSV emission for experiment result tables."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .experiments import ResultTable, _fmt

COLUMNS = (
    "n_tiers", "ue_density", "m_ues", "bw_ratio", "k_b", "series", "scheme",
    "metric", "mean", "std_error", "realizations", "note",
)


def render_csv(table: ResultTable) -> str:
    """CSV text: ``#`` metadata lines, a header row, then one row per result."""
    buf = io.StringIO()
    for line in table.metadata():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.rows:
        w.writerow([
            r.n_tiers, _fmt(r.ue_density), _fmt(r.m_ues), _fmt(r.bw_ratio), _fmt(r.k_b), r.series,
            r.scheme, r.metric, _fmt(r.mean), _fmt(r.std_error), r.realizations, r.note,
        ])
    return buf.getvalue()


def write_csv(table: ResultTable, path: str | Path) -> None:
    Path(path).write_text(render_csv(table), encoding="utf-8")


def read_rows(path: str | Path) -> list[dict[str, str]]:
    """Parse a result CSV back into dicts, skipping metadata lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_metadata(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln[2:].rstrip("\n") for ln in fh if ln.startswith("# ")]
