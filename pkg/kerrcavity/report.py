"""
Writers for sweep tables: CSV, JSON and a line-plot SVG.

Numbers are written with 12 significant digits; identical inputs give
byte-identical files.
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import matplotlib
from matplotlib.figure import Figure

from kerrcavity.sweep import ObservableRecord, SweepResult

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12
SVG_SALT = "kerrcavity"


def fmt(value: Optional[float]) -> str:
    if value is None or not math.isfinite(value):
        return ""
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def _rounded(value: Optional[float]) -> Optional[float]:
    text = fmt(value)
    return float(text) if text else None


@dataclass
class Table:
    x_name: str
    observables: Sequence[str]
    engine: str
    rows: List[ObservableRecord]
    metadata: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_sweep(cls, result: SweepResult) -> "Table":
        spec = result.spec
        return cls(
            x_name="lambda" if spec.variable == "lambda" else "t",
            observables=spec.observables,
            engine=spec.engine,
            rows=result.rows,
            metadata=dict(spec.metadata),
        )

    @classmethod
    def from_point(cls, row: ObservableRecord, observables: Sequence[str], engine: str) -> "Table":
        return cls(x_name="t", observables=observables, engine=engine, rows=[row])

    def columns(self) -> List[str]:
        columns = [self.x_name, *self.observables]
        if self.engine == "both":
            columns += [f"{name}_oracle" for name in self.observables]
            columns += [f"{name}_delta" for name in self.observables]
            columns.append("amp_delta")
        columns.append("error")
        return columns

    def records(self) -> List[Dict[str, Optional[float]]]:
        out = []
        for row in self.rows:
            record = {self.x_name: row.x}
            for name in self.observables:
                record[name] = row.values.get(name)
            if self.engine == "both":
                for name in self.observables:
                    record[f"{name}_oracle"] = row.oracle.get(name)
                for name in self.observables:
                    record[f"{name}_delta"] = row.delta.get(name)
                record["amp_delta"] = row.amp_delta
            record["error"] = row.error
            out.append(record)
        return out


def write_csv(table: Table, path: str) -> None:
    columns = table.columns()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for record in table.records():
            writer.writerow(
                [(record[c] or "") if c == "error" else fmt(record[c]) for c in columns]
            )


def write_json(table: Table, path: str) -> None:
    rows = []
    for record in table.records():
        rows.append({k: (v if k == "error" else _rounded(v)) for k, v in record.items()})
    payload = {
        "columns": table.columns(),
        "engine": table.engine,
        "metadata": table.metadata,
        "rows": rows,
    }
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(payload, fp, indent=2, sort_keys=False)
        fp.write("\n")


def write_svg(table: Table, path: str) -> None:
    """One line per observable against the swept variable."""
    figure = Figure(figsize=(6.4, 4.0))
    ax = figure.add_subplot()
    xs = [row.x for row in table.rows]
    for name in table.observables:
        ys = [row.values.get(name, math.nan) for row in table.rows]
        ax.plot(xs, ys, label=name, linewidth=1.2)
    ax.set_xlabel("$\\lambda$" if table.x_name == "lambda" else "$t$")
    ax.set_ylabel(", ".join(table.observables))
    if table.metadata.get("preset"):
        ax.set_title(table.metadata["preset"])
    ax.legend(loc="best")
    figure.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        figure.savefig(path, format="svg", metadata={"Date": None})


WRITERS = {"csv": write_csv, "json": write_json, "svg": write_svg}


def write_table(table: Table, fmt_name: str, path: str) -> None:
    WRITERS[fmt_name](table, path)
    logger.info(f"wrote {fmt_name} table ({len(table.rows)} rows) to {path}")


def write_validation_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(report, fp, indent=2)
        fp.write("\n")
    logger.info(f"wrote validation report to {path}")
