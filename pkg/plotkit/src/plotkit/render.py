"""Render experiment CSVs into deterministic PNG charts.

Pure presentation: nothing is recomputed beyond mean and standard error
across the rows sharing an x value (i.e. across seeds). Styling is pinned
so the same CSV always produces the same bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["PlotSpec", "SchemaError", "read_table", "render"]

KINDS = ("convergence", "sweep")

# fixed style table keyed by group order; deterministic output depends on it
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_FIGSIZE = (6.4, 4.2)
_DPI = 120


class SchemaError(ValueError):
    """Raised when the CSV does not carry the referenced columns."""


@dataclass(frozen=True)
class PlotSpec:
    input_csv: Path
    kind: str            # "convergence" or "sweep"
    x_field: str
    y_field: str
    group_field: str
    out_png: Path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


def read_table(path: Path):
    """Parse a harness CSV: optional '#' metadata line, header, data rows."""
    path = Path(path)
    meta = ""
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("#"):
            meta = first.strip()
            header_line = fh.readline()
        else:
            header_line = first
        if not header_line:
            raise SchemaError(f"{path}: empty CSV, no header row")
        reader = csv.reader([header_line.strip()])
        header = next(reader)
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return meta, header, rows


def _column(header, rows, name, path):
    try:
        idx = header.index(name)
    except ValueError:
        raise SchemaError(
            f"{path}: column {name!r} not found in header {header}") from None
    return [row[idx] for row in rows]


def render(spec: PlotSpec) -> Path:
    """Write one PNG: one series per group value, mean +- SE band across seeds."""
    meta, header, rows = read_table(spec.input_csv)
    xs_raw = _column(header, rows, spec.x_field, spec.input_csv)
    ys_raw = _column(header, rows, spec.y_field, spec.input_csv)
    groups_raw = _column(header, rows, spec.group_field, spec.input_csv)
    xs = np.array([float(v) for v in xs_raw])
    ys = np.array([float(v) for v in ys_raw])

    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    for gi, group in enumerate(sorted(set(groups_raw))):
        mask = np.array([g == group for g in groups_raw])
        gx = np.array(sorted(set(xs[mask])))
        mean = np.empty_like(gx)
        half = np.empty_like(gx)
        for i, x in enumerate(gx):
            vals = ys[mask & (xs == x)]
            mean[i] = vals.mean()
            # standard error across seeds; a single seed collapses the band
            half[i] = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        color = _COLORS[gi % len(_COLORS)]
        marker = "o" if spec.kind == "sweep" else None
        ax.plot(gx, mean, label=str(group), color=color, marker=marker,
                markersize=4, linewidth=1.5)
        ax.fill_between(gx, mean - half, mean + half, color=color, alpha=0.2,
                        linewidth=0)
    ax.set_xlabel(spec.x_field)
    ax.set_ylabel(spec.y_field)
    ax.grid(True, linestyle=":", linewidth=0.7)
    ax.legend(title=spec.group_field)
    if meta:
        fig.text(0.01, 0.005, meta.lstrip("# "), fontsize=6, color="0.4")
    fig.tight_layout(rect=(0, 0.02, 1, 1))
    out = Path(spec.out_png)
    out.parent.mkdir(parents=True, exist_ok=True)
    # strip the writer's version string so output depends on the data alone
    fig.savefig(out, format="png", metadata={"Software": None})
    plt.close(fig)
    return out
