"""Rendering of aggregate rows: text table, CSV, and summary figures.

Tables round half-up to one decimal for display; CSV keeps raw values so
downstream tooling never inherits presentation rounding.
"""

from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .models import AggregateRow

COLUMNS = (
    ("sample_size", "Sample Size"),
    ("correct_pct", "Correct %"),
    ("mean_words", "Num. Words"),
    ("mean_sentences", "Num. Sentences"),
    ("gives_fix_pct", "Gives Fix %"),
    ("mentions_variables_pct", "Mentions Variables %"),
    ("mentions_lines_pct", "Mentions Lines %"),
)

PCT_FIELDS = (
    ("correct_pct", "Correct %"),
    ("gives_fix_pct", "Gives Fix %"),
    ("mentions_variables_pct", "Mentions Variables %"),
    ("mentions_lines_pct", "Mentions Lines %"),
)

MEAN_FIELDS = (("mean_words", "Num. Words"), ("mean_sentences", "Num. Sentences"))


def round_half_up(value: float, places: int = 1) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def _display(value: float | int | None) -> str:
    if value is None:
        return "-"
    if isinstance(value, int):
        return str(value)
    return f"{round_half_up(value):.1f}"


def render_report(rows: Sequence[AggregateRow], format: str = "table") -> str:
    if not rows:
        raise ValueError("no rows to render")
    if format == "table":
        return _render_table(rows)
    if format == "csv":
        return _render_csv(rows)
    raise ValueError(f"unknown report format {format!r}")


def _render_table(rows: Sequence[AggregateRow]) -> str:
    header = ["Group"] + [title for _, title in COLUMNS]
    body = []
    for row in rows:
        indent = "  " * row.tier
        cells = [indent + row.label]
        for field, _ in COLUMNS:
            cells.append(_display(getattr(row, field)))
        body.append(cells)
    widths = [
        max(len(line[i]) for line in [header] + body) for i in range(len(header))
    ]
    def fmt(cells: list[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([fmt(header), rule] + [fmt(cells) for cells in body]) + "\n"


def _render_csv(rows: Sequence[AggregateRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["group"] + [field for field, _ in COLUMNS])
    for row in rows:
        cells: list[object] = [row.label]
        for field, _ in COLUMNS:
            value = getattr(row, field)
            cells.append("" if value is None else value)
        writer.writerow(cells)
    return buffer.getvalue()


def render_figures(rows: Sequence[AggregateRow], path_stem: str) -> list[str]:
    """Save a two-panel summary chart next to the delimited output."""
    if not rows:
        raise ValueError("no rows to plot")
    labels = [row.label for row in rows]
    positions = range(len(rows))
    fig, (ax_pct, ax_mean) = plt.subplots(
        2, 1, figsize=(max(8.0, 1.2 * len(rows)), 9.0), constrained_layout=True
    )

    width = 0.8 / len(PCT_FIELDS)
    for k, (field, title) in enumerate(PCT_FIELDS):
        values = [getattr(row, field) or 0.0 for row in rows]
        offsets = [p + (k - (len(PCT_FIELDS) - 1) / 2) * width for p in positions]
        ax_pct.bar(offsets, values, width=width, label=title)
    ax_pct.set_ylabel("Percent of annotations")
    ax_pct.set_ylim(0, 100)
    ax_pct.set_xticks(list(positions))
    ax_pct.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax_pct.legend(fontsize=8)
    ax_pct.set_title("Rubric attributes by group")

    width = 0.8 / len(MEAN_FIELDS)
    for k, (field, title) in enumerate(MEAN_FIELDS):
        values = [getattr(row, field) or 0.0 for row in rows]
        offsets = [p + (k - (len(MEAN_FIELDS) - 1) / 2) * width for p in positions]
        ax_mean.bar(offsets, values, width=width, label=title)
    ax_mean.set_ylabel("Mean per feedback")
    ax_mean.set_xticks(list(positions))
    ax_mean.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax_mean.legend(fontsize=8)
    ax_mean.set_title("Feedback length by group")

    path = f"{path_stem}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
