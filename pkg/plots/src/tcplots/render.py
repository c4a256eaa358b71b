"""Render charts from treecolour CLI CSV files.

Three chart kinds are supported, one per CSV schema:

- ``decay``: disagreement means per level (columns level, mean, stderr,
  optionally bound_v1 and bound_v2), one series per input file.
- ``ksweep``: branching-factor means across palette sizes (columns k, mean,
  stderr, optionally naive_two_level), with vertical threshold markers at
  d/ln d and 2 d/ln d when the degree is given.
- ``smatrix``: a revelation trace (columns column, fail_row, good_row),
  plotted as the running sum of the two rows' difference.

Every chart is written as both PNG and SVG next to the requested output
path.  Inputs are never modified; rendering twice is idempotent.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


class SchemaError(ValueError):
    """The input CSV does not match the chart kind's expected columns."""


_REQUIRED = {
    "decay": ("level", "mean", "stderr"),
    "ksweep": ("k", "mean", "stderr"),
    "smatrix": ("column", "fail_row", "good_row"),
}


@dataclass(frozen=True)
class PlotSpec:
    """One chart request: input CSVs, chart kind, and output image path."""

    inputs: tuple[str, ...]
    kind: str
    out: str
    logx: bool = False
    logy: bool = False
    labels: tuple[str, ...] = field(default_factory=tuple)
    degree: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in _REQUIRED:
            raise SchemaError(f"unknown chart kind {self.kind!r}; expected "
                              f"one of {sorted(_REQUIRED)}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.labels and len(self.labels) != len(self.inputs):
            raise SchemaError("labels must match the number of inputs")


def _read_csv(path: str, required: tuple[str, ...]) -> list[dict[str, str]]:
    with open(path, newline="") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    reader = csv.DictReader(lines)
    header = reader.fieldnames or []
    for column in required:
        if column not in header:
            raise SchemaError(f"{path}: missing column {column!r} "
                              f"(found {header})")
    rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _floats(rows: list[dict[str, str]], column: str) -> list[float]:
    return [float(row[column]) for row in rows]


def _out_paths(out: str) -> tuple[str, str]:
    base, ext = os.path.splitext(out)
    if ext.lower() not in (".png", ".svg"):
        base = out
    return base + ".png", base + ".svg"


def render(spec: PlotSpec) -> dict:
    """Render the chart and return what was drawn: output paths, series
    count, and marker positions."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    markers: list[float] = []
    if spec.kind == "decay":
        series = _render_decay(ax, spec)
    elif spec.kind == "ksweep":
        series, markers = _render_ksweep(ax, spec)
    else:
        series = _render_smatrix(ax, spec)
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    png, svg = _out_paths(spec.out)
    fig.savefig(png)
    fig.savefig(svg)
    plt.close(fig)
    return {"png": png, "svg": svg, "series": series, "markers": markers}


def _label(spec: PlotSpec, index: int) -> str:
    if spec.labels:
        return spec.labels[index]
    return os.path.splitext(os.path.basename(spec.inputs[index]))[0]


def _render_decay(ax, spec: PlotSpec) -> int:
    series = 0
    for idx, path in enumerate(spec.inputs):
        rows = _read_csv(path, _REQUIRED["decay"])
        levels = _floats(rows, "level")
        ax.errorbar(levels, _floats(rows, "mean"),
                    yerr=_floats(rows, "stderr"),
                    marker="o", capsize=3, label=_label(spec, idx))
        series += 1
        for bound, style in (("bound_v1", "--"), ("bound_v2", ":")):
            if bound in rows[0] and all(row[bound] for row in rows):
                ax.plot(levels, _floats(rows, bound), style,
                        label=f"{_label(spec, idx)} {bound}")
                series += 1
    ax.set_xlabel("level")
    ax.set_ylabel("mean disagreements")
    ax.set_title("disagreement decay per level")
    return series


def _render_ksweep(ax, spec: PlotSpec) -> tuple[int, list[float]]:
    series = 0
    for idx, path in enumerate(spec.inputs):
        rows = _read_csv(path, _REQUIRED["ksweep"])
        ks = _floats(rows, "k")
        ax.errorbar(ks, _floats(rows, "mean"), yerr=_floats(rows, "stderr"),
                    marker="o", capsize=3, label=_label(spec, idx))
        series += 1
        if "naive_two_level" in rows[0]:
            ax.plot(ks, _floats(rows, "naive_two_level"), "--",
                    label=f"{_label(spec, idx)} naive (d/(k-1))^2")
            series += 1
    markers: list[float] = []
    if spec.degree is not None:
        base = spec.degree / math.log(spec.degree)
        for factor, name in ((1.0, "d/ln d"), (2.0, "2d/ln d")):
            position = factor * base
            ax.axvline(position, color="grey", linestyle="-.",
                       label=f"{name} = {position:.1f}")
            markers.append(position)
    ax.set_xlabel("k")
    ax.set_ylabel("branching factor")
    ax.set_title("branching factor across palette sizes")
    return series, markers


def _render_smatrix(ax, spec: PlotSpec) -> int:
    series = 0
    for idx, path in enumerate(spec.inputs):
        rows = _read_csv(path, _REQUIRED["smatrix"])
        running = 0
        xs, ys = [], []
        for row in rows:
            running += int(row["fail_row"]) - int(row["good_row"])
            xs.append(int(row["column"]))
            ys.append(running)
        ax.step(xs, ys, where="post", label=_label(spec, idx))
        series += 1
    ax.set_xlabel("column")
    ax.set_ylabel("running sum")
    ax.set_title("S-matrix running sum")
    return series
