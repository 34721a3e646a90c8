"""Render sweep CSV files into static figures.

Consumes only the published CSV schema of the sweep harness (fixed header,
``#`` metadata comments, empty fields for missing values).  Three figure
kinds are supported:

* ``mean-degree``: two panels (emergence probability, epidemic size) against
  the first axis, one series per second-axis value;
* ``alpha-mask``:  same two-panel layout for membership x mask-fraction
  sweeps;
* ``tradeoff``:    both quantities on one shared axis against a single
  sweep axis.

Analytic values are drawn as lines, simulation values as markers with +-1
standard-error bars.  Rendering is read-only and deterministic: the same CSV
produces an identical image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = [
    "axis1",
    "axis2",
    "pe_analytic",
    "rho",
    "es_analytic",
    "pe_sim",
    "pe_sim_se",
    "es_sim",
    "es_sim_se",
    "trials",
    "wall_time_s",
]

KINDS = ("mean-degree", "alpha-mask", "tradeoff")

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}


class SchemaError(ValueError):
    """The CSV header does not match the harness schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str | Path
    figure_kind: str
    out_path: str | Path


def read_sweep_csv(path):
    """Parse a harness CSV; returns (metadata dict, list of row dicts).

    Numeric fields come back as floats (nan for empty); the header is
    validated against the published schema and a column diff is raised on
    mismatch.
    """
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if ":" in text:
                key, _, val = text.partition(":")
                meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    if not body:
        raise SchemaError(f"{path}: no header row found")
    header = next(csv.reader([body[0]]))
    if header != EXPECTED_HEADER:
        missing = [c for c in EXPECTED_HEADER if c not in header]
        unexpected = [c for c in header if c not in EXPECTED_HEADER]
        raise SchemaError(
            f"{path}: header mismatch; missing columns {missing}, "
            f"unexpected columns {unexpected}, order must be {EXPECTED_HEADER}"
        )
    rows = []
    for record in csv.reader(body[1:]):
        row = {}
        for key, raw in zip(header, record):
            row[key] = float(raw) if raw != "" else float("nan")
        rows.append(row)
    return meta, rows


def _axis_label(meta, key, fallback):
    # metadata lines look like "axis1: md_c = [2, 4, 6]"
    raw = meta.get(key, "")
    name = raw.split("=")[0].strip()
    return name if name and name != "(none)" else fallback


def _series_split(rows):
    """Group rows by their axis2 value (nan-safe), preserving order."""
    groups = {}
    for row in rows:
        key = row["axis2"]
        key = None if np.isnan(key) else key
        groups.setdefault(key, []).append(row)
    return groups


def _plot_quantity(ax, rows_by_series, analytic_col, sim_col, se_col, x_label, series_label):
    for key, rows in rows_by_series.items():
        x = np.array([r["axis1"] for r in rows])
        label = None if key is None else f"{series_label}={key:g}"
        analytic = np.array([r[analytic_col] for r in rows])
        color = None
        if np.isfinite(analytic).any():
            (line,) = ax.plot(x, analytic, "-", label=label)
            color = line.get_color()
            label = None
        sim = np.array([r[sim_col] for r in rows])
        if np.isfinite(sim).any():
            se = np.array([r[se_col] for r in rows])
            se = np.where(np.isfinite(se), se, 0.0)
            ax.errorbar(
                x, sim, yerr=se, fmt="o", ms=3.5, capsize=2, color=color, label=label
            )
    ax.set_xlabel(x_label)
    if any(k is not None for k in rows_by_series):
        ax.legend(fontsize=7)


def render_figure(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path."""
    if spec.figure_kind not in KINDS:
        raise ValueError(f"unknown figure kind {spec.figure_kind!r}; choose from {KINDS}")
    meta, rows = read_sweep_csv(spec.csv_path)
    rows = [r for r in rows if np.isfinite(r["axis1"])]
    if not rows:
        raise ValueError(f"{spec.csv_path}: no data rows")
    x_label = _axis_label(meta, "axis1", "axis1")
    series_label = _axis_label(meta, "axis2", "axis2")
    out = Path(spec.out_path)

    with plt.rc_context(_STYLE):
        if spec.figure_kind == "tradeoff":
            fig, ax = plt.subplots(figsize=(4.2, 3.2))
            groups = {None: rows}
            _plot_quantity(ax, groups, "pe_analytic", "pe_sim", "pe_sim_se", x_label, series_label)
            _plot_quantity(ax, groups, "es_analytic", "es_sim", "es_sim_se", x_label, series_label)
            # name the two series explicitly on a shared axis
            handles = [
                plt.Line2D([], [], color="C0", label="emergence probability"),
                plt.Line2D([], [], color="C1", label="epidemic size"),
            ]
            ax.legend(handles=handles, fontsize=7)
            ax.set_ylabel("probability / fraction")
        else:
            fig, (ax_pe, ax_es) = plt.subplots(1, 2, figsize=(7.6, 3.2))
            groups = _series_split(rows)
            _plot_quantity(ax_pe, groups, "pe_analytic", "pe_sim", "pe_sim_se", x_label, series_label)
            _plot_quantity(ax_es, groups, "es_analytic", "es_sim", "es_sim_se", x_label, series_label)
            ax_pe.set_ylabel("emergence probability")
            ax_es.set_ylabel("epidemic size given emergence")
        fig.suptitle(meta.get("scenario", out.stem), fontsize=10)
        fig.tight_layout()
        if out.suffix.lower() == ".svg":
            fig.savefig(out, metadata={"Date": None})
        else:
            fig.savefig(out)
        plt.close(fig)
    return out
