"""Render sweep artifacts into figures.

Input is an artifact directory produced by the experiment harness: one
subdirectory per cell holding `trace.csv` (fixed column schema) and
`meta.json`, plus an optional `summary.json` written by the report step.
Three figure kinds are supported:

* ``descent``        potential value per round, one curve per cell;
* ``residual_avg``   cumulative average fixed-point residual per round,
                     log-scale y axis;
* ``suboptimality``  potential gap to the oracle minimum (left axis) and
                     distance to the oracle minimizer (right axis), from
                     summary.json.

The plotter never computes new series: the one derived quantity it could
recompute (the cumulative residual average) is instead read from the CSV and
cross-checked against a recomputation to 1e-12 before anything is drawn.
Timestamps are stripped from image metadata so re-rendering the same inputs
reproduces identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("descent", "residual_avg", "suboptimality")
TRACE_COLUMNS = (
    "t", "theta", "residual", "avg_residual_cum", "eps_measured",
    "alpha", "kappa", "beta", "inner_iters", "descent_slack",
)
DERIVED_SERIES_TOL = 1e-12


class PlotError(ValueError):
    """Unusable plot spec or artifacts that do not match the schema."""


@dataclass(frozen=True)
class PlotSpec:
    artifact_dir: Path
    kind: str
    out_path: Path
    image_format: str | None = None  # inferred from out_path when None

    def resolved_format(self) -> str:
        if self.image_format:
            return self.image_format
        suffix = Path(self.out_path).suffix.lstrip(".").lower()
        return suffix or "png"


def _read_trace(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise PlotError(
                f"{path}: trace columns {header!r} do not match the expected "
                f"schema {list(TRACE_COLUMNS)}")
        rows = list(reader)
    if len(rows) <= 1:
        raise PlotError(f"{path}: trace has no rounds beyond the start point")
    cols = {name: [] for name in TRACE_COLUMNS}
    for row in rows:
        for name, cell in zip(TRACE_COLUMNS, row):
            cols[name].append(float(cell) if cell != "" else np.nan)
    return {name: np.asarray(vals) for name, vals in cols.items()}


def _check_derived_average(cols: dict[str, np.ndarray], path: Path) -> None:
    resid = cols["residual"][1:]
    stored = cols["avg_residual_cum"][1:]
    recomputed = np.cumsum(resid) / np.arange(1, resid.size + 1)
    dev = float(np.max(np.abs(recomputed - stored)))
    if dev > DERIVED_SERIES_TOL:
        raise PlotError(
            f"{path}: avg_residual_cum column deviates from the recomputed "
            f"cumulative average by {dev:.3e} (tolerance {DERIVED_SERIES_TOL:g})")


def _cells(artifact_dir: Path) -> list[tuple[dict, Path]]:
    cells = []
    for cell_dir in sorted(p for p in artifact_dir.iterdir() if p.is_dir()):
        meta_path = cell_dir / "meta.json"
        trace_path = cell_dir / "trace.csv"
        if not (meta_path.exists() and trace_path.exists()):
            continue
        meta = json.loads(meta_path.read_text())
        if meta.get("status") != "ok":
            continue
        cells.append((meta, trace_path))
    if not cells:
        raise PlotError(f"no completed cells under {artifact_dir}")
    return cells


def _label(meta: dict) -> str:
    return f"{meta['estimator']}, cxi={meta['cxi_product']:g}, seed {meta['seed']}"


def _new_figure():
    return plt.subplots(figsize=(8.0, 5.0), dpi=120)


def _plot_descent(artifact_dir: Path, ax) -> None:
    for meta, trace_path in _cells(artifact_dir):
        cols = _read_trace(trace_path)
        ax.plot(cols["t"], cols["theta"], label=_label(meta), linewidth=1.2)
    ax.set_xlabel("round")
    ax.set_ylabel("potential value")
    ax.set_title("Potential descent per outer round")


def _plot_residual_avg(artifact_dir: Path, ax) -> None:
    for meta, trace_path in _cells(artifact_dir):
        cols = _read_trace(trace_path)
        _check_derived_average(cols, trace_path)
        ax.plot(cols["t"][1:], cols["avg_residual_cum"][1:],
                label=_label(meta), linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative average residual")
    ax.set_title("Average fixed-point residual over the horizon")


def _plot_suboptimality(artifact_dir: Path, ax) -> None:
    summary_path = artifact_dir / "summary.json"
    if not summary_path.exists():
        raise PlotError(
            f"{summary_path} not found; run the report step before plotting "
            "suboptimality")
    summary = json.loads(summary_path.read_text())
    cells = [c for c in summary.get("cells", []) if c.get("status") == "ok"]
    if not cells:
        raise PlotError(f"{summary_path} contains no completed cells")
    ax_right = ax.twinx()
    drew = False
    for cell in cells:
        sub = cell.get("suboptimality")
        track = cell.get("tracking_error")
        if sub is None or track is None:
            raise PlotError(
                f"cell {cell.get('cell')!r} has no oracle columns; rerun the "
                "sweep with oracle_starts > 0")
        sub = np.asarray(sub, dtype=float)
        track = np.asarray(track, dtype=float)
        t = np.arange(sub.size)
        label = f"{cell['estimator']}, cxi={cell['cxi_product']:g}, seed {cell['seed']}"
        ax.plot(t, sub, linewidth=1.2, label=f"{label} (gap)")
        ax_right.plot(t, track, linewidth=1.0, linestyle="--",
                      label=f"{label} (tracking)")
        drew = True
    assert drew
    if all(np.all(np.asarray(c["suboptimality"]) > 0) for c in cells):
        ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("potential gap to oracle minimum")
    ax_right.set_ylabel("distance to oracle minimizer")
    ax.set_title("Suboptimality and tracking error")
    right_handles, right_labels = ax_right.get_legend_handles_labels()
    handles, labels = ax.get_legend_handles_labels()
    ax.legend(handles + right_handles, labels + right_labels, fontsize=7)


def plot(spec: PlotSpec) -> Path:
    """Render one figure; returns the written path.

    The figure kind is validated before any artifact is opened.  Schema
    violations raise PlotError naming the offending file and column set.
    """
    if spec.kind not in FIGURE_KINDS:
        raise PlotError(
            f"unknown figure kind {spec.kind!r}; expected one of {FIGURE_KINDS}")
    artifact_dir = Path(spec.artifact_dir)
    if not artifact_dir.is_dir():
        raise PlotError(f"artifact directory {artifact_dir} does not exist")
    fig, ax = _new_figure()
    try:
        if spec.kind == "descent":
            _plot_descent(artifact_dir, ax)
            ax.legend(fontsize=7)
        elif spec.kind == "residual_avg":
            _plot_residual_avg(artifact_dir, ax)
            ax.legend(fontsize=7)
        else:
            _plot_suboptimality(artifact_dir, ax)
        out = Path(spec.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fmt = spec.resolved_format()
        # Date metadata disabled so identical inputs give identical bytes
        metadata = {"Date": None} if fmt == "svg" else None
        fig.savefig(out, format=fmt, metadata=metadata)
        return out
    finally:
        plt.close(fig)
