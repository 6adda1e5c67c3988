"""Artifact serialization: instance documents, trace CSVs, metadata sidecars.

Instance documents are single JSON files carrying both the game and the
geometry:

    dims      : [n_1, ..., n_N]
    Q_blocks  : per-agent nested row-major lists (n_i x n_i)
    C_blocks  : {"i,j": nested list} for i < j only (0-based agent indices);
                the j > i blocks are reconstructed as transposes on load
    q         : per-agent lists
    boxes     : [[lo_k, up_k], ...] per coordinate
    A         : row-major nested list (m x n)
    b         : list of length m

Trace CSVs have one row per round with the fixed column set below; the row
for round 0 carries only the potential (no residual or schedule quantities
exist before the first round).  Floats are written with repr, so re-running
a configuration reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .game import QuadraticGame
from .geometry import FeasibleGeometry
from .orchestrator import RunTrace

TRACE_COLUMNS = (
    "t", "theta", "residual", "avg_residual_cum", "eps_measured",
    "alpha", "kappa", "beta", "inner_iters", "descent_slack",
)


def _fmt(v) -> str:
    return repr(float(v))


def instance_to_dict(game: QuadraticGame, geom: FeasibleGeometry) -> dict:
    doc = {
        "dims": list(game.dims),
        "Q_blocks": [b.tolist() for b in game.Q_blocks],
        # i < j pairs only; the mirror block is implied by symmetry, so the
        # schema can only represent admissible (validated) games faithfully
        "C_blocks": {
            f"{i},{j}": (game.C_blocks[(i, j)] if (i, j) in game.C_blocks
                         else game.C_blocks[(j, i)].T).tolist()
            for i in range(game.num_agents)
            for j in range(i + 1, game.num_agents)
            if (i, j) in game.C_blocks or (j, i) in game.C_blocks
        },
        "q": [v.tolist() for v in game.q],
        "boxes": [[float(l), float(u)] for l, u in zip(geom.lo, geom.up)],
        "A": geom.A.tolist(),
        "b": geom.b.tolist(),
    }
    return doc


def instance_from_dict(doc: dict) -> tuple[QuadraticGame, FeasibleGeometry]:
    dims = tuple(int(d) for d in doc["dims"])
    C = {}
    for key, block in doc.get("C_blocks", {}).items():
        i, j = (int(s) for s in key.split(","))
        if not i < j:
            raise ValueError(f"C_blocks key {key!r} must have i < j")
        arr = np.asarray(block, dtype=float)
        C[(i, j)] = arr
        C[(j, i)] = arr.T.copy()
    game = QuadraticGame(dims=dims, Q_blocks=doc["Q_blocks"], C_blocks=C, q=doc["q"])
    boxes = np.asarray(doc["boxes"], dtype=float)
    geom = FeasibleGeometry(lo=boxes[:, 0], up=boxes[:, 1],
                            A=np.asarray(doc.get("A", []), dtype=float),
                            b=np.asarray(doc.get("b", []), dtype=float))
    return game, geom


def save_instance(path, game: QuadraticGame, geom: FeasibleGeometry) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(game, geom), indent=1) + "\n")


def load_instance(path) -> tuple[QuadraticGame, FeasibleGeometry]:
    return instance_from_dict(json.loads(Path(path).read_text()))


def trace_to_csv(trace: RunTrace) -> str:
    """Render a trace as CSV text with the fixed column schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerow([0, _fmt(trace.theta[0])] + [""] * (len(TRACE_COLUMNS) - 2))
    cum = trace.cumulative_average_residual()
    for t in range(1, trace.rounds + 1):
        i = t - 1
        w.writerow([
            t, _fmt(trace.theta[t]), _fmt(trace.residuals[i]), _fmt(cum[i]),
            _fmt(trace.eps_measured[i]), _fmt(trace.alpha[i]), _fmt(trace.kappa[i]),
            _fmt(trace.beta[i]), int(trace.inner_iters[i]), _fmt(trace.descent_slack[i]),
        ])
    return buf.getvalue()


def save_trace(path, trace: RunTrace) -> None:
    Path(path).write_text(trace_to_csv(trace))


def load_trace_csv(path) -> dict[str, np.ndarray]:
    """Read a trace CSV into column arrays (round-0 blanks become NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(
                f"unexpected trace columns {header!r}; expected {list(TRACE_COLUMNS)}")
        rows = list(reader)
    cols = {name: [] for name in TRACE_COLUMNS}
    for row in rows:
        for name, cell in zip(TRACE_COLUMNS, row):
            cols[name].append(float(cell) if cell != "" else np.nan)
    return {name: np.asarray(vals) for name, vals in cols.items()}


def save_trajectory(path, trace: RunTrace) -> None:
    """Per-round joint strategies, one coordinate per column."""
    n = trace.xs.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{k}" for k in range(n)])
    for t in range(trace.xs.shape[0]):
        w.writerow([t] + [_fmt(v) for v in trace.xs[t]])
    Path(path).write_text(buf.getvalue())


def load_trajectory(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(c) for c in row[1:]] for row in reader]
    return np.asarray(rows)


def save_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())
