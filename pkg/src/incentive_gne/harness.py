"""Random instance generation and deterministic experiment sweeps.

Instances follow the benchmark recipe: N agents with scalar decisions in
[0, 1], chain resource coupling x_i + x_{i+1} <= b_i, cost curvatures and
cross couplings drawn standard normal (then symmetrized), linear terms
uniform on (-1, 1), resource levels uniform on (0, 1).  Sweeps run one cell
per (seed, estimator, cxi_product), each writing a trace CSV, a trajectory
CSV and a metadata sidecar into its own directory; failures are recorded in
the sweep summary and do not stop the remaining cells.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import storage
from .estimators import NoiseModel, make_estimator
from .game import QuadraticGame, validate_game
from .geometry import FeasibleGeometry, ProjectionError
from .incentives import make_schedule
from .inner_solver import InnerSolveError, SolverParams
from .orchestrator import (
    average_residual,
    default_start,
    global_minimizer_oracle,
    run,
    select_tbar,
    stationarity_residual,
    theorem_bound,
)

OUTPUT_ROOT_ENV = "INCENTIVE_GNE_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for one random instance; deterministic per seed."""

    num_agents: int = 20
    dims: tuple[int, ...] | None = None  # None means all scalar
    box: tuple[float, float] = (0.0, 1.0)
    coupling: str = "chain"  # "chain" or "ring"
    diag_shift: float = 0.0  # added to each Q_i diagonal; testing knob
    seed: int = 0

    def agent_dims(self) -> tuple[int, ...]:
        if self.dims is not None:
            return tuple(int(d) for d in self.dims)
        return tuple([1] * self.num_agents)


def generate_instance(spec: InstanceSpec) -> tuple[QuadraticGame, FeasibleGeometry]:
    """Draw a game and geometry per the spec's distributions.

    Draw order (fixed for determinism): Q blocks by agent, cross blocks by
    lexicographic (i, j) with i < j (the mirror is the transpose, never a
    fresh draw), linear terms by agent, then resource levels.
    """
    if spec.num_agents < 2:
        raise ConfigError("need at least two agents")
    if spec.coupling not in ("chain", "ring"):
        raise ConfigError(f"unknown coupling {spec.coupling!r}")
    dims = spec.agent_dims()
    if len(dims) != spec.num_agents:
        raise ConfigError("dims length must equal num_agents")
    rng = np.random.default_rng(spec.seed)
    N = spec.num_agents

    Q_blocks = []
    for i in range(N):
        D = rng.standard_normal((dims[i], dims[i]))
        Q_blocks.append(0.5 * (D + D.T) + spec.diag_shift * np.eye(dims[i]))
    C_blocks = {}
    for i in range(N):
        for j in range(i + 1, N):
            Cij = rng.standard_normal((dims[i], dims[j]))
            C_blocks[(i, j)] = Cij
            C_blocks[(j, i)] = Cij.T.copy()
    q = [rng.uniform(-1.0, 1.0, size=dims[i]) for i in range(N)]

    n = int(np.sum(dims))
    offsets = np.concatenate(([0], np.cumsum(dims))).astype(int)
    num_rows = N - 1 if spec.coupling == "chain" else N
    b = rng.uniform(0.0, 1.0, size=num_rows)
    A = np.zeros((num_rows, n))
    for k in range(num_rows):
        i, j = k, (k + 1) % N
        A[k, offsets[i]:offsets[i + 1]] = 1.0
        A[k, offsets[j]:offsets[j + 1]] = 1.0

    lo = np.full(n, float(spec.box[0]))
    up = np.full(n, float(spec.box[1]))
    game = QuadraticGame(dims=dims, Q_blocks=Q_blocks, C_blocks=C_blocks, q=q)
    geom = FeasibleGeometry(lo=lo, up=up, A=A, b=b)
    return game, geom


@dataclass
class ExperimentConfig:
    """One sweep: the cell grid is seeds x estimators x cxi_products."""

    num_agents: int = 20
    coupling: str = "chain"
    diag_shift: float = 0.0
    estimators: tuple[str, ...] = ("perfect",)
    c_factor: float = 2.0
    cxi_products: tuple[float, ...] = (0.0,)
    rounds: int = 100
    noise_mean: float = 0.0
    noise_variance: float = 0.0
    seeds: tuple[int, ...] = (0,)
    ridge: float = 1e-6
    gp_length_scale: float = 50.0
    gp_signal_scale: float = 100.0
    probe_count: int = 0
    estimator_window: int | None = None
    tol_inner: float = 1e-9
    max_inner_iters: int = 200_000
    oracle_starts: int = 50
    output_dir: str = "artifacts/sweep"

    _SINGULAR = {"estimator": "estimators", "cxi_product": "cxi_products", "seed": "seeds"}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        for singular, plural in cls._SINGULAR.items():
            if singular in doc:
                if plural in doc:
                    raise ConfigError(f"give either {singular!r} or {plural!r}, not both")
                doc[plural] = [doc.pop(singular)]
        known = {f for f in cls.__dataclass_fields__ if not f.startswith("_")}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.estimators:
            raise ConfigError("estimators must be nonempty")
        if not self.cxi_products:
            raise ConfigError("cxi_products must be nonempty")
        for kind in self.estimators:
            if kind not in ("perfect", "ls", "gp"):
                raise ConfigError(f"unknown estimator {kind!r}")
        for v in self.cxi_products:
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"cxi_product {v} outside [0, 1)")
        if self.c_factor < 2.0:
            raise ConfigError("c_factor must be >= 2")
        if self.rounds < 0:
            raise ConfigError("rounds must be nonnegative")
        if self.noise_variance < 0:
            raise ConfigError("noise_variance must be nonnegative")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["estimators"] = list(self.estimators)
        doc["cxi_products"] = list(self.cxi_products)
        doc["seeds"] = list(self.seeds)
        return doc


def resolve_output_dir(path_str: str) -> Path:
    """Relative output dirs land under the env-var root when it is set."""
    path = Path(path_str)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _cell_name(estimator: str, cxi: float, seed: int) -> str:
    return f"{estimator}_cxi{cxi:g}_seed{seed}"


def run_cell(game, geom, ell, config: ExperimentConfig, estimator_kind: str,
             cxi: float, seed: int, stream: int, oracle=None):
    """Run one sweep cell and return (trace, meta_dict)."""
    schedule = make_schedule(ell, c_factor=config.c_factor, cxi_product=cxi)
    estimator = make_estimator(
        estimator_kind, game, ridge=config.ridge,
        gp_length_scale=config.gp_length_scale, gp_signal_scale=config.gp_signal_scale,
        noise_variance=config.noise_variance, window=config.estimator_window)
    noise = NoiseModel(mu=config.noise_mean, sigma2=config.noise_variance)
    rng = np.random.default_rng([seed, stream])
    params = SolverParams(tol_inner=config.tol_inner, max_iters=config.max_inner_iters)
    x0 = default_start(geom)
    trace = run(game, geom, estimator, schedule, config.rounds, x0,
                noise=noise, rng=rng, solver_params=params,
                probe_count=config.probe_count)

    tbar = select_tbar(trace.envelope) if trace.rounds else 1
    meta = {
        "cell": _cell_name(estimator_kind, cxi, seed),
        "seed": seed,
        "estimator": estimator_kind,
        "cxi_product": cxi,
        "c_factor": config.c_factor,
        "ell": ell,
        "gain": schedule.gain(1) if trace.rounds else None,
        "step": schedule.step(1) if trace.rounds else None,
        "rounds": config.rounds,
        "status": "ok",
        "tbar": tbar,
        "final_theta": float(trace.theta[-1]),
        "final_x": trace.xs[-1].tolist(),
        "final_residual": float(trace.residuals[-1]) if trace.rounds else None,
        "final_stationarity": stationarity_residual(game, geom, trace.xs[-1]).residual,
    }
    if trace.rounds:
        meta["window_avg_residual"] = average_residual(trace, (tbar + 1, trace.rounds)) \
            if tbar + 1 <= trace.rounds else None
    if oracle is not None:
        meta["theta_star"] = oracle["theta_star"]
        meta["x_best"] = oracle["x_best"]
        meta["final_theta_gap"] = meta["final_theta"] - oracle["theta_star"]
    if trace.rounds and tbar + 1 <= trace.rounds:
        # keep the bound sound even when the multistart value is beaten
        floor = float(np.min(trace.theta))
        if oracle is not None:
            floor = min(floor, oracle["theta_star"])
        meta["theorem_bound"] = theorem_bound(trace, floor, tbar=tbar)
    return trace, meta


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every cell of the sweep, writing artifacts under the output dir.

    Each instance seed gets its own game/geometry and (optionally) a
    multistart oracle value shared by all cells on that seed.  A failing
    cell is recorded in the sweep summary with its diagnosis; remaining
    cells still run.
    """
    config.validate()
    out = resolve_output_dir(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage.save_json(out / "config.json", config.to_dict())

    summary_rows = []
    instances = {}
    for seed in config.seeds:
        spec = InstanceSpec(num_agents=config.num_agents, coupling=config.coupling,
                            diag_shift=config.diag_shift, seed=seed)
        game, geom = generate_instance(spec)
        report = validate_game(game)
        if not report.ok:
            raise RuntimeError(f"generated instance failed validation: {report}")
        ok, _ = geom.check_nonempty()
        if not ok:
            raise RuntimeError(f"generated geometry certified empty for seed {seed}")
        ell = game.weak_convexity().ell
        oracle = None
        if config.oracle_starts > 0:
            res = global_minimizer_oracle(game, geom, budget=config.oracle_starts,
                                          rng=np.random.default_rng([seed, 7_777]))
            oracle = {"theta_star": res.theta_best, "x_best": res.x_best.tolist()}
        instances[seed] = (game, geom, ell, oracle)
        storage.save_instance(out / f"instance_seed{seed}.json", game, geom)

    for ei, estimator_kind in enumerate(config.estimators):
        for ci, cxi in enumerate(config.cxi_products):
            for seed in config.seeds:
                game, geom, ell, oracle = instances[seed]
                name = _cell_name(estimator_kind, cxi, seed)
                cell_dir = out / name
                cell_dir.mkdir(exist_ok=True)
                stream = 1000 * ei + ci  # distinct noise stream per grid cell
                try:
                    trace, meta = run_cell(game, geom, ell, config, estimator_kind,
                                           cxi, seed, stream, oracle)
                except (InnerSolveError, ProjectionError, FloatingPointError) as exc:
                    meta = {"cell": name, "seed": seed, "estimator": estimator_kind,
                            "cxi_product": cxi, "status": "failed",
                            "diagnosis": str(exc)}
                    storage.save_json(cell_dir / "meta.json", meta)
                    summary_rows.append(meta)
                    continue
                storage.save_trace(cell_dir / "trace.csv", trace)
                storage.save_trajectory(cell_dir / "trajectory.csv", trace)
                storage.save_json(cell_dir / "meta.json", meta)
                summary_rows.append({k: meta.get(k) for k in (
                    "cell", "seed", "estimator", "cxi_product", "status",
                    "final_theta", "final_theta_gap", "final_residual",
                    "window_avg_residual", "theorem_bound")})
    storage.save_json(out / "sweep_summary.json", {"cells": summary_rows})
    return out


def report(artifact_dir) -> dict:
    """Aggregate a sweep directory into summary.json + summary.txt.

    Adds per-round suboptimality (potential minus the oracle value) and
    tracking error (distance to the oracle minimizer) series for every cell
    whose metadata carries an oracle block; cells without one get null
    entries but still appear.  Idempotent: same inputs, same bytes.
    """
    root = Path(artifact_dir)
    cell_dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "meta.json").exists())
    if not cell_dirs:
        raise ConfigError(f"no completed cells under {root}")
    cells = []
    for cell_dir in cell_dirs:
        meta = storage.load_json(cell_dir / "meta.json")
        entry = dict(meta)
        if meta.get("status") == "ok":
            cols = storage.load_trace_csv(cell_dir / "trace.csv")
            resid = cols["residual"][1:]  # drop the round-0 blank
            entry["recomputed_window_avg_residual"] = None
            tbar = meta.get("tbar")
            if tbar is not None and tbar + 1 <= resid.size:
                entry["recomputed_window_avg_residual"] = float(np.mean(resid[tbar:]))
            if "theta_star" in meta:
                xs = storage.load_trajectory(cell_dir / "trajectory.csv")
                x_best = np.asarray(meta["x_best"])
                entry["suboptimality"] = (cols["theta"] - meta["theta_star"]).tolist()
                entry["tracking_error"] = np.linalg.norm(xs - x_best, axis=1).tolist()
            else:
                entry["suboptimality"] = None
                entry["tracking_error"] = None
        cells.append(entry)
    summary = {"cells": cells}
    storage.save_json(root / "summary.json", summary)

    lines = [f"{'cell':<28} {'status':<7} {'theta_gap':>12} {'final_resid':>12} "
             f"{'avg_resid':>12} {'bound':>12}"]
    for entry in cells:
        def cell_fmt(key):
            v = entry.get(key)
            return f"{v:12.4e}" if isinstance(v, (int, float)) and v is not None else f"{'-':>12}"
        lines.append(
            f"{entry['cell']:<28} {entry['status']:<7} {cell_fmt('final_theta_gap')} "
            f"{cell_fmt('final_residual')} {cell_fmt('window_avg_residual')} "
            f"{cell_fmt('theorem_bound')}")
    (root / "summary.txt").write_text("\n".join(lines) + "\n")
    return summary
