"""Command-line interface: generate instances, run sweeps, search minima, report.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
Relative output paths resolve under $INCENTIVE_GNE_OUTPUT_ROOT when set.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import storage
from .geometry import ProjectionError
from .harness import (
    ConfigError,
    ExperimentConfig,
    InstanceSpec,
    generate_instance,
    report,
    resolve_output_dir,
    run_experiment,
)
from .inner_solver import InnerSolveError
from .orchestrator import global_minimizer_oracle


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incentive-gne",
        description="Two-layer equilibrium seeking experiments for quadratic "
                    "hypomonotone games")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random instance and write it as JSON")
    g.add_argument("--agents", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--coupling", choices=("chain", "ring"), default="chain")
    g.add_argument("--diag-shift", type=float, default=0.0)
    g.add_argument("--out", required=True, help="output instance JSON path")

    r = sub.add_parser("run", help="run the sweep described by a config JSON")
    r.add_argument("--config", required=True)
    r.add_argument("--output-dir", default=None, help="override the config's output_dir")

    o = sub.add_parser("oracle", help="multistart search for the potential's minimum")
    o.add_argument("--instance", required=True)
    o.add_argument("--starts", type=int, default=50)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("report", help="aggregate a sweep directory into summaries")
    p.add_argument("--artifacts", required=True)
    return parser


def _cmd_generate(args) -> int:
    spec = InstanceSpec(num_agents=args.agents, coupling=args.coupling,
                        diag_shift=args.diag_shift, seed=args.seed)
    game, geom = generate_instance(spec)
    out = resolve_output_dir(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    storage.save_instance(out, game, geom)
    ell = game.weak_convexity().ell
    print(f"wrote {out} (n={game.n}, m={geom.m}, ell={ell:.6g})")
    return 0


def _cmd_run(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.output_dir is not None:
        doc["output_dir"] = args.output_dir
    config = ExperimentConfig.from_dict(doc)
    out = run_experiment(config)
    summary = storage.load_json(out / "sweep_summary.json")
    failed = [c["cell"] for c in summary["cells"] if c.get("status") != "ok"]
    print(f"wrote {len(summary['cells'])} cells to {out}")
    if failed:
        print(f"failed cells: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def _cmd_oracle(args) -> int:
    game, geom = storage.load_instance(args.instance)
    result = global_minimizer_oracle(game, geom, budget=args.starts,
                                     rng=np.random.default_rng(args.seed))
    payload = {
        "theta_star": result.theta_best,
        "x_best": result.x_best.tolist(),
        "starts": result.starts,
        "certified_global": False,  # upper bound from multistart, not a proof
    }
    if args.out:
        out = resolve_output_dir(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        storage.save_json(out, payload)
        print(f"wrote {out}")
    else:
        print(json.dumps(payload, indent=1, sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    summary = report(resolve_output_dir(args.artifacts))
    ok = sum(1 for c in summary["cells"] if c.get("status") == "ok")
    print(f"report: {ok}/{len(summary['cells'])} cells ok; "
          f"wrote summary.json and summary.txt")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "run": _cmd_run,
        "oracle": _cmd_oracle,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (InnerSolveError, ProjectionError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
