import json
import os
import shutil
import subprocess
from pathlib import Path

import pytest

REPO_ACCEPTANCE = Path(__file__).resolve().parents[2] / "artifacts" / "acceptance"


def _drive_experiment_cli(out_dir: Path) -> Path:
    """Produce a small artifact set through the experiment CLI.

    The plotter consumes the backend only through its public artifact
    interfaces, so the fixture shells out to the installed `incentive-gne`
    command rather than importing the package.
    """
    if shutil.which("incentive-gne") is None:
        pytest.skip("incentive-gne CLI not installed; no artifacts to plot")
    art = out_dir / "sweep"
    config = {
        "num_agents": 5,
        "estimators": ["perfect", "ls"],
        "cxi_products": [0.0, 0.5],
        "rounds": 40,
        "seeds": [0],
        "noise_variance": 1.0,
        "probe_count": 2,
        "ridge": 0.1,
        "oracle_starts": 5,
        "output_dir": str(art),
    }
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(json.dumps(config))
    subprocess.run(["incentive-gne", "run", "--config", str(cfg_path)], check=True)
    subprocess.run(["incentive-gne", "report", "--artifacts", str(art)], check=True)
    return art


@pytest.fixture(scope="session")
def artifact_dir(tmp_path_factory) -> Path:
    env_dir = os.environ.get("TRACE_PLOTTER_ARTIFACTS")
    if env_dir:
        path = Path(env_dir)
        if not path.is_dir():
            raise RuntimeError(f"TRACE_PLOTTER_ARTIFACTS={env_dir} is not a directory")
        return path
    return _drive_experiment_cli(tmp_path_factory.mktemp("generated"))


def acceptance_sweeps() -> list[Path]:
    """Artifact directories left behind by the backend acceptance suite."""
    if not REPO_ACCEPTANCE.is_dir():
        return []
    return sorted(p for p in REPO_ACCEPTANCE.iterdir() if p.is_dir())
