import json

import numpy as np
import pytest

from incentive_gne import storage
from incentive_gne.cli import main


def test_generate_oracle_run_report_roundtrip(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert main(["generate", "--agents", "5", "--seed", "3", "--out", str(inst)]) == 0
    game, geom = storage.load_instance(inst)
    assert game.n == 5 and geom.m == 4

    oracle_path = tmp_path / "oracle.json"
    assert main(["oracle", "--instance", str(inst), "--starts", "5",
                 "--out", str(oracle_path)]) == 0
    oracle = storage.load_json(oracle_path)
    assert oracle["certified_global"] is False
    assert game.potential(np.asarray(oracle["x_best"])) == pytest.approx(
        oracle["theta_star"], abs=1e-9)

    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "num_agents": 5, "estimator": "perfect", "cxi_product": 0.5,
        "rounds": 25, "seeds": [0], "oracle_starts": 4,
        "output_dir": str(tmp_path / "art")}))
    assert main(["run", "--config", str(config)]) == 0
    assert main(["report", "--artifacts", str(tmp_path / "art")]) == 0
    assert (tmp_path / "art" / "summary.txt").exists()


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seeds": []}))
    assert main(["run", "--config", str(bad)]) == 1
    notjson = tmp_path / "nj.json"
    notjson.write_text("{")
    assert main(["run", "--config", str(notjson)]) == 1
    assert main(["report", "--artifacts", str(tmp_path / "missing")]) == 1


def test_numerical_failure_exit_code(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "num_agents": 5, "estimator": "perfect", "cxi_product": 0.5,
        "rounds": 10, "seeds": [0], "max_inner_iters": 3, "oracle_starts": 0,
        "output_dir": str(tmp_path / "art")}))
    assert main(["run", "--config", str(config)]) == 2


def test_output_root_env_applies(tmp_path, monkeypatch):
    monkeypatch.setenv("INCENTIVE_GNE_OUTPUT_ROOT", str(tmp_path))
    assert main(["generate", "--agents", "4", "--seed", "0",
                 "--out", "nested/inst.json"]) == 0
    assert (tmp_path / "nested" / "inst.json").exists()
