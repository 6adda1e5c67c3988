import numpy as np
import pytest

from incentive_gne import PerfectEstimator, default_start, make_schedule, run, storage
from incentive_gne.harness import InstanceSpec, generate_instance


@pytest.fixture
def instance():
    return generate_instance(InstanceSpec(num_agents=4, seed=6))


class TestInstanceDocuments:
    def test_roundtrip_preserves_everything(self, tmp_path, instance):
        game, geom = instance
        path = tmp_path / "inst.json"
        storage.save_instance(path, game, geom)
        game2, geom2 = storage.load_instance(path)
        assert game2.dims == game.dims
        assert np.allclose(game2.Q, game.Q)
        assert np.allclose(game2.q_full, game.q_full)
        assert np.allclose(geom2.A, geom.A)
        assert np.allclose(geom2.b, geom.b)
        assert np.allclose(geom2.lo, geom.lo)
        assert np.allclose(geom2.up, geom.up)

    def test_only_lower_pairs_stored(self, tmp_path, instance):
        game, geom = instance
        doc = storage.instance_to_dict(game, geom)
        for key in doc["C_blocks"]:
            i, j = (int(s) for s in key.split(","))
            assert i < j

    def test_bad_pair_key_rejected(self, instance):
        game, geom = instance
        doc = storage.instance_to_dict(game, geom)
        doc["C_blocks"]["2,1"] = [[0.0]]
        with pytest.raises(ValueError):
            storage.instance_from_dict(doc)


class TestTraceCsv:
    @pytest.fixture
    def trace(self, instance):
        game, geom = instance
        sched = make_schedule(game.weak_convexity().ell, cxi_product=0.3)
        return run(game, geom, PerfectEstimator(game), sched, 12,
                   x0=default_start(geom), rng=np.random.default_rng(0))

    def test_roundtrip_columns(self, tmp_path, trace):
        path = tmp_path / "trace.csv"
        storage.save_trace(path, trace)
        cols = storage.load_trace_csv(path)
        assert np.isnan(cols["residual"][0])
        assert np.allclose(cols["theta"], trace.theta)
        assert np.allclose(cols["residual"][1:], trace.residuals)
        assert np.allclose(cols["avg_residual_cum"][1:],
                           trace.cumulative_average_residual())

    def test_schema_violation_raises_with_columns(self, tmp_path, trace):
        path = tmp_path / "trace.csv"
        storage.save_trace(path, trace)
        body = path.read_text().replace("eps_measured", "eps")
        path.write_text(body)
        with pytest.raises(ValueError, match="trace columns"):
            storage.load_trace_csv(path)

    def test_trajectory_roundtrip(self, tmp_path, trace):
        path = tmp_path / "trajectory.csv"
        storage.save_trajectory(path, trace)
        xs = storage.load_trajectory(path)
        assert np.array_equal(xs, trace.xs)
