import numpy as np
import pytest

from incentive_gne import (
    FeedbackSample,
    GaussianProcessEstimator,
    LeastSquaresEstimator,
    NoiseModel,
    PerfectEstimator,
    ReconstructionDiagnostics,
    feedback,
    make_estimator,
    validate_game,
)
from incentive_gne.estimators import _features_for_agent

from conftest import finite_diff_gradient, random_game


def observe_points(est, game, points, rng=None, sigma2=0.0):
    noise = NoiseModel(0.0, sigma2)
    rng = rng if rng is not None else np.random.default_rng(0)
    for t, x in enumerate(points, start=1):
        est.observe(feedback(game, x, noise, rng, t=t))


class TestFeedback:
    def test_zero_noise_is_exact(self, game_a):
        sample = feedback(game_a, [1.0, 1.0], NoiseModel(0.0, 0.0),
                          np.random.default_rng(0))
        assert np.allclose(sample.costs, [-2.5, -2.5])

    def test_noise_variance_bracket(self, game_a):
        noise = NoiseModel(0.0, 25.0)
        rng = np.random.default_rng(123)
        x = np.array([0.5, 0.25])
        true = game_a.all_costs(x)
        draws = np.array([feedback(game_a, x, noise, rng).costs - true
                          for _ in range(10_000)])
        var = draws.var()
        assert 23.0 <= var <= 27.0

    def test_fixed_seed_reproducible(self, game_a):
        s1 = feedback(game_a, [0.1, 0.2], NoiseModel(0.0, 4.0), np.random.default_rng(9))
        s2 = feedback(game_a, [0.1, 0.2], NoiseModel(0.0, 4.0), np.random.default_rng(9))
        assert np.array_equal(s1.costs, s2.costs)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(0.0, -1.0)


class TestPerfect:
    def test_observe_is_noop_and_estimate_exact(self, game_a):
        est = PerfectEstimator(game_a)
        est.observe(FeedbackSample(t=1, x=np.zeros(2), costs=np.zeros(2)))
        for x in ([0.0, 0.0], [1.0, 1.0], [0.3, -0.7]):
            assert np.array_equal(est.estimate_gradient(x), game_a.pseudo_gradient(x))


class TestLeastSquares:
    def test_feature_row_hand_example(self):
        # agent 0 of a two-agent scalar game at x = (1, 1)
        row = _features_for_agent((1, 1), np.array([0, 1, 2]), 0, np.array([1.0, 1.0]))
        assert np.allclose(row, [0.5, 1.0, 1.0])

    def test_history_grows_by_one_per_observe(self, game_a):
        est = LeastSquaresEstimator(game_a.dims)
        rng = np.random.default_rng(1)
        for k in range(5):
            assert est.history_length == k
            est.observe(feedback(game_a, rng.uniform(0, 1, 2), NoiseModel(), rng, t=k))
        assert est.history_length == 5

    def test_empty_history_returns_zero(self, game_a):
        est = LeastSquaresEstimator(game_a.dims)
        assert np.array_equal(est.estimate_gradient([0.4, 0.2]), np.zeros(2))

    def test_noiseless_identification_on_game_a(self, game_a, geom_a):
        est = LeastSquaresEstimator(game_a.dims, ridge=1e-10)
        rng = np.random.default_rng(2)
        points = [geom_a.sample_feasible(rng) for _ in range(20)]
        observe_points(est, game_a, points)
        for _ in range(10):
            x = geom_a.sample_feasible(rng)
            err = np.linalg.norm(est.estimate_gradient(x) - game_a.pseudo_gradient(x))
            assert err <= 1e-6

    def test_noisy_error_decreases_with_samples(self):
        # median over 20 seeds of the error at a fixed probe point, for
        # growing sample counts; identification sharpens as data accumulates
        rng_master = np.random.default_rng(3)
        game = random_game((1, 1), rng_master)
        x_test = np.array([0.4, 0.7])
        counts = (100, 1000, 10_000)
        errs = {c: [] for c in counts}
        for seed in range(20):
            rng = np.random.default_rng([4, seed])
            est = LeastSquaresEstimator(game.dims, ridge=1e-6)
            noise = NoiseModel(0.0, 1.0)
            done = 0
            for c in counts:
                for t in range(done, c):
                    x = rng.uniform(0.0, 1.0, 2)
                    est.observe(feedback(game, x, noise, rng, t=t))
                done = c
                errs[c].append(np.linalg.norm(
                    est.estimate_gradient(x_test) - game.pseudo_gradient(x_test)))
        medians = [np.median(errs[c]) for c in counts]
        assert medians[0] > medians[1] > medians[2]

    def test_symmetrized_blocks_form_admissible_game(self):
        rng = np.random.default_rng(5)
        game = random_game((2, 1, 2), rng)
        est = LeastSquaresEstimator(game.dims, ridge=1e-8)
        points = [rng.uniform(-1, 1, game.n) for _ in range(60)]
        observe_points(est, game, points, rng=rng, sigma2=0.5)
        implied = est.implied_game()
        assert validate_game(implied).ok

    def test_vector_dims_noiseless_identification(self):
        rng = np.random.default_rng(6)
        game = random_game((2, 3), rng)
        est = LeastSquaresEstimator(game.dims, ridge=1e-10)
        points = [rng.uniform(-1, 1, game.n) for _ in range(80)]
        observe_points(est, game, points)
        x = rng.uniform(-1, 1, game.n)
        assert np.linalg.norm(est.estimate_gradient(x) - game.pseudo_gradient(x)) <= 1e-6

    def test_window_limits_history(self, game_a):
        est = LeastSquaresEstimator(game_a.dims, window=10)
        rng = np.random.default_rng(7)
        for t in range(25):
            est.observe(feedback(game_a, rng.uniform(0, 1, 2), NoiseModel(), rng, t=t))
        assert est.history_length == 10


class TestGaussianProcess:
    def test_empty_history_returns_zero(self, game_a):
        est = GaussianProcessEstimator(game_a.dims)
        assert np.array_equal(est.estimate_gradient([0.1, 0.1]), np.zeros(2))

    def test_posterior_mean_interpolates_noiseless_costs(self, game_a, geom_a):
        # length scale matched to the data spread; the experiment defaults
        # (length 50 on a unit box) make K numerically low-rank, where exact
        # interpolation is not a meaningful target
        est = GaussianProcessEstimator(game_a.dims, length_scale=1.0,
                                       signal_scale=10.0, noise_variance=0.0)
        rng = np.random.default_rng(8)
        points = [geom_a.sample_feasible(rng) for _ in range(6)]
        observe_points(est, game_a, points)
        for x in points:
            pred = est.predict_costs(x)
            assert np.linalg.norm(pred - game_a.all_costs(x)) <= 1e-6

    def test_gradient_matches_finite_differences_of_mean(self, game_a, geom_a):
        est = GaussianProcessEstimator(game_a.dims, noise_variance=0.1)
        rng = np.random.default_rng(9)
        points = [geom_a.sample_feasible(rng) for _ in range(8)]
        observe_points(est, game_a, points, rng=rng, sigma2=0.1)
        x = geom_a.sample_feasible(rng)
        g = est.estimate_gradient(x)
        for i in range(2):
            def mean_i(xv, i=i):
                return est.predict_costs(xv)[i]
            fd = finite_diff_gradient(mean_i, x)
            assert g[i] == pytest.approx(fd[i], abs=1e-6)

    def test_history_window(self, game_a):
        est = GaussianProcessEstimator(game_a.dims, window=4)
        rng = np.random.default_rng(10)
        for t in range(9):
            est.observe(feedback(game_a, rng.uniform(0, 1, 2), NoiseModel(), rng, t=t))
        assert est.history_length == 4

    def test_kernel_scales_validated(self):
        with pytest.raises(ValueError):
            GaussianProcessEstimator((1, 1), length_scale=0.0)


class TestFactory:
    def test_kinds(self, game_a):
        assert isinstance(make_estimator("perfect", game_a), PerfectEstimator)
        assert isinstance(make_estimator("ls", game_a), LeastSquaresEstimator)
        assert isinstance(make_estimator("gp", game_a), GaussianProcessEstimator)

    def test_unknown_kind(self, game_a):
        with pytest.raises(ValueError):
            make_estimator("kriging", game_a)


class TestReconstructionDiagnostics:
    def test_perfect_estimator_measures_zero(self, game_a):
        diag = ReconstructionDiagnostics()
        est = PerfectEstimator(game_a)
        for x in ([0.0, 0.0], [0.5, 0.5], [1.0, 0.0]):
            assert diag.measure(game_a, est, x) == 0.0
        assert diag.envelope == [0.0, 0.0, 0.0]

    def test_envelope_nonincreasing(self):
        diag = ReconstructionDiagnostics(window=3)
        for err in [5.0, 3.0, 4.0, 1.0, 2.0, 0.5, 0.1, 0.1]:
            diag.record(err)
        env = np.asarray(diag.envelope)
        assert np.all(np.diff(env) <= 0)
        assert np.all(env[:len(env)] >= 0)

    def test_noiseless_ls_envelope_settles_small(self, game_a, geom_a):
        diag = ReconstructionDiagnostics(window=5)
        est = LeastSquaresEstimator(game_a.dims, ridge=1e-10)
        rng = np.random.default_rng(11)
        for t in range(30):
            est.observe(feedback(game_a, geom_a.sample_feasible(rng), NoiseModel(), rng, t=t))
            diag.measure(game_a, est, geom_a.sample_feasible(rng))
        assert diag.envelope[-1] <= 1e-6
