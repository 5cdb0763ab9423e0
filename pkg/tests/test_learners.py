import numpy as np
import pytest

from minshap import Dataset, LearnerError, LearnerSpec, RngStream, SimConfig, generate
from minshap.learners import FittedModel, RidgePredictor, dropout_value, fit, split_rows, value

from oracles import gaussian_conditional_variance


class TestLearnerSpec:
    def test_defaults_filled(self):
        spec = LearnerSpec("boosted-trees")
        assert spec.hyperparams == {
            "n_trees": 300, "max_depth": 3, "learning_rate": 0.1, "subsample": 0.8,
        }
        assert LearnerSpec("ridge").hyperparams == {"lam": 1e-8}

    def test_json_round_trip(self):
        spec = LearnerSpec.boosted_trees(n_trees=50, eval_mode="dropout", holdout_fraction=0.2)
        again = LearnerSpec.from_json(spec.to_json())
        assert again == spec
        assert set(spec.to_json()) == {"kind", "hyperparams", "eval_mode", "holdout_fraction"}

    def test_validation(self):
        with pytest.raises(ValueError):
            LearnerSpec("svm")
        with pytest.raises(ValueError):
            LearnerSpec("ridge", eval_mode="both")
        with pytest.raises(ValueError):
            LearnerSpec("ridge", holdout_fraction=1.0)
        with pytest.raises(ValueError):
            LearnerSpec.ridge(lam=-1.0)
        with pytest.raises(ValueError):
            LearnerSpec("ridge", {"alpha": 1.0})


class TestFit:
    def test_exact_linear_recovery(self, small_linear):
        model = fit(LearnerSpec.ridge(lam=0.0), small_linear, [0], RngStream(0))
        assert model.predictor.coef[0] == pytest.approx(2.0, abs=1e-8)

    def test_null_model_predicts_training_mean(self, small_linear):
        y = np.full(60, 3.5)
        data = Dataset(small_linear.features, small_linear.feature_names, y)
        for spec in (LearnerSpec.ridge(), LearnerSpec.boosted_trees(n_trees=5)):
            model = fit(spec, data, [], RngStream(0))
            assert model.predictor.predict(data.features) == pytest.approx(3.5)

    def test_degenerate_response_allowed(self, small_linear):
        y = np.zeros(60)
        data = Dataset(small_linear.features, small_linear.feature_names, y)
        model = fit(LearnerSpec.ridge(), data, [], RngStream(0))
        mse, _ = value(model, data)
        assert mse == 0.0

    def test_boosted_training_mse_below_variance(self):
        data, _ = generate(SimConfig(model="c", n=3000, seed=5), RngStream(5))
        spec = LearnerSpec.boosted_trees(n_trees=400, max_depth=3)
        model = fit(spec, data, range(data.p), RngStream(5))
        mse, _ = value(model, data)
        # independent oracle: the no-model baseline is the sample variance
        var_y = float(((data.response - data.response.mean()) ** 2).mean())
        assert mse < var_y

    def test_subset_validation(self, small_linear):
        with pytest.raises(ValueError):
            fit(LearnerSpec.ridge(), small_linear, [0, 0], RngStream(0))
        with pytest.raises(ValueError):
            fit(LearnerSpec.ridge(), small_linear, [7], RngStream(0))

    def test_deterministic_predictions(self, noisy_data):
        spec = LearnerSpec.boosted_trees(n_trees=25)
        a = fit(spec, noisy_data, [0, 2], RngStream(3))
        b = fit(spec, noisy_data, [0, 2], RngStream(3))
        assert np.array_equal(
            a.predictor.predict(noisy_data.features),
            b.predictor.predict(noisy_data.features),
        )

    def test_null_dominance_with_ridge_ols(self, noisy_data):
        # On training data, least squares can only reduce error vs the mean.
        spec = LearnerSpec.ridge(lam=0.0)
        null_mse, _ = value(fit(spec, noisy_data, [], RngStream(0)), noisy_data)
        for subset in ([0], [1, 3], [0, 1, 2, 3]):
            mse, _ = value(fit(spec, noisy_data, subset, RngStream(0)), noisy_data)
            assert mse <= null_mse + 1e-9


class TestValue:
    def test_null_model_arithmetic(self):
        data = Dataset([[0.0], [1.0]], ("a",), [3.0, 4.0])
        model = fit(LearnerSpec.ridge(), data, [], RngStream(0))
        mse, sq = value(model, data)
        assert mse == pytest.approx(0.25)
        assert sq.tolist() == [0.25, 0.25]

    def test_perfect_predictor(self, small_linear):
        model = fit(LearnerSpec.ridge(lam=0.0), small_linear, [0, 1], RngStream(0))
        mse, sq = value(model, small_linear)
        assert mse == pytest.approx(0.0, abs=1e-18)
        assert np.all(sq >= 0.0)

    def test_chain_single_feature_matches_conditional_variance(self, chain_data):
        data, _ = chain_data
        model = fit(LearnerSpec.ridge(), data, [2], RngStream(0))
        mse, _ = value(model, data)
        assert mse == pytest.approx(1.0, abs=0.03)
        oracle = gaussian_conditional_variance(data.features, data.response, [2])
        assert mse == pytest.approx(oracle, abs=1e-4)

    def test_column_count_mismatch(self, small_linear):
        model = fit(LearnerSpec.ridge(), small_linear, [0], RngStream(0))
        other = Dataset(np.ones((4, 2)) * [[1, 2], [3, 4], [5, 6], [7, 8]],
                        ("a", "b"), [1.0, 2.0, 3.0, 4.0])
        with pytest.raises(ValueError, match="columns"):
            value(model, other)

    def test_holdout_scores_held_out_rows_only(self, noisy_data):
        spec = LearnerSpec.ridge(holdout_fraction=0.25)
        model = fit(spec, noisy_data, [0], RngStream(4))
        assert len(model.eval_idx) == 30
        assert len(model.train_idx) == 90
        assert not set(model.eval_idx) & set(model.train_idx)
        _, sq = value(model, noisy_data)
        assert len(sq) == 30


class TestDropoutValue:
    def _dropout_spec(self, **kw):
        return LearnerSpec.ridge(eval_mode="dropout", **kw)

    def test_full_subset_equals_value_exactly(self, noisy_data):
        model = fit(self._dropout_spec(), noisy_data, range(4), RngStream(1))
        v_ref, sq_ref = value(model, noisy_data)
        v_drop, sq_drop = dropout_value(model, noisy_data, range(4))
        assert v_drop == v_ref
        assert np.array_equal(sq_drop, sq_ref)

    def test_empty_subset_on_centered_features_gives_intercept(self):
        gen = np.random.default_rng(0)
        X = gen.standard_normal((200, 2))
        X -= X.mean(axis=0)
        y = 2 * X[:, 0] + X[:, 1] + 1.5
        data = Dataset(X, ("a", "b"), y)
        model = fit(self._dropout_spec(lam=0.0), data, range(2), RngStream(0))
        _, _ = value(model, data)
        pred_empty = model.predictor.predict(
            np.tile(model.train_column_means, (3, 1))
        )
        assert pred_empty == pytest.approx(model.predictor.intercept, abs=1e-10)
        v_empty, _ = dropout_value(model, data, [])
        assert v_empty == pytest.approx(float(((y - model.predictor.intercept) ** 2).mean()), abs=1e-10)

    def test_hand_computed_imputation(self):
        # prediction = 2 * mean(a) + 1 * x_b = 2*0.5 + 4 = 5 for row (3, 4)
        data = Dataset([[3.0, 4.0], [0.0, 0.0]], ("a", "b"), [5.0, 0.0])
        model = FittedModel(
            subset=(0, 1),
            predictor=RidgePredictor((0, 1), np.array([2.0, 1.0]), 0.0),
            spec=self._dropout_spec(),
            p_fit=2,
            n_fit=2,
            train_idx=np.arange(2),
            eval_idx=np.arange(2),
            train_column_means=np.array([0.5, -1.0]),
        )
        _, sq = dropout_value(model, data, [1])
        pred_row0 = 2 * 0.5 + 4.0
        assert sq[0] == pytest.approx((5.0 - pred_row0) ** 2)

    def test_missing_means_is_invalid_state(self, noisy_data):
        model = fit(LearnerSpec.ridge(), noisy_data, range(4), RngStream(0))
        with pytest.raises(LearnerError, match="column means"):
            dropout_value(model, noisy_data, [0])

    def test_partial_model_rejected(self, noisy_data):
        model = fit(self._dropout_spec(), noisy_data, [0, 1], RngStream(0))
        with pytest.raises(LearnerError, match="all features"):
            dropout_value(model, noisy_data, [0])


class TestSplitRows:
    def test_plugin_split_is_identity(self):
        train, evl = split_rows(10, 0.0, RngStream(0))
        assert np.array_equal(train, np.arange(10))
        assert np.array_equal(evl, np.arange(10))

    def test_too_small_holdout_rejected(self):
        with pytest.raises(ValueError):
            split_rows(5, 0.1, RngStream(0))

    def test_partition(self):
        train, evl = split_rows(40, 0.3, RngStream(2))
        assert len(evl) == 12 and len(train) == 28
        assert sorted(np.concatenate([train, evl]).tolist()) == list(range(40))
