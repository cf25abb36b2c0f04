import numpy as np
import pytest
from scipy.stats import multivariate_normal

from intentloop.core import Intent
from intentloop.errors import ClassAbsent, SingularCovariance
from intentloop.lda import (
    LabeledDataset,
    LdaModel,
    fit,
    load_model,
    predict_proba,
    predict_proba_block,
    save_model,
    weight_matrix,
    weight_variance,
)

from conftest import three_class_dataset


def gaussian_bayes_posterior(model, x):
    """Oracle: evaluate N(x; mu_k, cov_shrunk) * pi_k directly and normalize."""
    dens = np.array([
        multivariate_normal.pdf(x, mean=model.means[k], cov=model.cov_shrunk) * model.priors[k]
        for k in range(3)
    ])
    return dens / dens.sum()


def random_labeled(rng, n_per_class=100, d=8, sep=1.0):
    x, y = [], []
    for k in range(3):
        mean = rng.normal(scale=sep, size=d)
        a = rng.normal(size=(d, d))
        cov = a @ a.T / d + 0.5 * np.eye(d)
        x.append(rng.multivariate_normal(mean, cov, size=n_per_class))
        y.append(np.full(n_per_class, k))
    return LabeledDataset(np.concatenate(x), np.concatenate(y))


class TestFit:
    def test_separable_blobs_2d_perfect_training_accuracy(self, rng):
        x, y = three_class_dataset(rng, n_per_class=100, d=2, spread=0.05, sep=10.0)
        model = fit(LabeledDataset(x, y), shrinkage=0.0)
        pred = predict_proba_block(model, x).argmax(axis=1)
        assert (pred == y).all()

    def test_identical_samples_singular(self):
        x = np.tile(np.arange(8.0), (12, 1))
        y = np.repeat([0, 1, 2], 4)
        with pytest.raises(SingularCovariance):
            fit(LabeledDataset(x, y), shrinkage=0.0)

    def test_missing_class_raises(self, rng):
        x = rng.normal(size=(20, 8))
        y = np.repeat([0, 1], 10)
        with pytest.raises(ClassAbsent):
            fit(LabeledDataset(x, y))

    def test_single_sample_class_raises(self, rng):
        x = rng.normal(size=(21, 8))
        y = np.array([0] * 10 + [1] * 10 + [2])
        with pytest.raises(ClassAbsent):
            fit(LabeledDataset(x, y))

    def test_empirical_priors_are_frequencies(self, rng):
        x = rng.normal(size=(100, 8))
        y = np.array([0] * 50 + [1] * 30 + [2] * 20)
        model = fit(LabeledDataset(x, y))
        assert model.priors.tolist() == [0.5, 0.3, 0.2]

    def test_uniform_priors_option(self, rng):
        x = rng.normal(size=(100, 8))
        y = np.array([0] * 50 + [1] * 30 + [2] * 20)
        model = fit(LabeledDataset(x, y), uniform_priors=True)
        assert np.allclose(model.priors, 1 / 3)

    def test_weights_consistent_with_means(self, rng):
        data = random_labeled(rng)
        model = fit(data, shrinkage=1e-3)
        residual = model.cov_shrunk @ model.weights.T - model.means.T
        assert np.abs(residual).max() < 1e-12

    def test_shrinkage_one_is_spherical(self, rng):
        data = random_labeled(rng)
        model = fit(data, shrinkage=1.0)
        expected = (np.trace(model.cov) / 8) * np.eye(8)
        assert np.allclose(model.cov_shrunk, expected)

    def test_permutation_bit_identical(self, rng):
        data = random_labeled(rng, n_per_class=50)
        perm = rng.permutation(len(data.x))
        model_a = fit(data)
        model_b = fit(LabeledDataset(data.x[perm], data.y[perm]))
        for field in ("means", "cov", "cov_shrunk", "priors", "weights", "biases"):
            assert np.array_equal(getattr(model_a, field), getattr(model_b, field)), field


class TestPredictProba:
    def test_matches_gaussian_bayes_oracle(self, rng):
        data = random_labeled(rng)
        model = fit(data, shrinkage=1e-3)
        worst = 0.0
        for _ in range(200):
            x = rng.uniform(-1, 1, size=8)
            got = np.array(predict_proba(model, x))
            want = gaussian_bayes_posterior(model, x)
            worst = max(worst, np.abs(got - want).max())
        assert worst < 1e-9

    def test_block_matches_scalar(self, rng):
        data = random_labeled(rng)
        model = fit(data)
        xs = rng.uniform(-1, 1, size=(50, 8))
        block = predict_proba_block(model, xs)
        rows = np.stack([np.array(predict_proba(model, x)) for x in xs])
        assert np.allclose(block, rows, atol=1e-15)

    def test_own_mean_wins_under_symmetry(self, rng):
        # symmetric class geometry, equal priors
        means = np.zeros((3, 8))
        means[0, 0], means[1, 1], means[2, 2] = 1.0, 1.0, 1.0
        x = np.concatenate([
            rng.multivariate_normal(means[k], 0.1 * np.eye(8), size=60) for k in range(3)
        ])
        y = np.repeat([0, 1, 2], 60)
        model = fit(LabeledDataset(x, y), uniform_priors=True)
        p = predict_proba(model, model.means[1])
        assert p.p_open > p.p_relax and p.p_open > p.p_close

    def test_bias_shift_invariance(self, rng):
        data = random_labeled(rng)
        model = fit(data)
        shifted = LdaModel(
            means=model.means, cov=model.cov, cov_shrunk=model.cov_shrunk,
            priors=model.priors, weights=model.weights,
            biases=model.biases + 123.456, shrinkage=model.shrinkage,
        )
        for _ in range(20):
            x = rng.uniform(-1, 1, size=8)
            a = np.array(predict_proba(model, x))
            b = np.array(predict_proba(shifted, x))
            assert np.allclose(a, b, atol=1e-12)

    def test_valid_probability_vector(self, rng):
        data = random_labeled(rng)
        model = fit(data)
        for _ in range(100):
            p = predict_proba(model, rng.uniform(-1, 1, size=8))
            p.validate()


class TestWeights:
    def test_rows_in_intent_order(self, rng):
        data = random_labeled(rng)
        model = fit(data)
        w = weight_matrix(model)
        assert w.shape == (3, 8)
        assert np.array_equal(w, model.weights)

    def test_input_scaling_rescales_weights(self, rng):
        data = random_labeled(rng)
        s = 4.0
        model = fit(data, shrinkage=0.0)
        scaled = fit(LabeledDataset(data.x * s, data.y), shrinkage=0.0)
        assert np.allclose(scaled.weights, model.weights / s, rtol=1e-9)
        for _ in range(20):
            x = rng.uniform(-1, 1, size=8)
            a = np.array(predict_proba(model, x)).argmax()
            b = np.array(predict_proba(scaled, x * s)).argmax()
            assert a == b

    def test_single_discriminative_channel_dominates(self, rng):
        n = 200
        x = rng.normal(scale=0.05, size=(3 * n, 8))
        x[n:2 * n, 3] += 2.0  # only channel 3 separates open
        y = np.repeat([0, 1, 2], n)
        model = fit(LabeledDataset(x, y))
        w_open = np.abs(model.weights[int(Intent.OPEN)])
        assert w_open[3] > w_open[np.arange(8) != 3].max()

    def test_weight_variance_zero_for_flat_row(self):
        model = LdaModel(
            means=np.zeros((3, 8)), cov=np.eye(8), cov_shrunk=np.eye(8),
            priors=np.full(3, 1 / 3), weights=np.ones((3, 8)), biases=np.zeros(3),
            shrinkage=0.0,
        )
        assert weight_variance(model, Intent.OPEN) == 0.0

    def test_weight_variance_alternating_row(self):
        w = np.ones((3, 8))
        w[1] = [1, -1, 1, -1, 1, -1, 1, -1]
        model = LdaModel(
            means=np.zeros((3, 8)), cov=np.eye(8), cov_shrunk=np.eye(8),
            priors=np.full(3, 1 / 3), weights=w, biases=np.zeros(3), shrinkage=0.0,
        )
        assert weight_variance(model, Intent.OPEN) == 1.0


class TestPersistence:
    def test_round_trip(self, tmp_path, rng):
        model = fit(random_labeled(rng))
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        for field in ("means", "cov", "cov_shrunk", "priors", "weights", "biases"):
            assert np.array_equal(getattr(model, field), getattr(back, field)), field
        assert back.shrinkage == model.shrinkage

    def test_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_model(path)
