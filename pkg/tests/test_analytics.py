import numpy as np
import pytest

from intentloop.analytics import (
    EmbeddingResult,
    accuracy,
    iteration_comparison,
    sample_for_embedding,
    silhouette,
    tsne,
    write_embedding,
)
from intentloop.core import FREE_CONDITION, Intent, Recording, Role, EmgSample
from intentloop.errors import EmptyEvaluation, TooFewPoints
from intentloop.session import IterationReport


def naive_silhouette(x, labels):
    """Oracle: per-point loops, no vectorization."""
    n = len(x)
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        a = float(np.mean([np.linalg.norm(x[i] - x[j]) for j in same]))
        bs = []
        for c in sorted(set(labels) - {labels[i]}):
            others = [j for j in range(n) if labels[j] == c]
            bs.append(float(np.mean([np.linalg.norm(x[i] - x[j]) for j in others])))
        b = min(bs)
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return float(np.mean(scores))


def three_clusters(rng, n_per=100, d=8, sep=2.0, scale=0.05):
    centers = np.zeros((3, d))
    centers[1, 0] = sep
    centers[2, 1] = sep
    x = np.concatenate([
        rng.normal(loc=centers[k], scale=scale, size=(n_per, d)) for k in range(3)
    ])
    labels = np.repeat([0, 1, 2], n_per)
    return x, labels


class TestAccuracy:
    def test_diagonal_is_one(self):
        assert accuracy(np.diag([5, 7, 9])) == 1.0

    def test_uniform_is_third(self):
        assert accuracy(np.ones((3, 3))) == pytest.approx(1 / 3)

    def test_hand_computed_case(self):
        confusion = np.array([[50, 0, 0], [10, 30, 10], [0, 0, 50]])
        assert accuracy(confusion) == pytest.approx(130 / 150)

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            accuracy(np.zeros((3, 3)))


class TestSilhouette:
    def test_matches_naive_oracle(self, rng):
        for _ in range(5):
            x = rng.normal(size=(60, 4))
            labels = rng.integers(0, 3, size=60)
            # ensure every class has at least 2 members
            labels[:6] = [0, 0, 1, 1, 2, 2]
            assert silhouette(x, labels) == pytest.approx(naive_silhouette(x, labels), abs=1e-12)

    def test_far_tight_clusters_near_one(self, rng):
        x = np.concatenate([
            rng.normal(loc=0.0, scale=0.1, size=(50, 8)),
            rng.normal(loc=10.0, scale=0.1, size=(50, 8)),
        ])
        labels = np.repeat([0, 1], 50)
        assert silhouette(x, labels) > 0.9

    def test_random_labels_near_zero(self):
        rng = np.random.default_rng(2024)
        x = rng.normal(size=(600, 8))
        labels = rng.integers(0, 2, size=600)
        assert abs(silhouette(x, labels)) < 0.05

    def test_duplicated_points_two_clusters(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]])
        labels = np.array([0, 0, 1, 1])
        assert silhouette(x, labels) == pytest.approx(1.0, abs=1e-12)

    def test_single_class_rejected(self, rng):
        with pytest.raises(TooFewPoints):
            silhouette(rng.normal(size=(10, 3)), np.zeros(10, dtype=int))

    def test_singleton_class_rejected(self, rng):
        labels = np.array([0] * 9 + [1])
        with pytest.raises(TooFewPoints):
            silhouette(rng.normal(size=(10, 3)), labels)


class TestTsne:
    def test_three_cluster_fixture_health(self, rng):
        x, labels = three_clusters(rng)
        result = tsne(x, perplexity=30.0, out_dims=3, iterations=500, seed=0, labels=labels)
        assert result.points.shape == (300, 3)
        assert result.kl_final < result.kl_initial
        assert result.entropy_errors.max() <= 1e-5
        assert silhouette(result.points, labels) > 0.5

    def test_duplicated_inputs_embed_together(self, rng):
        x, labels = three_clusters(rng, n_per=60)
        x[1] = x[0]  # exact duplicate pair
        result = tsne(x, perplexity=20.0, iterations=400, seed=3)
        d = np.linalg.norm(result.points[0] - result.points[1])
        from scipy.spatial.distance import pdist

        all_d = pdist(result.points)
        assert d < np.percentile(all_d, 1)

    def test_too_few_points(self, rng):
        with pytest.raises(TooFewPoints):
            tsne(rng.normal(size=(50, 8)), perplexity=30.0)

    def test_desk_scale_cap(self, rng):
        with pytest.raises(ValueError):
            tsne(rng.normal(size=(3001, 8)), perplexity=30.0)

    def test_seeded_determinism(self, rng):
        x, _ = three_clusters(rng, n_per=40)
        a = tsne(x, perplexity=10.0, iterations=100, seed=9)
        b = tsne(x, perplexity=10.0, iterations=100, seed=9)
        assert np.array_equal(a.points, b.points)
        assert a.kl_final == b.kl_final


def _recording_from_labeled(rng, n_per_intent):
    samples = []
    t = 0
    for intent, n in zip(Intent, n_per_intent):
        for _ in range(n):
            samples.append(EmgSample(t, rng.uniform(0, 1200, size=8), cue=intent))
            t += 20
    return Recording("r", 1, FREE_CONDITION, Role.TEST, samples)


class TestSampleForEmbedding:
    def test_full_sample_counts(self, rng):
        rec = _recording_from_labeled(rng, [1200, 1100, 1050])
        sample = sample_for_embedding([rec], per_intent=1000, seed=0)
        assert len(sample.x) == 3000
        assert not sample.shortfall
        counts = np.bincount(sample.labels, minlength=3)
        assert counts.tolist() == [1000, 1000, 1000]

    def test_shortfall_flagged(self, rng):
        rec = _recording_from_labeled(rng, [500, 1200, 1200])
        sample = sample_for_embedding([rec], per_intent=1000, seed=0)
        assert sample.shortfall == {Intent.RELAX: (1000, 500)}
        assert np.bincount(sample.labels, minlength=3).tolist() == [500, 1000, 1000]

    def test_same_seed_same_sample(self, rng):
        rec = _recording_from_labeled(rng, [800, 800, 800])
        a = sample_for_embedding([rec], per_intent=300, seed=5)
        b = sample_for_embedding([rec], per_intent=300, seed=5)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.labels, b.labels)

    def test_preprocessed_space(self, rng):
        rec = _recording_from_labeled(rng, [300, 300, 300])
        sample = sample_for_embedding([rec], per_intent=100, seed=0)
        assert sample.x.min() >= -1.0 and sample.x.max() <= 1.0
        raw = sample_for_embedding([rec], per_intent=100, seed=0, preprocessed=False)
        assert raw.x.max() > 1.0


def _report(iteration, acc, var, sil, raw=None):
    return IterationReport(
        iteration=iteration, test_accuracy=acc, confusion=np.eye(3, dtype=np.int64),
        weight_variance_open=var, silhouette=sil, raw_accuracy=raw if raw is not None else acc,
    )


class TestIterationComparison:
    def test_table_ii_analog_formatting(self):
        comparison = iteration_comparison(
            _report(1, 0.61, 7.8e-6, 0.2), _report(2, 0.88, 2.5e-4, 0.5)
        )
        text = comparison.format_text()
        assert "0.61" in text and "0.88" in text and "+0.27" in text
        assert "7.8e-06" in text and "2.5e-04" in text

    def test_identical_reports_zero_deltas(self):
        comparison = iteration_comparison(
            _report(1, 0.7, 1e-4, 0.3), _report(2, 0.7, 1e-4, 0.3)
        )
        assert all(r.delta == 0.0 for r in comparison.rows)

    def test_csv_round_trips_floats(self, tmp_path):
        comparison = iteration_comparison(
            _report(1, 0.61, 7.8e-6, 0.2), _report(2, 0.88, 2.5e-4, 0.5)
        )
        out = tmp_path / "cmp.csv"
        comparison.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "metric,iteration_1,iteration_2,delta"
        row = dict(zip(("metric", "v1", "v2", "d"), lines[1].split(",")))
        assert float(row["v1"]) == 0.61 and float(row["v2"]) == 0.88


class TestWriteEmbedding:
    def test_file_shape(self, tmp_path, rng):
        result = EmbeddingResult(
            points=rng.normal(size=(10, 3)),
            labels=np.array([0, 1, 2] * 3 + [0]),
            kl_initial=2.0, kl_final=1.0, perplexity=5.0, iterations=10, seed=0,
            entropy_errors=np.zeros(10),
        )
        out = tmp_path / "points.csv"
        write_embedding(result, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,y,z,label"
        assert len(lines) == 11
        assert lines[1].endswith("relax")
