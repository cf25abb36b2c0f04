import numpy as np
import pytest

from intentloop.core import (
    FREE_CONDITION,
    EmgSample,
    Recording,
    Role,
    default_cue_schedule,
    label_samples,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_recording(rng, n=3250, rec_id="rec0", iteration=1, condition=FREE_CONDITION,
                   role=Role.TEST, labeled=False):
    """Synthetic 50Hz recording; optionally labeled with the default schedule."""
    samples = [
        EmgSample(20 * i, rng.uniform(0.0, 1200.0, size=8))
        for i in range(n)
    ]
    rec = Recording(rec_id, iteration, condition, role, samples)
    if labeled:
        rec = label_samples(rec, default_cue_schedule())
    return rec


def gaussian_cloud(rng, mean, cov, n):
    return rng.multivariate_normal(mean, cov, size=n)


def three_class_dataset(rng, n_per_class=200, d=8, spread=1.0, sep=3.0):
    """Well-separated Gaussian blobs for classifier sanity tests."""
    means = np.zeros((3, d))
    means[1, 0] = sep
    means[2, 1] = sep
    cov = spread * np.eye(d)
    x = np.concatenate([gaussian_cloud(rng, means[k], cov, n_per_class) for k in range(3)])
    y = np.repeat([0, 1, 2], n_per_class)
    return x, y
