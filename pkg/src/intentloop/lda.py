"""Linear discriminant analysis over preprocessed EMG vectors.

Shared-covariance LDA with a Gaussian posterior: discriminants
delta_k(x) = w_k.x + b_k with w_k = S^-1 mu_k and
b_k = -0.5 mu_k.S^-1.mu_k + ln pi_k, where S is the pooled within-class
covariance shrunk toward (trace(S)/d) I. Class probabilities are
softmax(delta), which for a shared covariance equals the exact Gaussian
Bayes posterior.

Sample accumulation happens in a canonical order (class code, then rows
sorted lexicographically) so that fitting is bit-for-bit invariant to
the order of the training set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .core import Intent, INTENTS
from .errors import ClassAbsent, SingularCovariance
from .sigproc import ProbVector

N_CLASSES = 3
DEFAULT_SHRINKAGE = 1e-3

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabeledDataset:
    """Preprocessed samples x (N, d) with intent codes y (N,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.y.ndim != 1 or len(self.x) != len(self.y):
            raise ValueError(f"bad dataset shapes x{self.x.shape}, y{self.y.shape}")

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y.astype(np.int64), minlength=N_CLASSES)


@dataclass(frozen=True)
class LdaModel:
    means: np.ndarray        # (3, d) per-class means
    cov: np.ndarray          # (d, d) pooled within-class covariance
    cov_shrunk: np.ndarray   # (d, d) regularized covariance
    priors: np.ndarray       # (3,)
    weights: np.ndarray      # (3, d) rows solve cov_shrunk w_k = mu_k
    biases: np.ndarray       # (3,)
    shrinkage: float

    @property
    def n_features(self) -> int:
        return self.means.shape[1]


def _canonical_order(x: np.ndarray) -> np.ndarray:
    # lexicographic row sort; keys are passed last-to-first to lexsort
    return np.lexsort(tuple(x[:, i] for i in range(x.shape[1] - 1, -1, -1)))


def fit(data: LabeledDataset, shrinkage: float = DEFAULT_SHRINKAGE,
        uniform_priors: bool = False) -> LdaModel:
    """Fit the shared-covariance LDA.

    Pooled covariance divides the summed within-class scatter by
    (N - n_classes). shrinkage gamma blends it with (trace/d) I.
    """
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError(f"shrinkage must lie in [0, 1], got {shrinkage}")
    x = np.asarray(data.x, dtype=np.float64)
    y = np.asarray(data.y, dtype=np.int64)
    n, d = x.shape
    counts = data.class_counts()
    for intent in INTENTS:
        if counts[intent] < 2:
            raise ClassAbsent(
                f"class {intent.wire_name} has {counts[intent]} samples; need at least 2"
            )

    means = np.empty((N_CLASSES, d))
    scatter = np.zeros((d, d))
    for k in range(N_CLASSES):
        xk = x[y == k]
        xk = xk[_canonical_order(xk)]
        mu = xk.mean(axis=0)
        means[k] = mu
        centered = xk - mu
        scatter += centered.T @ centered
    cov = scatter / (n - N_CLASSES)
    gamma = float(shrinkage)
    cov_shrunk = (1.0 - gamma) * cov + gamma * (np.trace(cov) / d) * np.eye(d)

    if uniform_priors:
        priors = np.full(N_CLASSES, 1.0 / N_CLASSES)
    else:
        priors = counts / n

    try:
        factor = cho_factor(cov_shrunk, lower=True)
    except LinAlgError as e:
        raise SingularCovariance(f"shrunk covariance is not positive definite: {e}") from e
    weights = cho_solve(factor, means.T).T
    biases = -0.5 * np.einsum("kd,kd->k", means, weights) + np.log(priors)
    return LdaModel(means, cov, cov_shrunk, priors, weights, biases, gamma)


def discriminants(model: LdaModel, x: np.ndarray) -> np.ndarray:
    return model.weights @ x + model.biases


def predict_proba(model: LdaModel, x: np.ndarray) -> ProbVector:
    """softmax of the discriminants for one preprocessed sample."""
    scores = model.weights @ x + model.biases
    scores = scores - scores.max()
    e = np.exp(scores)
    p = e / e.sum()
    return ProbVector(p[0], p[1], p[2])


def predict_proba_block(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """Vectorized posterior over an (N, d) block; returns (N, 3)."""
    scores = x @ model.weights.T + model.biases
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=1, keepdims=True)


def weight_matrix(model: LdaModel) -> np.ndarray:
    """Per-electrode linear coefficients, rows in relax/open/close order."""
    return model.weights.copy()


def weight_variance(model: LdaModel, intent: Intent) -> float:
    """Population variance (divide by d) of the intent's weight row."""
    return float(np.var(model.weights[int(intent)]))


def save_model(model: LdaModel, path: str | Path) -> None:
    doc = {
        "format": "intentloop-lda",
        "version": MODEL_FORMAT_VERSION,
        "shrinkage": model.shrinkage,
        "priors": model.priors.tolist(),
        "means": model.means.tolist(),
        "cov": model.cov.tolist(),
        "cov_shrunk": model.cov_shrunk.tolist(),
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path: str | Path) -> LdaModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "intentloop-lda":
        raise ValueError(f"{path}: not a classifier file")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported classifier version {doc.get('version')}")
    return LdaModel(
        means=np.array(doc["means"]),
        cov=np.array(doc["cov"]),
        cov_shrunk=np.array(doc["cov_shrunk"]),
        priors=np.array(doc["priors"]),
        weights=np.array(doc["weights"]),
        biases=np.array(doc["biases"]),
        shrinkage=float(doc["shrinkage"]),
    )
