"""Offline evaluation and separability analysis.

Everything here is a pure batch function: confusion/accuracy summaries,
mean silhouette as the scalar separability metric, an exact O(N^2)
t-SNE for the 3D embeddings, and side-by-side iteration comparison
tables. Desk-scale point counts (<= 3000) keep the exact algorithms
tractable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import Intent, INTENTS, Recording
from .errors import EmptyEvaluation, TooFewPoints
from .sigproc import preprocess_block

MAX_EMBED_POINTS = 3000


def accuracy(confusion: np.ndarray) -> float:
    """trace / total of a 3x3 (true x predicted) count matrix."""
    confusion = np.asarray(confusion)
    total = confusion.sum()
    if total <= 0:
        raise EmptyEvaluation("confusion matrix has no counts")
    return float(np.trace(confusion) / total)


def silhouette(x: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient, Euclidean metric.

    s(i) = (b - a) / max(a, b) with a the mean intra-cluster distance
    and b the smallest mean distance to another cluster; 0 when both
    vanish (coincident duplicate clusters).
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise TooFewPoints(f"need >= 2 classes, got {len(classes)}")
    if counts.min() < 2:
        raise TooFewPoints("every class needs >= 2 points")

    dist = cdist(x, x)
    n = len(x)
    # per-point distance sums toward every class
    sums = np.empty((n, len(classes)))
    for j, c in enumerate(classes):
        sums[:, j] = dist[:, labels == c].sum(axis=1)

    scores = np.empty(n)
    class_index = {c: j for j, c in enumerate(classes)}
    count_of = dict(zip(classes.tolist(), counts.tolist()))
    for i in range(n):
        own = class_index[labels[i]]
        a = sums[i, own] / (count_of[labels[i]] - 1)
        b = min(
            sums[i, j] / counts[j]
            for j in range(len(classes))
            if j != own
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


@dataclass
class EmbeddingResult:
    points: np.ndarray             # (N, out_dims)
    labels: Optional[np.ndarray]   # (N,) intent codes, when provided
    kl_initial: float
    kl_final: float
    perplexity: float
    iterations: int
    seed: int
    entropy_errors: np.ndarray     # |H_i - log(perplexity)| per point


def _conditional_affinities(
    sq_dists: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point precision search so each conditional distribution hits
    log(perplexity) within tol; returns (row-normalized P, |H - target|)."""
    n = sq_dists.shape[0]
    target = math.log(perplexity)
    p = np.zeros((n, n))
    errors = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        d = sq_dists[i, idx != i]
        d = d - d.min()  # shift-invariant; keeps exp() in range
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        row = None
        for _ in range(max_steps):
            row = np.exp(-beta * d)
            z = row.sum()
            h = math.log(z) + beta * float((d * row).sum()) / z
            diff = h - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        errors[i] = abs(h - target)
        p[i, idx != i] = row / row.sum()
    return p, errors


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    eps = np.finfo(np.float64).tiny
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], eps))))


def _student_q(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t (1 dof) low-dimensional affinities and the kernel matrix."""
    sq = cdist(y, y, "sqeuclidean")
    w = 1.0 / (1.0 + sq)
    np.fill_diagonal(w, 0.0)
    q = w / w.sum()
    return q, w


def tsne(
    x: np.ndarray,
    perplexity: float = 30.0,
    out_dims: int = 3,
    iterations: int = 1000,
    seed: int = 0,
    labels: Optional[np.ndarray] = None,
    learning_rate: float = 200.0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    initial_momentum: float = 0.5,
    final_momentum: float = 0.8,
    momentum_switch_iter: int = 250,
    init_std: float = 1e-4,
    perplexity_tol: float = 1e-5,
) -> EmbeddingResult:
    """Exact t-SNE (no tree approximation).

    Pairwise affinities come from a per-point bisection matching the
    target perplexity within `perplexity_tol` on the log scale; the
    embedding starts from a small seeded Gaussian and runs plain
    momentum gradient descent with early exaggeration. KL(P||Q) is
    reported against the un-exaggerated P at start and end.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n > MAX_EMBED_POINTS:
        raise ValueError(f"{n} points exceeds the {MAX_EMBED_POINTS}-point desk-scale cap")
    if n < 3 * perplexity:
        raise TooFewPoints(f"need at least {math.ceil(3 * perplexity)} points, got {n}")

    sq = cdist(x, x, "sqeuclidean")
    p_cond, entropy_errors = _conditional_affinities(sq, perplexity, perplexity_tol)
    p = (p_cond + p_cond.T) / (2.0 * n)

    rng = np.random.default_rng(seed)
    y = init_std * rng.standard_normal((n, out_dims))
    update = np.zeros_like(y)

    q, _ = _student_q(y)
    kl_initial = _kl_divergence(p, q)

    p_run = p * early_exaggeration
    for it in range(iterations):
        if it == exaggeration_iters:
            p_run = p
        q, w = _student_q(y)
        pq = (p_run - q) * w
        grad = 4.0 * (pq.sum(axis=1)[:, None] * y - pq @ y)
        momentum = initial_momentum if it < momentum_switch_iter else final_momentum
        update = momentum * update - learning_rate * grad
        y = y + update

    q, _ = _student_q(y)
    kl_final = _kl_divergence(p, q)
    return EmbeddingResult(
        points=y,
        labels=None if labels is None else np.asarray(labels),
        kl_initial=kl_initial,
        kl_final=kl_final,
        perplexity=perplexity,
        iterations=iterations,
        seed=seed,
        entropy_errors=entropy_errors,
    )


@dataclass
class EmbeddingSample:
    x: np.ndarray
    labels: np.ndarray
    # intent -> (requested, available) for classes that came up short
    shortfall: dict[Intent, tuple[int, int]]


def sample_for_embedding(
    recordings: Sequence[Recording],
    per_intent: int,
    seed: int = 0,
    preprocessed: bool = True,
) -> EmbeddingSample:
    """Uniform per-intent sample, without replacement, of labeled samples.

    Classes with fewer than `per_intent` labeled samples contribute all
    they have and are flagged in `shortfall`.
    """
    xs, ys = [], []
    for rec in recordings:
        x, y = rec.labeled_arrays()
        xs.append(x)
        ys.append(y)
    if not xs:
        raise TooFewPoints("no recordings given")
    x_all = np.concatenate(xs)
    y_all = np.concatenate(ys)
    rng = np.random.default_rng(seed)
    picked_x, picked_y = [], []
    shortfall: dict[Intent, tuple[int, int]] = {}
    for intent in INTENTS:
        idx = np.flatnonzero(y_all == int(intent))
        if len(idx) == 0:
            shortfall[intent] = (per_intent, 0)
            continue
        if len(idx) < per_intent:
            shortfall[intent] = (per_intent, len(idx))
            chosen = idx
        else:
            chosen = rng.choice(idx, size=per_intent, replace=False)
        picked_x.append(x_all[chosen])
        picked_y.append(y_all[chosen])
    x = np.concatenate(picked_x)
    y = np.concatenate(picked_y)
    if preprocessed:
        x = preprocess_block(x)
    return EmbeddingSample(x=x, labels=y, shortfall=shortfall)


def write_embedding(result: EmbeddingResult, path: str | Path) -> None:
    """Plot-ready point file: one `x,y,z,label` row per embedded point."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "label"])
        labels = result.labels if result.labels is not None else np.full(len(result.points), -1)
        for row, lab in zip(result.points, labels):
            name = Intent(int(lab)).wire_name if int(lab) >= 0 else "none"
            writer.writerow([repr(float(v)) for v in row] + [name])


@dataclass
class ComparisonRow:
    metric: str
    value_1: float
    value_2: float

    @property
    def delta(self) -> float:
        return self.value_2 - self.value_1


@dataclass
class IterationComparison:
    iteration_1: int
    iteration_2: int
    rows: list[ComparisonRow]

    def format_text(self) -> str:
        def fmt(metric: str, v: float, signed: bool = False) -> str:
            if "variance" in metric:
                return f"{v:+.1e}" if signed else f"{v:.1e}"
            return f"{v:+.2f}" if signed else f"{v:.2f}"

        header = f"{'metric':<24}{'iter ' + str(self.iteration_1):>12}{'iter ' + str(self.iteration_2):>12}{'delta':>12}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.metric:<24}{fmt(r.metric, r.value_1):>12}{fmt(r.metric, r.value_2):>12}"
                f"{fmt(r.metric, r.delta, signed=True):>12}"
            )
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", f"iteration_{self.iteration_1}", f"iteration_{self.iteration_2}", "delta"])
            for r in self.rows:
                writer.writerow([r.metric, repr(r.value_1), repr(r.value_2), repr(r.delta)])


def iteration_comparison(report1, report2) -> IterationComparison:
    """Side-by-side accuracy/variance/silhouette rows with deltas."""
    rows = [
        ComparisonRow("test_accuracy", report1.test_accuracy, report2.test_accuracy),
        ComparisonRow("raw_accuracy", report1.raw_accuracy, report2.raw_accuracy),
        ComparisonRow("weight_variance_open", report1.weight_variance_open, report2.weight_variance_open),
        ComparisonRow("silhouette", report1.silhouette, report2.silhouette),
    ]
    return IterationComparison(report1.iteration, report2.iteration, rows)
