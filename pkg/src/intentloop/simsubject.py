"""Synthetic EMG subject for closed-loop experiments.

The subject holds one Gaussian generator per intent (mean vector in raw
device units, 8x8 covariance), plus additive per-condition offsets that
mimic how posture and device assistance shift the whole signal. Two
noise mechanisms make iteration-1 data hard the way real sessions are:
within-trial sample noise (the covariance) and trial-to-trial jitter of
the generator mean, drawn fresh at every cue block.

During practice the subject watches the feedback bars and climbs the
classifier's margin: the mean of the attempted intent moves along the
direction (in raw-unit space, through the clip/rescale map) that
increases that intent's discriminant over its strongest rival, scaled
by how far the bar is from full. A zero adaptation rate disables all
parameter movement, modeling subjects who never pick up the feedback.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ArmCondition, EmgSample, Intent, N_CHANNELS, SAMPLE_PERIOD_MS

RAW_FLOOR = 0.0
RAW_CEIL = 1200.0
PREPROCESS_SCALE = 1.0 / 500.0  # d(preprocessed)/d(raw) inside the clip window


@dataclass
class SubjectProfile:
    """Serializable generator parameters; the state a subject starts from."""

    mean_relax: np.ndarray
    mean_open: np.ndarray
    mean_close: np.ndarray
    cov_relax: np.ndarray
    cov_open: np.ndarray
    cov_close: np.ndarray
    condition_offsets: dict[str, np.ndarray]
    condition_noise_scale: dict[str, float]
    adaptation_rate: float = 0.0      # eta, raw units per practice frame
    drift_rate: float = 0.0           # rho, random-walk std per practice frame
    trial_jitter_std: float = 0.0     # sigma_trial, raw units
    perception_noise_std: float = 0.0 # optional noise on perceived weights
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "format": "intentloop-subject",
            "version": 1,
            "mean_relax": self.mean_relax.tolist(),
            "mean_open": self.mean_open.tolist(),
            "mean_close": self.mean_close.tolist(),
            "cov_relax": self.cov_relax.tolist(),
            "cov_open": self.cov_open.tolist(),
            "cov_close": self.cov_close.tolist(),
            "condition_offsets": {k: v.tolist() for k, v in self.condition_offsets.items()},
            "condition_noise_scale": dict(self.condition_noise_scale),
            "adaptation_rate": self.adaptation_rate,
            "drift_rate": self.drift_rate,
            "trial_jitter_std": self.trial_jitter_std,
            "perception_noise_std": self.perception_noise_std,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SubjectProfile":
        if doc.get("format") != "intentloop-subject":
            raise ValueError("not a subject profile document")
        arr = lambda k: np.asarray(doc[k], dtype=np.float64)
        return cls(
            mean_relax=arr("mean_relax"),
            mean_open=arr("mean_open"),
            mean_close=arr("mean_close"),
            cov_relax=arr("cov_relax"),
            cov_open=arr("cov_open"),
            cov_close=arr("cov_close"),
            condition_offsets={
                k: np.asarray(v, dtype=np.float64) for k, v in doc["condition_offsets"].items()
            },
            condition_noise_scale={k: float(v) for k, v in doc["condition_noise_scale"].items()},
            adaptation_rate=float(doc["adaptation_rate"]),
            drift_rate=float(doc["drift_rate"]),
            trial_jitter_std=float(doc["trial_jitter_std"]),
            perception_noise_std=float(doc["perception_noise_std"]),
            seed=int(doc["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "SubjectProfile":
        return cls.from_json(json.loads(Path(path).read_text()))


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix F with F F^T = cov; tolerates merely semi-definite inputs."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


class SimulatedSubject:
    """Stateful generator implementing the sample-source contract.

    All randomness flows through one PCG64 generator, so (seed, call
    sequence) fully determines every emitted sample and every adaptation
    step.
    """

    def __init__(self, profile: SubjectProfile):
        self.profile = profile
        self.means = np.stack(
            [profile.mean_relax.copy(), profile.mean_open.copy(), profile.mean_close.copy()]
        )
        self._factors = [
            _psd_factor(profile.cov_relax),
            _psd_factor(profile.cov_open),
            _psd_factor(profile.cov_close),
        ]
        self.eta = float(profile.adaptation_rate)
        self.rho = float(profile.drift_rate)
        self.trial_jitter_std = float(profile.trial_jitter_std)
        self.perception_noise_std = float(profile.perception_noise_std)
        self._rng = np.random.default_rng(profile.seed)
        self._trial_jitter = np.zeros(N_CHANNELS)
        self.adapt_steps = 0

    def _offset(self, condition: ArmCondition) -> np.ndarray:
        return self.profile.condition_offsets.get(condition.label, np.zeros(N_CHANNELS))

    def _noise_scale(self, condition: ArmCondition) -> float:
        return self.profile.condition_noise_scale.get(condition.label, 1.0)

    def begin_trial(self) -> None:
        """Redraw the trial-to-trial mean jitter; call at each cue onset."""
        if self.trial_jitter_std > 0.0:
            self._trial_jitter = self.trial_jitter_std * self._rng.standard_normal(N_CHANNELS)
        else:
            self._trial_jitter = np.zeros(N_CHANNELS)

    def emit(self, intent: Intent, condition: ArmCondition, t_ms: int) -> EmgSample:
        mean = self.means[intent] + self._offset(condition) + self._trial_jitter
        scale = np.sqrt(self._noise_scale(condition))
        x = mean + scale * (self._factors[intent] @ self._rng.standard_normal(N_CHANNELS))
        np.clip(x, RAW_FLOOR, RAW_CEIL, out=x)
        return EmgSample(int(t_ms), x, cue=intent)

    def emit_block(
        self,
        intent: Intent,
        condition: ArmCondition,
        t0_ms: int,
        n: int,
        period_ms: int = SAMPLE_PERIOD_MS,
    ) -> list[EmgSample]:
        mean = self.means[intent] + self._offset(condition) + self._trial_jitter
        scale = np.sqrt(self._noise_scale(condition))
        z = self._rng.standard_normal((n, N_CHANNELS))
        x = mean + scale * (z @ self._factors[intent].T)
        np.clip(x, RAW_FLOOR, RAW_CEIL, out=x)
        return [
            EmgSample(int(t0_ms + i * period_ms), x[i], cue=intent) for i in range(n)
        ]

    def adapt(
        self,
        frame,
        attempted: Intent,
        model_weights: np.ndarray,
        model_biases: Optional[np.ndarray] = None,
    ) -> None:
        """One feedback-driven update of the attempted intent's generator.

        The step follows the raw-space ascent direction of
        delta_attempted - max(other deltas), gated by (1 - bar), plus an
        unconditional small random walk on all generator means. With
        eta = 0 the subject is frozen entirely (no drift either): the
        non-adaptive subject must be stationary.
        """
        if attempted not in (Intent.OPEN, Intent.CLOSE):
            raise ValueError(f"practice attempts must be open or close, got {attempted}")
        if self.eta == 0.0:
            return
        weights = np.asarray(model_weights, dtype=np.float64)
        if self.perception_noise_std > 0.0:
            weights = weights + self.perception_noise_std * self._rng.standard_normal(weights.shape)

        m = self.means[attempted]
        x_pre = np.clip(m, 0.0, 1000.0) / 500.0 - 1.0
        scores = weights @ x_pre
        if model_biases is not None:
            scores = scores + model_biases
        scores[attempted] = -np.inf
        rival = int(np.argmax(scores))

        grad = (weights[int(attempted)] - weights[rival]) * PREPROCESS_SCALE
        # clipped channels contribute no gradient
        grad = grad * ((m > 0.0) & (m < 1000.0))
        norm = float(np.linalg.norm(grad))
        if norm > 0.0:
            bar = frame.bar_open if attempted is Intent.OPEN else frame.bar_close
            step = self.eta * (1.0 - bar)
            self.means[attempted] = self.means[attempted] + step * (grad / norm)
        if self.rho > 0.0:
            self.means += self.rho * self._rng.standard_normal(self.means.shape)
        np.clip(self.means, RAW_FLOOR, RAW_CEIL, out=self.means)
        self.adapt_steps += 1

    def snapshot(self) -> np.ndarray:
        """Copy of the current generator means stack (3, 8)."""
        return self.means.copy()

    def current_profile(self) -> SubjectProfile:
        """Profile reflecting the adapted generator means."""
        p = self.profile
        return SubjectProfile(
            mean_relax=self.means[0].copy(),
            mean_open=self.means[1].copy(),
            mean_close=self.means[2].copy(),
            cov_relax=p.cov_relax.copy(),
            cov_open=p.cov_open.copy(),
            cov_close=p.cov_close.copy(),
            condition_offsets={k: v.copy() for k, v in p.condition_offsets.items()},
            condition_noise_scale=dict(p.condition_noise_scale),
            adaptation_rate=p.adaptation_rate,
            drift_rate=p.drift_rate,
            trial_jitter_std=p.trial_jitter_std,
            perception_noise_std=p.perception_noise_std,
            seed=p.seed,
        )


def margin(means_row: np.ndarray, attempted: Intent, weights: np.ndarray,
           biases: Optional[np.ndarray] = None) -> float:
    """delta_attempted - max(other deltas) at a raw-space operating point."""
    x_pre = np.clip(means_row, 0.0, 1000.0) / 500.0 - 1.0
    scores = np.asarray(weights) @ x_pre
    if biases is not None:
        scores = scores + biases
    others = [scores[k] for k in range(3) if k != int(attempted)]
    return float(scores[int(attempted)] - max(others))


def _default_profile(seed: int, adaptation_rate: float, drift_rate: float) -> SubjectProfile:
    relax = np.full(N_CHANNELS, 140.0)
    # agonist channels 2,3 for open and 5,6 for close, with antagonist
    # coactivation that practice can learn to suppress; separations are
    # deliberately marginal against the noise so first-iteration accuracy
    # lands well below ceiling
    open_delta = np.array([0.0, 30.0, 110.0, 110.0, 20.0, 60.0, 60.0, 0.0])
    close_delta = np.array([0.0, 20.0, 60.0, 60.0, 30.0, 110.0, 110.0, 0.0])
    cov_relax = np.diag(np.full(N_CHANNELS, 55.0**2))
    cov_active = np.diag(np.full(N_CHANNELS, 90.0**2))
    offsets = {
        "arm on table, motor off": np.zeros(N_CHANNELS),
        "arm on table, motor on": np.array([90.0, 0, 0, 0, 0, 0, 0, 90.0]),
        "arm off table, motor off": np.array([0, 140.0, 0, 0, 140.0, 0, 0, 0]),
        "arm off table, motor on": np.array([90.0, 140.0, 0, 0, 140.0, 0, 0, 90.0]),
        "free": np.zeros(N_CHANNELS),
    }
    noise_scale = {label: 1.0 for label in offsets}
    return SubjectProfile(
        mean_relax=relax,
        mean_open=relax + open_delta,
        mean_close=relax + close_delta,
        cov_relax=cov_relax,
        cov_open=cov_active.copy(),
        cov_close=cov_active.copy(),
        condition_offsets=offsets,
        condition_noise_scale=noise_scale,
        adaptation_rate=adaptation_rate,
        drift_rate=drift_rate,
        trial_jitter_std=40.0,
        perception_noise_std=0.0,
        seed=seed,
    )


def default_adaptive_profile(seed: int = 0) -> SubjectProfile:
    """Subject who learns from the bars (Table II improvers analog)."""
    return _default_profile(seed, adaptation_rate=0.8, drift_rate=0.02)


def default_static_profile(seed: int = 0) -> SubjectProfile:
    """Subject who ignores the bars; generators stay fixed."""
    return _default_profile(seed, adaptation_rate=0.0, drift_rate=0.0)
