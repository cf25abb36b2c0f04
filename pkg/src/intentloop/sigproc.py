"""Per-sample preprocessing and probability-stream smoothing.

The deployed pipeline is: clip raw EMG to [0, 1000] and rescale to
[-1, 1], classify one time step at a time, then median-filter the
predicted class probabilities over a trailing window before deciding an
intent. The trailing (causal) window is deliberate: the engine runs in
real time and cannot look ahead.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from collections import deque
from typing import NamedTuple

import numpy as np

from .core import Intent
from .errors import NonFiniteSample

RAW_CLIP_LO = 0.0
RAW_CLIP_HI = 1000.0
DEFAULT_MEDIAN_WINDOW = 20


class ProbVector(NamedTuple):
    """Class probabilities in (relax, open, close) order; sums to 1."""

    p_relax: float
    p_open: float
    p_close: float

    def validate(self, tol: float = 1e-9) -> None:
        for p in self:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if abs(sum(self) - 1.0) > tol:
            raise ValueError(f"probabilities sum to {sum(self)}, not 1")

    @classmethod
    def uniform(cls) -> "ProbVector":
        return cls(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


def preprocess(raw: np.ndarray) -> np.ndarray:
    """clamp(x, 0, 1000)/500 - 1 per channel; output lies in [-1, 1]."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteSample(f"non-finite raw sample: {raw}")
    return np.clip(raw, RAW_CLIP_LO, RAW_CLIP_HI) / 500.0 - 1.0


def preprocess_block(raw: np.ndarray) -> np.ndarray:
    """Vectorized `preprocess` over an (N, 8) array."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteSample("non-finite value in raw block")
    return np.clip(raw, RAW_CLIP_LO, RAW_CLIP_HI) / 500.0 - 1.0


def _median_sorted(vals: list[float]) -> float:
    # median of an even count is the mean of the two middle values
    n = len(vals)
    mid = n // 2
    if n % 2:
        return vals[mid]
    return (vals[mid - 1] + vals[mid]) / 2.0


class MedianSmoother:
    """Trailing per-class median over the last `window` probability vectors.

    During warm-up the median runs over however many vectors have been
    seen. Per-class medians generally do not sum to 1, so the result is
    renormalized unless `renormalize` is off (the raw medians are then
    returned, which is also what the filter oracle compares against).

    Single-writer state: one smoother per stream.
    """

    def __init__(self, window: int = DEFAULT_MEDIAN_WINDOW, renormalize: bool = True):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.renormalize = renormalize
        self._buf: deque[ProbVector] = deque()
        # one sorted column per class, kept in lockstep with _buf
        self._sorted: tuple[list[float], list[float], list[float]] = ([], [], [])

    def __len__(self) -> int:
        return len(self._buf)

    def reset(self) -> None:
        self._buf.clear()
        for col in self._sorted:
            col.clear()

    def smooth(self, p: ProbVector) -> ProbVector:
        if len(self._buf) == self.window:
            old = self._buf.popleft()
            for col, v in zip(self._sorted, old):
                del col[bisect_left(col, v)]
        self._buf.append(p)
        for col, v in zip(self._sorted, p):
            insort(col, v)
        med = (
            _median_sorted(self._sorted[0]),
            _median_sorted(self._sorted[1]),
            _median_sorted(self._sorted[2]),
        )
        if not self.renormalize:
            return ProbVector(*med)
        total = med[0] + med[1] + med[2]
        if total <= 0.0:
            return ProbVector.uniform()
        return ProbVector(med[0] / total, med[1] / total, med[2] / total)


def decide(p_smoothed: ProbVector, current: Intent) -> Intent:
    """Argmax intent; exact ties keep `current` when it is tied for the
    max, and otherwise fall back to relax (the device's safe action)."""
    best = max(p_smoothed)
    winners = [i for i in range(3) if p_smoothed[i] == best]
    if len(winners) == 1:
        return Intent(winners[0])
    if int(current) in winners:
        return current
    return Intent.RELAX
