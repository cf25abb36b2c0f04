"""Real-time inference path and the orthosis state machine.

Each 20ms sample runs preprocess -> posterior -> median smoothing ->
intent decision. A decision transition to open schedules an Extend
command, to close a Release, both maturing one actuation delay later;
relax never schedules anything and simply lets the device keep its
state. Disengaging the motor freezes the hand (inference and feedback
keep running) and both motor toggles clear any pending command so stale
motion can never fire.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from .core import EmgSample, Intent
from .errors import NoModel, NonMonotonicTime
from .lda import LdaModel, predict_proba
from .sigproc import MedianSmoother, ProbVector, decide, preprocess

DEFAULT_ACTUATION_DELAY_MS = 1000


class HandState(Enum):
    EXTENDED = "extended"
    RELEASED = "released"


class CommandTarget(Enum):
    EXTEND = "extend"
    RELEASE = "release"


_TARGET_FOR_INTENT = {Intent.OPEN: CommandTarget.EXTEND, Intent.CLOSE: CommandTarget.RELEASE}
_HAND_FOR_TARGET = {CommandTarget.EXTEND: HandState.EXTENDED, CommandTarget.RELEASE: HandState.RELEASED}


@dataclass(slots=True)
class PendingCommand:
    target: CommandTarget
    due_t_ms: int
    decided_t_ms: int


@dataclass(slots=True)
class DeviceEvent:
    kind: str  # scheduled | replaced | executed | hand | motor
    t_ms: int
    detail: dict


@dataclass(slots=True)
class FeedbackFrame:
    """What one engine step publishes: bar heights are exactly the
    smoothed open/close probabilities; raw_p is the unsmoothed posterior."""

    t_ms: int
    bar_open: float
    bar_close: float
    intent: Intent
    hand: HandState
    raw_p: ProbVector


class Orthosis:
    """Device state machine with delayed actuation.

    At most one command is pending; a newer open/close decision replaces
    it (latest intent wins). Execution is gated on the motor flag.
    """

    def __init__(
        self,
        actuation_delay_ms: int = DEFAULT_ACTUATION_DELAY_MS,
        on_event: Optional[Callable[[DeviceEvent], None]] = None,
    ):
        self.actuation_delay_ms = int(actuation_delay_ms)
        self.hand = HandState.RELEASED
        self.motor_engaged = True
        self.pending: Optional[PendingCommand] = None
        self.on_event = on_event
        self.hand_transitions = 0

    def _emit(self, kind: str, t_ms: int, **detail) -> None:
        if self.on_event is not None:
            detail.setdefault("hand", self.hand.value)
            detail.setdefault("motor_engaged", self.motor_engaged)
            self.on_event(DeviceEvent(kind, t_ms, detail))

    def set_motor(self, engaged: bool, t_ms: int = 0) -> None:
        self.motor_engaged = bool(engaged)
        if self.pending is not None:
            self._emit("replaced", t_ms, dropped=self.pending.target.value, reason="motor toggle")
        self.pending = None
        self._emit("motor", t_ms, engaged=self.motor_engaged)

    def request(self, intent: Intent, now_ms: int) -> None:
        """Schedule the command for an intent transition; relax is a no-op."""
        target = _TARGET_FOR_INTENT.get(intent)
        if target is None:
            return
        if self.pending is not None:
            self._emit("replaced", now_ms, dropped=self.pending.target.value, by=target.value)
        self.pending = PendingCommand(target, now_ms + self.actuation_delay_ms, now_ms)
        self._emit("scheduled", now_ms, target=target.value, due_t_ms=self.pending.due_t_ms)

    def tick(self, now_ms: int) -> None:
        """Execute the pending command once matured, if the motor allows."""
        if self.pending is None or not self.motor_engaged:
            return
        if now_ms >= self.pending.due_t_ms:
            cmd = self.pending
            self.pending = None
            self._emit("executed", now_ms, target=cmd.target.value, decided_t_ms=cmd.decided_t_ms)
            new_hand = _HAND_FOR_TARGET[cmd.target]
            if new_hand is not self.hand:
                self.hand = new_hand
                self.hand_transitions += 1
                self._emit("hand", now_ms, hand=new_hand.value, decided_t_ms=cmd.decided_t_ms,
                           due_t_ms=cmd.due_t_ms)


@dataclass(slots=True)
class StreamSummary:
    frames: int = 0
    intent_transitions: int = 0
    hand_transitions: int = 0
    wall_s: float = 0.0
    latency_p50_ms: float = 0.0
    latency_p99_ms: float = 0.0
    latency_max_ms: float = 0.0
    error: Optional[str] = None


class Engine:
    """Single-stream inference engine; the step path is single-threaded."""

    def __init__(
        self,
        model: Optional[LdaModel] = None,
        median_window: int = 20,
        renormalize: bool = True,
        actuation_delay_ms: int = DEFAULT_ACTUATION_DELAY_MS,
        on_event: Optional[Callable[[DeviceEvent], None]] = None,
    ):
        self.model = model
        self.smoother = MedianSmoother(median_window, renormalize)
        self.orthosis = Orthosis(actuation_delay_ms, on_event)
        self.current_intent = Intent.RELAX
        self._last_now: Optional[int] = None

    def load_model(self, model: LdaModel) -> None:
        self.model = model

    def set_motor(self, engaged: bool, t_ms: int = 0) -> None:
        self.orthosis.set_motor(engaged, t_ms)

    def reset(self, clear_filter: bool = True) -> None:
        """Stage/recording boundary: restart time and drop any pending
        command; clear the filter and intent state unless the config
        keeps the smoother warm across boundaries.

        Device state (hand, motor) persists across boundaries.
        """
        if clear_filter:
            self.smoother.reset()
            self.current_intent = Intent.RELAX
        self._last_now = None
        self.orthosis.pending = None

    def step(self, sample: EmgSample, now_ms: Optional[int] = None) -> FeedbackFrame:
        if self.model is None:
            raise NoModel("engine has no classifier loaded")
        now = sample.t_ms if now_ms is None else now_ms
        if self._last_now is not None and now <= self._last_now:
            raise NonMonotonicTime(f"sample time {now} after {self._last_now}")
        self._last_now = now

        self.orthosis.tick(now)
        raw_p = predict_proba(self.model, preprocess(sample.channels))
        smoothed = self.smoother.smooth(raw_p)
        intent = decide(smoothed, self.current_intent)
        if intent is not self.current_intent:
            self.orthosis.request(intent, now)
            self.current_intent = intent
        return FeedbackFrame(
            t_ms=now,
            bar_open=smoothed.p_open,
            bar_close=smoothed.p_close,
            intent=intent,
            hand=self.orthosis.hand,
            raw_p=raw_p,
        )

    def run_stream(
        self,
        source: Iterable[EmgSample],
        sink: Optional[Callable[[FeedbackFrame], None]] = None,
    ) -> StreamSummary:
        """Drain a sample source through step(), one frame per sample.

        A failing source terminates the run with a partial summary and
        the cause recorded; engine contract violations still raise.
        """
        summary = StreamSummary()
        latencies: list[int] = []
        prev_intent = self.current_intent
        hand_start = self.orthosis.hand_transitions
        t_start = time.perf_counter()
        it = iter(source)
        while True:
            try:
                sample = next(it)
            except StopIteration:
                break
            except Exception as e:  # noqa: BLE001 - source failures end the run
                summary.error = f"{type(e).__name__}: {e}"
                break
            t0 = time.perf_counter_ns()
            frame = self.step(sample)
            latencies.append(time.perf_counter_ns() - t0)
            if sink is not None:
                sink(frame)
            summary.frames += 1
            if frame.intent is not prev_intent:
                summary.intent_transitions += 1
                prev_intent = frame.intent
        summary.wall_s = time.perf_counter() - t_start
        summary.hand_transitions = self.orthosis.hand_transitions - hand_start
        if latencies:
            lat = np.array(latencies, dtype=np.float64) / 1e6
            summary.latency_p50_ms = float(np.percentile(lat, 50))
            summary.latency_p99_ms = float(np.percentile(lat, 99))
            summary.latency_max_ms = float(lat.max())
        return summary
