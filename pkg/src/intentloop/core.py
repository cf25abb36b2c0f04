"""Domain types shared by every module: intents, samples, recordings,
arm conditions, and cue schedules.

All types here are plain values; they carry no I/O and are safe to copy
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ScheduleOverrun

N_CHANNELS = 8
SAMPLE_RATE_HZ = 50.0
SAMPLE_PERIOD_MS = 20


class Intent(IntEnum):
    """Hand intent decoded from EMG. Codes are stable across serialization."""

    RELAX = 0
    OPEN = 1
    CLOSE = 2

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "Intent":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown intent name: {name!r}") from None


INTENTS = (Intent.RELAX, Intent.OPEN, Intent.CLOSE)


class ArmPosture(Enum):
    ON_TABLE = "on_table"
    OFF_TABLE = "off_table"


class MotorState(Enum):
    ON = "on"
    OFF = "off"


@dataclass(frozen=True)
class ArmCondition:
    """Posture x motor combination under which a recording is collected."""

    posture: ArmPosture
    motor: MotorState
    label: str

    def to_json(self) -> dict:
        return {"posture": self.posture.value, "motor": self.motor.value, "label": self.label}

    @classmethod
    def from_json(cls, d: dict) -> "ArmCondition":
        return cls(ArmPosture(d["posture"]), MotorState(d["motor"]), d["label"])


ON_TABLE_MOTOR_OFF = ArmCondition(ArmPosture.ON_TABLE, MotorState.OFF, "arm on table, motor off")
ON_TABLE_MOTOR_ON = ArmCondition(ArmPosture.ON_TABLE, MotorState.ON, "arm on table, motor on")
OFF_TABLE_MOTOR_OFF = ArmCondition(ArmPosture.OFF_TABLE, MotorState.OFF, "arm off table, motor off")
OFF_TABLE_MOTOR_ON = ArmCondition(ArmPosture.OFF_TABLE, MotorState.ON, "arm off table, motor on")

# Collection conditions of the first iteration, in protocol order.
ITERATION1_CONDITIONS = (
    ON_TABLE_MOTOR_OFF,
    ON_TABLE_MOTOR_ON,
    OFF_TABLE_MOTOR_OFF,
    OFF_TABLE_MOTOR_ON,
)

# From the second iteration on there is no prescribed condition; the device
# assists and the subject moves freely.
FREE_CONDITION = ArmCondition(ArmPosture.ON_TABLE, MotorState.ON, "free")

CONDITIONS_BY_LABEL = {c.label: c for c in (*ITERATION1_CONDITIONS, FREE_CONDITION)}


class Role(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(slots=True)
class EmgSample:
    """One 8-channel EMG reading.

    t_ms counts milliseconds since the start of its recording; cue is the
    ground-truth intent while a cue was active, else None.
    """

    t_ms: int
    channels: np.ndarray
    cue: Optional[Intent] = None

    def validate(self) -> None:
        if self.t_ms < 0:
            raise ValueError(f"negative timestamp {self.t_ms}")
        if self.channels.shape != (N_CHANNELS,):
            raise ValueError(f"expected {N_CHANNELS} channels, got shape {self.channels.shape}")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError("non-finite channel value")
        if np.any(self.channels < 0):
            raise ValueError("negative channel value")


@dataclass(slots=True)
class Recording:
    """A continuous, uninterrupted labeled sample sequence plus metadata."""

    id: str
    iteration: int
    condition: ArmCondition
    role: Role
    samples: list[EmgSample]
    sample_rate_hz: float = SAMPLE_RATE_HZ

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.sample_rate_hz

    @property
    def duration_ms(self) -> float:
        """Span from first sample to the end of the last sample period."""
        if not self.samples:
            return 0.0
        return self.samples[-1].t_ms - self.samples[0].t_ms + self.period_ms

    def validate(self) -> None:
        if not self.samples:
            raise ValueError(f"recording {self.id} is empty")
        if self.iteration < 1:
            raise ValueError(f"iteration must be >= 1, got {self.iteration}")
        last = -1
        for s in self.samples:
            s.validate()
            if s.t_ms <= last:
                raise ValueError(f"timestamps not strictly increasing at t={s.t_ms}")
            last = s.t_ms

    def channel_matrix(self) -> np.ndarray:
        """Raw samples stacked as an (N, 8) float array."""
        return np.stack([s.channels for s in self.samples])

    def cue_codes(self) -> np.ndarray:
        """Cue per sample as int codes, -1 where unlabeled."""
        return np.array(
            [-1 if s.cue is None else int(s.cue) for s in self.samples], dtype=np.int64
        )

    def labeled_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) for the labeled subset, x raw (N, 8), y intent codes."""
        codes = self.cue_codes()
        mask = codes >= 0
        return self.channel_matrix()[mask], codes[mask]

    @classmethod
    def from_arrays(
        cls,
        id: str,
        iteration: int,
        condition: ArmCondition,
        role: Role,
        t_ms: Sequence[int],
        channels: np.ndarray,
        cues: Optional[Sequence[Optional[Intent]]] = None,
        sample_rate_hz: float = SAMPLE_RATE_HZ,
    ) -> "Recording":
        if cues is None:
            cues = [None] * len(t_ms)
        samples = [
            EmgSample(int(t), np.asarray(row, dtype=np.float64), cue)
            for t, row, cue in zip(t_ms, channels, cues)
        ]
        return cls(id, iteration, condition, role, samples, sample_rate_hz)


@dataclass(frozen=True)
class CueSchedule:
    """Ordered verbal-cue sequence: (intent, duration_ms) entries."""

    entries: tuple[tuple[Intent, int], ...]

    @property
    def total_duration_ms(self) -> int:
        return sum(d for _, d in self.entries)

    def validate(self) -> None:
        if not self.entries:
            raise ValueError("empty cue schedule")
        prev_active: Optional[Intent] = None
        for intent, dur in self.entries:
            if dur <= 0:
                raise ValueError(f"non-positive cue duration {dur}")
            if intent != Intent.RELAX:
                if prev_active is not None:
                    raise ValueError("open/close cues must be separated by a relax cue")
                prev_active = intent
            else:
                prev_active = None

    def intervals(self, start_offset_ms: int = 0) -> Iterator[tuple[Intent, int, int]]:
        """Yield (intent, start_ms, end_ms) half-open intervals."""
        t = start_offset_ms
        for intent, dur in self.entries:
            yield intent, t, t + dur
            t += dur

    def count(self, intent: Intent) -> int:
        return sum(1 for i, _ in self.entries if i == intent)


def default_cue_schedule(cue_duration_ms: int = 5000) -> CueSchedule:
    """The standard collection sequence: open and close three times each,
    every cue bracketed by relax, all cues the same length.

    Pattern: R O R C R O R C R O R C R.
    """
    pattern = [Intent.RELAX]
    for _ in range(3):
        pattern += [Intent.OPEN, Intent.RELAX, Intent.CLOSE, Intent.RELAX]
    return CueSchedule(tuple((i, cue_duration_ms) for i in pattern))


def label_samples(recording: Recording, schedule: CueSchedule, start_offset_ms: int = 0) -> Recording:
    """Return a copy of `recording` with cues assigned from `schedule`.

    Cue intervals are half-open [start, end), so a sample exactly on a
    boundary belongs to the later cue. Samples outside the schedule lose
    any label. Idempotent for fixed arguments.
    """
    if not recording.samples:
        raise ScheduleOverrun("cannot label an empty recording")
    t0 = recording.samples[0].t_ms
    available = recording.duration_ms - start_offset_ms
    if schedule.total_duration_ms > available:
        raise ScheduleOverrun(
            f"schedule needs {schedule.total_duration_ms}ms but only "
            f"{available:.0f}ms of recording remain after offset {start_offset_ms}ms"
        )
    bounds = list(schedule.intervals(t0 + start_offset_ms))
    labeled: list[EmgSample] = []
    idx = 0
    for s in recording.samples:
        while idx < len(bounds) and s.t_ms >= bounds[idx][2]:
            idx += 1
        if idx < len(bounds) and bounds[idx][1] <= s.t_ms < bounds[idx][2]:
            cue: Optional[Intent] = bounds[idx][0]
        else:
            cue = None
        labeled.append(replace(s, cue=cue))
    return replace(recording, samples=labeled)


@dataclass(frozen=True)
class SubjectMeta:
    """Subject descriptor kept as session metadata."""

    id: str
    age: int
    gender: str
    fm_ue: int

    def __post_init__(self) -> None:
        if not 0 <= self.fm_ue <= 66:
            raise ValueError(f"fm_ue must be in [0, 66], got {self.fm_ue}")

    def to_json(self) -> dict:
        return {"id": self.id, "age": self.age, "gender": self.gender, "fm_ue": self.fm_ue}

    @classmethod
    def from_json(cls, d: dict) -> "SubjectMeta":
        return cls(d["id"], d["age"], d["gender"], d["fm_ue"])
