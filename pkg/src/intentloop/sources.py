"""Sample sources: recording replay and generic live-socket ingestion.

Both satisfy the session's sample-source contract (they ignore the
intent/condition hints, which only the simulator uses) and both iterate
as plain EmgSample streams for `Engine.run_stream`.
"""

from __future__ import annotations

import socket
from typing import Iterator

import numpy as np

from .core import ArmCondition, EmgSample, Intent, N_CHANNELS, Recording, SAMPLE_PERIOD_MS
from .errors import SourceDropout


class NullSource:
    """Placeholder for stages that never pull samples (train, evaluate)."""

    def begin_trial(self) -> None:
        pass

    def emit(self, intent: Intent, condition: ArmCondition, t_ms: int) -> EmgSample:
        raise SourceDropout("null source cannot produce samples")

    def emit_block(
        self, intent: Intent, condition: ArmCondition, t0_ms: int, n: int,
        period_ms: int = SAMPLE_PERIOD_MS,
    ) -> list[EmgSample]:
        raise SourceDropout("null source cannot produce samples")


class ReplaySource:
    """Feeds a stored recording back, rebasing timestamps onto the
    session clock so schedules line up."""

    def __init__(self, recording: Recording):
        self.recording = recording
        self._pos = 0

    def __iter__(self) -> Iterator[EmgSample]:
        return iter(self.recording.samples)

    def begin_trial(self) -> None:
        pass

    def emit(self, intent: Intent, condition: ArmCondition, t_ms: int) -> EmgSample:
        if self._pos >= len(self.recording.samples):
            raise SourceDropout("replay source exhausted")
        s = self.recording.samples[self._pos]
        self._pos += 1
        return EmgSample(int(t_ms), s.channels, s.cue)

    def emit_block(
        self, intent: Intent, condition: ArmCondition, t0_ms: int, n: int,
        period_ms: int = SAMPLE_PERIOD_MS,
    ) -> list[EmgSample]:
        return [self.emit(intent, condition, t0_ms + i * period_ms) for i in range(n)]


class LiveSource:
    """Reads recording-format rows (`t_ms,ch0..ch7[,cue]`) from a TCP
    socket, nominally at 50Hz. Emitted samples carry the session's
    clock so cue labeling stays aligned; device timestamps only order
    the stream. Any socket failure surfaces as SourceDropout, which
    aborts the recording in progress.
    """

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
            self._sock.settimeout(10.0)
            self._fh = self._sock.makefile("r", encoding="utf-8")
        except OSError as e:
            raise SourceDropout(f"cannot connect to live source {host}:{port}: {e}") from e

    def close(self) -> None:
        try:
            self._fh.close()
            self._sock.close()
        except OSError:
            pass

    def _read_row(self) -> np.ndarray:
        try:
            line = self._fh.readline()
        except OSError as e:
            raise SourceDropout(f"live source read failed: {e}") from e
        if not line:
            raise SourceDropout("live source closed the connection")
        parts = line.strip().split(",")
        if len(parts) not in (N_CHANNELS + 1, N_CHANNELS + 2):
            raise SourceDropout(f"malformed live row with {len(parts)} fields")
        try:
            return np.array([float(v) for v in parts[1 : N_CHANNELS + 1]], dtype=np.float64)
        except ValueError as e:
            raise SourceDropout(f"malformed live row: {e}") from e

    def begin_trial(self) -> None:
        pass

    def emit(self, intent: Intent, condition: ArmCondition, t_ms: int) -> EmgSample:
        return EmgSample(int(t_ms), self._read_row())

    def emit_block(
        self, intent: Intent, condition: ArmCondition, t0_ms: int, n: int,
        period_ms: int = SAMPLE_PERIOD_MS,
    ) -> list[EmgSample]:
        return [self.emit(intent, condition, t0_ms + i * period_ms) for i in range(n)]

    def __iter__(self) -> Iterator[EmgSample]:
        t = 0
        while True:
            try:
                row = self._read_row()
            except SourceDropout:
                return
            yield EmgSample(t, row)
            t += SAMPLE_PERIOD_MS
