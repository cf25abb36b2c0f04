"""Recording files: a strict CSV plus a JSON metadata sidecar.

Data file format (normative, see docs/PROTOCOL.md):

    t_ms,ch0,ch1,ch2,ch3,ch4,ch5,ch6,ch7,cue
    0,12.0,80.5,...,none
    20,...,open

Timestamps are non-negative integers and strictly increase; cue values
are exactly `relax`, `open`, `close`, or `none` (case-sensitive).
Channel values use repr() of the float, so parse(serialize(r)) == r.
The sidecar `<name>.csv.meta.json` carries condition, iteration, role,
sample rate, and ids.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (
    ArmCondition,
    EmgSample,
    FREE_CONDITION,
    Intent,
    N_CHANNELS,
    Recording,
    Role,
    SAMPLE_RATE_HZ,
)
from .errors import ParseOrderError, RecordingParseError

HEADER = "t_ms,ch0,ch1,ch2,ch3,ch4,ch5,ch6,ch7,cue"
_CUE_NAMES = {"relax": Intent.RELAX, "open": Intent.OPEN, "close": Intent.CLOSE, "none": None}


def meta_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def write_recording(recording: Recording, path: str | Path, subject_id: str = "") -> None:
    path = Path(path)
    lines = [HEADER]
    for s in recording.samples:
        cue = "none" if s.cue is None else s.cue.wire_name
        lines.append(
            f"{s.t_ms}," + ",".join(repr(float(v)) for v in s.channels) + f",{cue}"
        )
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "id": recording.id,
        "iteration": recording.iteration,
        "condition": recording.condition.to_json(),
        "role": recording.role.value,
        "sample_rate_hz": recording.sample_rate_hz,
        "subject_id": subject_id,
    }
    meta_path(path).write_text(json.dumps(meta, indent=1))


def read_recording(path: str | Path) -> Recording:
    """Parse a recording file; the sidecar is used when present and
    benign defaults (free condition, test role) are assumed otherwise."""
    path = Path(path)
    samples: list[EmgSample] = []
    last_t = -1
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != HEADER:
            raise RecordingParseError(1, f"bad header {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != N_CHANNELS + 2:
                raise RecordingParseError(line_no, f"expected {N_CHANNELS + 2} fields, got {len(parts)}")
            try:
                t = int(parts[0])
            except ValueError:
                raise RecordingParseError(line_no, f"bad timestamp {parts[0]!r}") from None
            if t < 0:
                raise RecordingParseError(line_no, f"negative timestamp {t}")
            if t <= last_t:
                raise ParseOrderError(line_no, f"timestamp {t} not after {last_t}")
            last_t = t
            try:
                channels = np.array([float(v) for v in parts[1:-1]], dtype=np.float64)
            except ValueError:
                raise RecordingParseError(line_no, "bad channel value") from None
            if not np.all(np.isfinite(channels)):
                raise RecordingParseError(line_no, "non-finite channel value")
            if parts[-1] not in _CUE_NAMES:
                raise RecordingParseError(line_no, f"bad cue {parts[-1]!r}")
            samples.append(EmgSample(t, channels, _CUE_NAMES[parts[-1]]))
    if not samples:
        raise RecordingParseError(1, "recording has no samples")

    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
        condition = ArmCondition.from_json(meta["condition"])
        rec = Recording(
            id=meta["id"],
            iteration=int(meta["iteration"]),
            condition=condition,
            role=Role(meta["role"]),
            samples=samples,
            sample_rate_hz=float(meta["sample_rate_hz"]),
        )
    else:
        rec = Recording(
            id=path.stem,
            iteration=1,
            condition=FREE_CONDITION,
            role=Role.TEST,
            samples=samples,
            sample_rate_hz=SAMPLE_RATE_HZ,
        )
    return rec
