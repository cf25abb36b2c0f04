import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from intentloop.core import (
    EmgSample,
    FREE_CONDITION,
    Intent,
    Recording,
    Role,
    CueSchedule,
    default_cue_schedule,
    label_samples,
)
from intentloop.errors import ScheduleOverrun

from conftest import make_recording


class TestIntent:
    def test_codes_are_stable(self):
        assert int(Intent.RELAX) == 0
        assert int(Intent.OPEN) == 1
        assert int(Intent.CLOSE) == 2

    def test_wire_round_trip(self):
        for intent in Intent:
            assert Intent.from_wire(intent.wire_name) is intent

    def test_exactly_three_variants(self):
        assert len(list(Intent)) == 3


class TestDefaultCueSchedule:
    def test_thirteen_cues_total_65s(self):
        sched = default_cue_schedule()
        assert len(sched.entries) == 13
        assert sched.total_duration_ms == 13 * 5000 == 65000

    def test_three_open_three_close(self):
        sched = default_cue_schedule()
        assert sched.count(Intent.OPEN) == 3
        assert sched.count(Intent.CLOSE) == 3
        assert sched.count(Intent.RELAX) == 7

    def test_active_cues_bracketed_by_relax(self):
        entries = default_cue_schedule().entries
        for i, (intent, _) in enumerate(entries):
            if intent is not Intent.RELAX:
                assert entries[i - 1][0] is Intent.RELAX
                assert entries[i + 1][0] is Intent.RELAX

    def test_starts_and_ends_with_relax(self):
        entries = default_cue_schedule().entries
        assert entries[0][0] is Intent.RELAX
        assert entries[-1][0] is Intent.RELAX

    def test_validate_accepts_default(self):
        default_cue_schedule().validate()

    def test_validate_rejects_adjacent_active(self):
        bad = CueSchedule(((Intent.OPEN, 1000), (Intent.CLOSE, 1000)))
        with pytest.raises(ValueError):
            bad.validate()


class TestLabelSamples:
    def test_sample_inside_first_relax(self, rng):
        rec = make_recording(rng, n=3250)
        labeled = label_samples(rec, default_cue_schedule())
        assert labeled.samples[125].t_ms == 2500
        assert labeled.samples[125].cue is Intent.RELAX

    def test_sample_inside_second_cue(self, rng):
        rec = make_recording(rng, n=3250)
        schedule = CueSchedule(((Intent.RELAX, 5000), (Intent.OPEN, 5000)))
        labeled = label_samples(rec, schedule)
        assert labeled.samples[375].t_ms == 7500
        assert labeled.samples[375].cue is Intent.OPEN

    def test_full_coverage_labels_3250(self, rng):
        rec = make_recording(rng, n=3250)
        labeled = label_samples(rec, default_cue_schedule())
        assert sum(s.cue is not None for s in labeled.samples) == 3250

    def test_boundary_sample_joins_later_cue(self, rng):
        rec = make_recording(rng, n=3250)
        labeled = label_samples(rec, default_cue_schedule())
        # t=5000 is exactly the boundary between relax [0,5000) and open [5000,10000)
        boundary = next(s for s in labeled.samples if s.t_ms == 5000)
        assert boundary.cue is Intent.OPEN

    def test_overrun_raises(self, rng):
        rec = make_recording(rng, n=100)  # 2s recording
        with pytest.raises(ScheduleOverrun):
            label_samples(rec, default_cue_schedule())

    def test_offset_pushes_schedule(self, rng):
        rec = make_recording(rng, n=3250)
        schedule = CueSchedule(((Intent.OPEN, 5000),))
        labeled = label_samples(rec, schedule, start_offset_ms=1000)
        assert labeled.samples[0].cue is None  # t=0 before offset
        assert labeled.samples[50].cue is Intent.OPEN  # t=1000
        assert labeled.samples[301].cue is None  # t=6020 past the end

    def test_labeling_idempotent(self, rng):
        rec = make_recording(rng, n=3250)
        once = label_samples(rec, default_cue_schedule())
        twice = label_samples(once, default_cue_schedule())
        assert all(a.cue is b.cue for a, b in zip(once.samples, twice.samples))
        assert all(a.t_ms == b.t_ms for a, b in zip(once.samples, twice.samples))

    @settings(max_examples=25, deadline=None)
    @given(
        durations=st.lists(st.integers(min_value=100, max_value=4000), min_size=1, max_size=6),
        offset=st.integers(min_value=0, max_value=2000),
    )
    def test_labeled_count_matches_covered_duration(self, durations, offset):
        rng = np.random.default_rng(7)
        rec = make_recording(rng, n=3250)
        intents = [Intent.RELAX, Intent.OPEN, Intent.RELAX, Intent.CLOSE, Intent.RELAX, Intent.OPEN]
        schedule = CueSchedule(tuple(zip(intents, durations)))
        labeled = label_samples(rec, schedule, start_offset_ms=offset)
        covered = schedule.total_duration_ms
        n_labeled = sum(s.cue is not None for s in labeled.samples)
        expected = covered * 50 / 1000
        assert abs(n_labeled - expected) <= 1


class TestRecording:
    def test_duration_includes_final_period(self, rng):
        rec = make_recording(rng, n=3250)
        assert rec.duration_ms == 65000

    def test_validate_rejects_empty(self):
        rec = Recording("x", 1, FREE_CONDITION, Role.TEST, [])
        with pytest.raises(ValueError):
            rec.validate()

    def test_validate_rejects_non_monotonic(self, rng):
        samples = [EmgSample(0, rng.uniform(0, 100, 8)), EmgSample(0, rng.uniform(0, 100, 8))]
        rec = Recording("x", 1, FREE_CONDITION, Role.TEST, samples)
        with pytest.raises(ValueError):
            rec.validate()

    def test_labeled_arrays_filters_unlabeled(self, rng):
        rec = make_recording(rng, n=3250)
        schedule = CueSchedule(((Intent.OPEN, 5000),))
        labeled = label_samples(rec, schedule)
        x, y = labeled.labeled_arrays()
        assert len(x) == len(y) == 250
        assert (y == int(Intent.OPEN)).all()
