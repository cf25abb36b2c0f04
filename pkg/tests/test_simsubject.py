import numpy as np
import pytest

from intentloop.core import FREE_CONDITION, Intent, ITERATION1_CONDITIONS
from intentloop.engine import FeedbackFrame, HandState
from intentloop.lda import LabeledDataset, fit
from intentloop.sigproc import ProbVector
from intentloop.simsubject import (
    RAW_CEIL,
    SimulatedSubject,
    SubjectProfile,
    default_adaptive_profile,
    default_static_profile,
    margin,
)


def frame_with_bars(bar_open=0.0, bar_close=0.0):
    return FeedbackFrame(
        t_ms=0, bar_open=bar_open, bar_close=bar_close, intent=Intent.RELAX,
        hand=HandState.RELEASED, raw_p=ProbVector(1 / 3, 1 / 3, 1 / 3),
    )


def fitted_model(rng):
    x, y = [], []
    for k, shift in enumerate([0.0, 0.4, -0.4]):
        x.append(rng.normal(loc=shift, scale=0.2, size=(80, 8)))
        y.append(np.full(80, k))
    return fit(LabeledDataset(np.concatenate(x), np.concatenate(y)))


def degenerate_profile(seed=0, eta=0.0):
    zeros = np.zeros((8, 8))
    return SubjectProfile(
        mean_relax=np.full(8, 100.0),
        mean_open=np.full(8, 500.0),
        mean_close=np.full(8, 900.0),
        cov_relax=zeros.copy(), cov_open=zeros.copy(), cov_close=zeros.copy(),
        condition_offsets={"free": np.zeros(8)},
        condition_noise_scale={"free": 1.0},
        adaptation_rate=eta, drift_rate=0.0, trial_jitter_std=0.0, seed=seed,
    )


class TestEmit:
    def test_degenerate_generator_is_constant(self):
        subject = SimulatedSubject(degenerate_profile())
        for t in range(0, 200, 20):
            s = subject.emit(Intent.OPEN, FREE_CONDITION, t)
            assert s.channels.tolist() == [500.0] * 8
            assert s.cue is Intent.OPEN

    def test_fixed_seed_reproduces_stream(self):
        runs = []
        for _ in range(2):
            subject = SimulatedSubject(default_adaptive_profile(seed=42))
            chunks = []
            for cond in ITERATION1_CONDITIONS:
                subject.begin_trial()
                chunks.append(np.stack([
                    subject.emit(Intent.CLOSE, cond, 20 * i).channels for i in range(50)
                ]))
            runs.append(np.concatenate(chunks))
        assert np.array_equal(runs[0], runs[1])

    def test_emit_block_matches_determinism_contract(self):
        a = SimulatedSubject(default_adaptive_profile(seed=3))
        b = SimulatedSubject(default_adaptive_profile(seed=3))
        a.begin_trial()
        b.begin_trial()
        block_a = a.emit_block(Intent.OPEN, FREE_CONDITION, 0, 100)
        block_b = b.emit_block(Intent.OPEN, FREE_CONDITION, 0, 100)
        assert np.array_equal(
            np.stack([s.channels for s in block_a]),
            np.stack([s.channels for s in block_b]),
        )
        assert [s.t_ms for s in block_a] == [20 * i for i in range(100)]

    def test_samples_clamped_to_device_range(self):
        profile = default_adaptive_profile(seed=1)
        profile.mean_open = np.full(8, 1190.0)
        subject = SimulatedSubject(profile)
        xs = np.stack([
            subject.emit(Intent.OPEN, FREE_CONDITION, 20 * i).channels for i in range(500)
        ])
        assert xs.max() <= RAW_CEIL
        assert xs.min() >= 0.0

    def test_condition_offsets_shift_all_intents(self):
        profile = default_adaptive_profile(seed=5)
        subject = SimulatedSubject(profile)
        off_label = "arm off table, motor off"
        cond = next(c for c in ITERATION1_CONDITIONS if c.label == off_label)
        base = np.stack([
            subject.emit_block(i, ITERATION1_CONDITIONS[0], 0, 400)[k].channels
            for i in (Intent.RELAX, Intent.OPEN) for k in range(400)
        ])
        subject2 = SimulatedSubject(profile)
        shifted = np.stack([
            subject2.emit_block(i, cond, 0, 400)[k].channels
            for i in (Intent.RELAX, Intent.OPEN) for k in range(400)
        ])
        observed = shifted.mean(axis=0) - base.mean(axis=0)
        expected = profile.condition_offsets[off_label]
        assert np.abs(observed - expected).max() < 15.0

    def test_static_subject_is_stationary(self):
        subject = SimulatedSubject(default_static_profile(seed=11))

        def collect(n_trials=40, trial_len=250):
            trial_means = {i: [] for i in Intent}
            for _ in range(n_trials):
                for intent in Intent:
                    subject.begin_trial()
                    block = subject.emit_block(intent, FREE_CONDITION, 0, trial_len)
                    trial_means[intent].append(
                        np.stack([s.channels for s in block]).mean(axis=0)
                    )
            return {i: np.stack(v) for i, v in trial_means.items()}

        first = collect()
        second = collect()
        for intent in Intent:
            m1 = first[intent].mean(axis=0)
            m2 = second[intent].mean(axis=0)
            pooled = np.concatenate([first[intent], second[intent]])
            se = pooled.std(axis=0, ddof=1) / np.sqrt(len(first[intent]))
            assert (np.abs(m1 - m2) < 3.0 * np.sqrt(2.0) * se).all()


class TestAdapt:
    def test_eta_zero_is_frozen(self, rng):
        subject = SimulatedSubject(default_static_profile(seed=7))
        model = fitted_model(rng)
        before = subject.snapshot()
        for _ in range(500):
            subject.adapt(frame_with_bars(0.1, 0.1), Intent.OPEN, model.weights, model.biases)
        assert np.array_equal(subject.snapshot(), before)

    def test_full_bar_means_no_feedback_step(self, rng):
        profile = default_adaptive_profile(seed=7)
        profile.drift_rate = 0.0
        subject = SimulatedSubject(profile)
        model = fitted_model(rng)
        before = subject.snapshot()
        subject.adapt(frame_with_bars(bar_open=1.0), Intent.OPEN, model.weights, model.biases)
        assert np.array_equal(subject.snapshot(), before)

    def test_low_bar_moves_attempted_mean_only(self, rng):
        profile = default_adaptive_profile(seed=7)
        profile.drift_rate = 0.0
        subject = SimulatedSubject(profile)
        model = fitted_model(rng)
        before = subject.snapshot()
        subject.adapt(frame_with_bars(bar_open=0.2), Intent.OPEN, model.weights, model.biases)
        after = subject.snapshot()
        assert not np.array_equal(after[int(Intent.OPEN)], before[int(Intent.OPEN)])
        assert np.array_equal(after[int(Intent.RELAX)], before[int(Intent.RELAX)])
        assert np.array_equal(after[int(Intent.CLOSE)], before[int(Intent.CLOSE)])
        step = np.linalg.norm(after[int(Intent.OPEN)] - before[int(Intent.OPEN)])
        assert step == pytest.approx(profile.adaptation_rate * 0.8, rel=1e-12)

    def test_relax_attempt_rejected(self, rng):
        subject = SimulatedSubject(default_adaptive_profile(seed=7))
        model = fitted_model(rng)
        with pytest.raises(ValueError):
            subject.adapt(frame_with_bars(), Intent.RELAX, model.weights, model.biases)

    @pytest.mark.parametrize("attempted", [Intent.OPEN, Intent.CLOSE])
    def test_update_direction_increases_margin(self, rng, attempted):
        """First-order oracle: the applied step direction matches the
        finite-difference directional derivative of the margin and is
        strictly positive."""
        profile = default_adaptive_profile(seed=13)
        profile.drift_rate = 0.0
        eps = 1e-4
        profile.adaptation_rate = eps
        subject = SimulatedSubject(profile)
        model = fitted_model(rng)
        before = subject.snapshot()[int(attempted)]
        subject.adapt(frame_with_bars(), attempted, model.weights, model.biases)
        after = subject.snapshot()[int(attempted)]
        direction = (after - before) / eps

        gain = (
            margin(after, attempted, model.weights, model.biases)
            - margin(before, attempted, model.weights, model.biases)
        ) / eps
        assert gain > 0.0
        h = 1e-3
        fd = (
            margin(before + h * direction, attempted, model.weights, model.biases)
            - margin(before - h * direction, attempted, model.weights, model.biases)
        ) / (2 * h)
        assert gain == pytest.approx(fd, rel=1e-6)

    def test_means_clamped_under_aggressive_updates(self, rng):
        profile = default_adaptive_profile(seed=17)
        profile.adaptation_rate = 500.0
        profile.drift_rate = 0.0
        subject = SimulatedSubject(profile)
        model = fitted_model(rng)
        for _ in range(50):
            subject.adapt(frame_with_bars(), Intent.OPEN, model.weights, model.biases)
            subject.adapt(frame_with_bars(), Intent.CLOSE, model.weights, model.biases)
        means = subject.snapshot()
        assert means.min() >= 0.0 and means.max() <= RAW_CEIL

    def test_adaptation_trajectory_deterministic(self, rng):
        model = fitted_model(rng)
        snaps = []
        for _ in range(2):
            subject = SimulatedSubject(default_adaptive_profile(seed=23))
            for i in range(200):
                subject.begin_trial()
                subject.emit(Intent.OPEN, FREE_CONDITION, 20 * i)
                subject.adapt(frame_with_bars(0.3, 0.2), Intent.OPEN, model.weights, model.biases)
            snaps.append(subject.snapshot())
        assert np.array_equal(snaps[0], snaps[1])


class TestProfileIO:
    def test_round_trip(self, tmp_path):
        profile = default_adaptive_profile(seed=99)
        path = tmp_path / "subject.json"
        profile.save(path)
        back = SubjectProfile.load(path)
        assert np.array_equal(back.mean_open, profile.mean_open)
        assert np.array_equal(back.cov_close, profile.cov_close)
        assert back.condition_noise_scale == profile.condition_noise_scale
        assert back.adaptation_rate == profile.adaptation_rate
        assert back.seed == profile.seed
        for label, offset in profile.condition_offsets.items():
            assert np.array_equal(back.condition_offsets[label], offset)

    def test_adapted_state_survives_round_trip(self, tmp_path, rng):
        subject = SimulatedSubject(default_adaptive_profile(seed=1))
        model = fitted_model(rng)
        for _ in range(100):
            subject.adapt(frame_with_bars(0.2, 0.2), Intent.OPEN, model.weights, model.biases)
        path = tmp_path / "adapted.json"
        subject.current_profile().save(path)
        resumed = SimulatedSubject(SubjectProfile.load(path))
        assert np.array_equal(resumed.snapshot(), subject.snapshot())
