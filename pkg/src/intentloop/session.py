"""Reciprocal-learning session orchestration.

One iteration walks collect -> train -> (evaluate) -> practice. The
first iteration collects under the four prescribed posture/motor
conditions with the device following cues; later iterations collect
freely with the previous classifier running live. Training always
refits from scratch on the current iteration's recordings (cumulative
training is available as a config switch for experiments), and practice
closes the loop by feeding every feedback frame back to an adaptive
sample source.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from . import analytics, lda, recfile
from .config import AppConfig
from .core import (
    ArmCondition,
    CueSchedule,
    EmgSample,
    FREE_CONDITION,
    Intent,
    INTENTS,
    ITERATION1_CONDITIONS,
    MotorState,
    Recording,
    Role,
    SAMPLE_PERIOD_MS,
    SubjectMeta,
    default_cue_schedule,
    label_samples,
)
from .engine import Engine, Orthosis
from .errors import NoModel, RecordingAborted, SourceDropout, StageOrderError, StopRequested
from .lda import LdaModel
from .sigproc import decide, preprocess_block


class Stage(Enum):
    COLLECT = "collect"
    TRAIN = "train"
    EVALUATE = "evaluate"
    PRACTICE = "practice"
    IDLE = "idle"


@runtime_checkable
class SampleSource(Protocol):
    """Anything that can produce 50Hz samples for a session stage.

    Replay and live-socket sources ignore the intent/condition hints;
    the simulated subject generates from them.
    """

    def begin_trial(self) -> None: ...

    def emit(self, intent: Intent, condition: ArmCondition, t_ms: int) -> EmgSample: ...

    def emit_block(
        self, intent: Intent, condition: ArmCondition, t0_ms: int, n: int,
        period_ms: int = SAMPLE_PERIOD_MS,
    ) -> list[EmgSample]: ...


@dataclass(frozen=True)
class PlanEntry:
    condition: ArmCondition
    role: Role
    schedule: CueSchedule


def plan_collection(iteration: int, cue_duration_ms: int = 5000) -> list[PlanEntry]:
    """Collection plan for one iteration.

    Iteration 1: every posture/motor condition twice, once per role.
    Iteration >= 2: four free recordings, two per role.
    """
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    schedule = default_cue_schedule(cue_duration_ms)
    if iteration == 1:
        return [
            PlanEntry(cond, role, schedule)
            for cond in ITERATION1_CONDITIONS
            for role in (Role.TRAIN, Role.TEST)
        ]
    return [
        PlanEntry(FREE_CONDITION, role, schedule)
        for role in (Role.TRAIN, Role.TEST)
        for _ in range(2)
    ]


@dataclass
class IterationReport:
    iteration: int
    test_accuracy: float
    confusion: np.ndarray  # (3, 3) true x predicted counts
    weight_variance_open: float
    silhouette: float
    raw_accuracy: float
    # diagnostic extra, iteration 1 only
    per_condition_accuracy: Optional[dict[str, float]] = None

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "test_accuracy": self.test_accuracy,
            "confusion": self.confusion.tolist(),
            "weight_variance_open": self.weight_variance_open,
            "silhouette": self.silhouette,
            "raw_accuracy": self.raw_accuracy,
            "per_condition_accuracy": self.per_condition_accuracy,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IterationReport":
        return cls(
            iteration=doc["iteration"],
            test_accuracy=doc["test_accuracy"],
            confusion=np.array(doc["confusion"], dtype=np.int64),
            weight_variance_open=doc["weight_variance_open"],
            silhouette=doc["silhouette"],
            raw_accuracy=doc["raw_accuracy"],
            per_condition_accuracy=doc.get("per_condition_accuracy"),
        )


@dataclass
class PracticeSummary:
    duration_ms: int
    frames: int
    time_in_intent_ms: dict[Intent, int]
    intent_transitions: int
    hand_transitions: int
    adapt_calls: int


PRACTICE_PATTERN = (Intent.OPEN, Intent.RELAX, Intent.CLOSE, Intent.RELAX)


class Session:
    """Owns the engine and walks the stage machine for one subject.

    `stage` always names the next stage expected to run; invoking any
    other stage raises StageOrderError. When `outdir` is set, every
    completed stage rewrites the manifest so a session can be resumed.
    """

    def __init__(
        self,
        subject: SubjectMeta,
        source: SampleSource,
        config: Optional[AppConfig] = None,
        hub=None,
        outdir: Optional[str | Path] = None,
        paced: bool = False,
    ):
        self.subject = subject
        self.source = source
        self.config = config or AppConfig()
        self.hub = hub
        self.outdir = Path(outdir) if outdir is not None else None
        self.paced = paced
        # invoked once per tick in paced loops; may raise StopRequested
        self.control_hook: Optional[callable] = None
        self.iteration = 1
        self.stage = Stage.COLLECT
        self.datasets: dict[int, dict[Role, list[Recording]]] = {}
        self.models: dict[int, LdaModel] = {}
        self.reports: dict[int, IterationReport] = {}
        self.engine = Engine(
            median_window=self.config.signal.median_window,
            renormalize=self.config.signal.renormalize_after_median,
            actuation_delay_ms=self.config.engine.actuation_delay_ms,
            on_event=self._on_device_event,
        )
        if self.outdir is not None:
            (self.outdir / "recordings").mkdir(parents=True, exist_ok=True)
            (self.outdir / "models").mkdir(parents=True, exist_ok=True)
            self.config.save(self.outdir / "config.json")

    # -- telemetry ---------------------------------------------------------

    def _publish(self, kind: str, t_ms: int, **payload) -> None:
        if self.hub is not None:
            self.hub.publish(kind, t_ms, **payload)

    def _on_device_event(self, event) -> None:
        if event.kind in ("hand", "motor"):
            self._publish(
                "device",
                event.t_ms,
                hand=event.detail["hand"],
                motor_engaged=event.detail["motor_engaged"],
            )

    def _publish_stage(self, stage: Stage, t_ms: int = 0) -> None:
        self._publish("stage", t_ms, stage=stage.value, iteration=self.iteration)

    # -- stage machine -----------------------------------------------------

    def _require_stage(self, *allowed: Stage) -> None:
        if self.stage not in allowed:
            names = "/".join(s.value for s in allowed)
            raise StageOrderError(
                f"stage {names} not allowed now; iteration {self.iteration} "
                f"expects {self.stage.value}"
            )

    # -- stage 1: data collection ------------------------------------------

    def plan_collection(self, iteration: Optional[int] = None) -> list[PlanEntry]:
        return plan_collection(
            self.iteration if iteration is None else iteration,
            self.config.session.cue_duration_ms,
        )

    def run_collection(self, plan: Optional[Sequence[PlanEntry]] = None) -> list[Recording]:
        self._require_stage(Stage.COLLECT)
        if plan is None:
            plan = self.plan_collection()
        model = self.models.get(self.iteration - 1)
        if self.iteration > 1 and model is None:
            raise NoModel(f"iteration {self.iteration} collection needs the previous classifier")
        self._publish_stage(Stage.COLLECT)
        recordings = [
            self._collect_one(entry, idx, model) for idx, entry in enumerate(plan)
        ]
        self.datasets[self.iteration] = {
            Role.TRAIN: [r for r in recordings if r.role is Role.TRAIN],
            Role.TEST: [r for r in recordings if r.role is Role.TEST],
        }
        if self.outdir is not None:
            for rec in recordings:
                recfile.write_recording(rec, self._recording_path(rec), subject_id=self.subject.id)
        self.stage = Stage.TRAIN
        self._write_manifest()
        return recordings

    def _recording_path(self, rec: Recording) -> Path:
        return self.outdir / "recordings" / f"{rec.id}.csv"

    def _collect_one(self, entry: PlanEntry, index: int, model: Optional[LdaModel]) -> Recording:
        slug = entry.condition.label.replace(",", "").replace(" ", "-")
        rec_id = f"it{self.iteration:02d}_{slug}_{entry.role.value}{index}"
        period = SAMPLE_PERIOD_MS
        samples: list[EmgSample] = []

        if model is not None:
            engine = self.engine
            engine.reset(self.config.engine.reset_smoother_at_boundaries)
            engine.load_model(model)
            engine.set_motor(entry.condition.motor is MotorState.ON)
            device = None
        else:
            # no classifier yet: the device follows the verbal cues
            engine = None
            device = Orthosis(self.config.engine.actuation_delay_ms, self._on_device_event)
            device.set_motor(entry.condition.motor is MotorState.ON)

        t = 0
        deadline = time.perf_counter()
        try:
            for cue_intent, duration in entry.schedule.entries:
                self._publish("cue", t, cue=cue_intent.wire_name, duration_ms=duration)
                self.source.begin_trial()
                n = duration // period
                if device is not None:
                    device.request(cue_intent, t)
                if self.paced:
                    for i in range(n):
                        if self.control_hook is not None:
                            self.control_hook()
                        s = self.source.emit(cue_intent, entry.condition, t + i * period)
                        if engine is not None:
                            frame = engine.step(s)
                            self._publish_frame(frame)
                        else:
                            device.tick(t + i * period)
                        samples.append(s)
                        deadline += period / 1000.0
                        pause = deadline - time.perf_counter()
                        if pause > 0:
                            time.sleep(pause)
                else:
                    block = self.source.emit_block(cue_intent, entry.condition, t, n)
                    if engine is not None:
                        for s in block:
                            frame = engine.step(s)
                            self._publish_frame(frame)
                    samples.extend(block)
                t += duration
                if device is not None:
                    device.tick(t)
        except (SourceDropout, ConnectionError, OSError) as e:
            raise RecordingAborted(f"recording {rec_id} aborted mid-stream: {e}") from e
        except StopRequested as e:
            raise RecordingAborted(f"recording {rec_id} stopped by operator") from e

        rec = Recording(rec_id, self.iteration, entry.condition, entry.role, samples)
        rec = label_samples(rec, entry.schedule, self.config.session.label_offset_ms)
        rec.validate()
        return rec

    # -- stage 2: classifier training ----------------------------------------

    def train_iteration(self) -> LdaModel:
        self._require_stage(Stage.TRAIN)
        self._publish_stage(Stage.TRAIN)
        if self.config.session.cumulative_training:
            iterations = range(1, self.iteration + 1)
        else:
            iterations = [self.iteration]
        recs = [r for i in iterations for r in self.datasets[i][Role.TRAIN]]
        xs, ys = [], []
        for rec in recs:
            x, y = rec.labeled_arrays()
            xs.append(x)
            ys.append(y)
        data = lda.LabeledDataset(
            x=preprocess_block(np.concatenate(xs)),
            y=np.concatenate(ys),
        )
        model = lda.fit(
            data,
            shrinkage=self.config.classifier.shrinkage,
            uniform_priors=self.config.classifier.uniform_priors,
        )
        self.models[self.iteration] = model
        if self.outdir is not None:
            lda.save_model(model, self.outdir / "models" / f"it{self.iteration:02d}.json")
        self.stage = Stage.EVALUATE
        self._write_manifest()
        return model

    # -- optional stage: evaluation ------------------------------------------

    def evaluate_iteration(self) -> IterationReport:
        self._require_stage(Stage.EVALUATE)
        self._publish_stage(Stage.EVALUATE)
        model = self.models[self.iteration]
        test_recs = self.datasets[self.iteration][Role.TEST]
        confusion = np.zeros((3, 3), dtype=np.int64)
        raw_confusion = np.zeros((3, 3), dtype=np.int64)
        per_condition: dict[str, np.ndarray] = {}
        for rec in test_recs:
            cm, raw_cm = self._evaluate_recording(model, rec)
            confusion += cm
            raw_confusion += raw_cm
            if self.iteration == 1:
                acc = per_condition.setdefault(rec.condition.label, np.zeros((3, 3), dtype=np.int64))
                acc += cm
        sample = analytics.sample_for_embedding(
            test_recs,
            per_intent=self.config.session.silhouette_sample_per_intent,
            seed=self.config.seed * 1000 + self.iteration,
        )
        report = IterationReport(
            iteration=self.iteration,
            test_accuracy=analytics.accuracy(confusion),
            confusion=confusion,
            weight_variance_open=lda.weight_variance(model, Intent.OPEN),
            silhouette=analytics.silhouette(sample.x, sample.labels),
            raw_accuracy=analytics.accuracy(raw_confusion),
            per_condition_accuracy=(
                {label: analytics.accuracy(cm) for label, cm in per_condition.items()}
                if self.iteration == 1
                else None
            ),
        )
        self.reports[self.iteration] = report
        self.stage = Stage.PRACTICE
        self._write_manifest()
        return report

    def _evaluate_recording(self, model: LdaModel, rec: Recording) -> tuple[np.ndarray, np.ndarray]:
        """Stream one test recording through the deployed pipeline and
        count (true, predicted) pairs; also tracks unsmoothed decisions."""
        engine = self.engine
        engine.reset(self.config.engine.reset_smoother_at_boundaries)
        engine.load_model(model)
        confusion = np.zeros((3, 3), dtype=np.int64)
        raw_confusion = np.zeros((3, 3), dtype=np.int64)
        raw_current = Intent.RELAX
        for s in rec.samples:
            frame = engine.step(s)
            raw_current = decide(frame.raw_p, raw_current)
            if s.cue is not None:
                confusion[int(s.cue), int(frame.intent)] += 1
                raw_confusion[int(s.cue), int(raw_current)] += 1
        return confusion, raw_confusion

    # -- stage 3: reciprocal learning practice --------------------------------

    def run_practice(self, duration_ms: Optional[int] = None) -> PracticeSummary:
        # evaluation is optional, so practice may follow training directly
        self._require_stage(Stage.EVALUATE, Stage.PRACTICE)
        model = self.models.get(self.iteration)
        if model is None:
            raise NoModel(f"iteration {self.iteration} has no trained classifier")
        duration = self.config.session.practice_duration_ms if duration_ms is None else duration_ms
        block_ms = self.config.session.practice_block_ms
        period = SAMPLE_PERIOD_MS
        self._publish_stage(Stage.PRACTICE)

        engine = self.engine
        engine.reset(self.config.engine.reset_smoother_at_boundaries)
        engine.load_model(model)
        adaptive = hasattr(self.source, "adapt")
        time_in_intent = {intent: 0 for intent in INTENTS}
        frames = 0
        adapt_calls = 0
        intent_transitions = 0
        hand_start = engine.orthosis.hand_transitions
        previous = engine.current_intent

        t = 0
        block_index = 0
        stopped = False
        deadline = time.perf_counter()
        while t < duration and not stopped:
            attempted = PRACTICE_PATTERN[block_index % len(PRACTICE_PATTERN)]
            block_index += 1
            block_end = min(t + block_ms, duration)
            self._publish("cue", t, cue=attempted.wire_name, duration_ms=block_end - t)
            self.source.begin_trial()
            while t < block_end:
                if self.control_hook is not None:
                    try:
                        self.control_hook()
                    except StopRequested:
                        stopped = True
                        break
                s = self.source.emit(attempted, FREE_CONDITION, t)
                frame = engine.step(s)
                self._publish_frame(frame)
                time_in_intent[frame.intent] += period
                frames += 1
                if frame.intent is not previous:
                    intent_transitions += 1
                    previous = frame.intent
                if adaptive and attempted is not Intent.RELAX:
                    self.source.adapt(frame, attempted, model.weights, model.biases)
                    adapt_calls += 1
                t += period
                if self.paced:
                    deadline += period / 1000.0
                    pause = deadline - time.perf_counter()
                    if pause > 0:
                        time.sleep(pause)

        summary = PracticeSummary(
            duration_ms=t,
            frames=frames,
            time_in_intent_ms=time_in_intent,
            intent_transitions=intent_transitions,
            hand_transitions=engine.orthosis.hand_transitions - hand_start,
            adapt_calls=adapt_calls,
        )
        self.iteration += 1
        self.stage = Stage.COLLECT
        self._write_manifest()
        return summary

    def _publish_frame(self, frame) -> None:
        if self.hub is None:
            return
        self._publish(
            "frame",
            frame.t_ms,
            p_relax=frame.raw_p.p_relax,
            p_open=frame.raw_p.p_open,
            p_close=frame.raw_p.p_close,
            bar_open=frame.bar_open,
            bar_close=frame.bar_close,
            intent=frame.intent.wire_name,
            hand=frame.hand.value,
        )

    # -- loop ----------------------------------------------------------------

    def run_iteration(self, practice: bool = True, practice_ms: Optional[int] = None) -> None:
        self.run_collection()
        self.train_iteration()
        self.evaluate_iteration()
        if practice:
            self.run_practice(practice_ms)

    def iterate(self, n_iterations: int, skip_final_practice: bool = False,
                practice_ms: Optional[int] = None) -> list[IterationReport]:
        """Run the full loop for n iterations and return the reports.

        skip_final_practice drops the last practice block (it cannot
        influence any collected data); the stage machine is left ready
        for a further iteration in either case.
        """
        start = self.iteration
        for i in range(start, start + n_iterations):
            last = i == start + n_iterations - 1
            self.run_collection()
            self.train_iteration()
            self.evaluate_iteration()
            if last and skip_final_practice:
                self.iteration += 1
                self.stage = Stage.COLLECT
                self._write_manifest()
            else:
                self.run_practice(practice_ms)
        return [self.reports[i] for i in range(start, start + n_iterations)]

    # -- persistence -----------------------------------------------------------

    def _write_manifest(self) -> None:
        if self.outdir is None:
            return
        import json

        iterations = {}
        for i in sorted(self.datasets):
            recs = self.datasets[i][Role.TRAIN] + self.datasets[i][Role.TEST]
            entry = {
                "recordings": [
                    {
                        "id": r.id,
                        "path": str(Path("recordings") / f"{r.id}.csv"),
                        "role": r.role.value,
                        "condition": r.condition.label,
                    }
                    for r in recs
                ],
            }
            if i in self.models:
                entry["model_path"] = str(Path("models") / f"it{i:02d}.json")
            if i in self.reports:
                entry["report"] = self.reports[i].to_json()
            iterations[str(i)] = entry
        doc = {
            "version": 1,
            "subject": self.subject.to_json(),
            "iteration": self.iteration,
            "stage": self.stage.value,
            "seed": self.config.seed,
            "iterations": iterations,
        }
        (self.outdir / "manifest.json").write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(
        cls,
        outdir: str | Path,
        source: SampleSource,
        hub=None,
        paced: bool = False,
    ) -> "Session":
        """Rebuild a session from its manifest directory."""
        import json

        outdir = Path(outdir)
        doc = json.loads((outdir / "manifest.json").read_text())
        if doc.get("version") != 1:
            raise ValueError(f"unsupported manifest version {doc.get('version')}")
        config = AppConfig.load(outdir / "config.json")
        session = cls(SubjectMeta.from_json(doc["subject"]), source, config, hub, outdir, paced)
        session.iteration = int(doc["iteration"])
        session.stage = Stage(doc["stage"])
        for key, entry in doc["iterations"].items():
            i = int(key)
            train, test = [], []
            for rec_doc in entry["recordings"]:
                rec = recfile.read_recording(outdir / rec_doc["path"])
                (train if rec.role is Role.TRAIN else test).append(rec)
            session.datasets[i] = {Role.TRAIN: train, Role.TEST: test}
            if "model_path" in entry:
                session.models[i] = lda.load_model(outdir / entry["model_path"])
            if "report" in entry:
                session.reports[i] = IterationReport.from_json(entry["report"])
        return session
