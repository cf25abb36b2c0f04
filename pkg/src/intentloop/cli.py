"""Command-line surface.

Subcommands: collect, train, evaluate, practice, iterate, replay, tsne,
report, serve. Stage commands operate on a manifest directory and can
be re-run one stage at a time; `iterate` runs the whole loop against
the simulator. All simulator-backed commands are deterministic given
--seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analytics, lda, recfile
from .config import AppConfig
from .core import SubjectMeta
from .engine import Engine
from .errors import IntentLoopError, NoModel
from .session import Session, Stage
from .simsubject import (
    SimulatedSubject,
    SubjectProfile,
    default_adaptive_profile,
    default_static_profile,
)
from .sources import LiveSource, NullSource
from .telemetry import SessionService, TelemetryHub


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--manifest", type=Path, default=None, help="session manifest directory")


def _load_config(args) -> AppConfig:
    config = AppConfig.load(args.config) if args.config else AppConfig()
    if args.seed is not None:
        config = AppConfig(
            signal=config.signal, classifier=config.classifier, engine=config.engine,
            session=config.session, tsne=config.tsne, seed=args.seed,
        )
    return config


def _subject_profile(spec: str, seed: int) -> SubjectProfile:
    if spec == "sim:adaptive":
        return default_adaptive_profile(seed)
    if spec == "sim:static":
        return default_static_profile(seed)
    return SubjectProfile.load(spec)


def _sim_meta(spec: str, seed: int) -> SubjectMeta:
    return SubjectMeta(id=f"sim-{spec.split(':')[-1].split('/')[-1]}-s{seed}",
                       age=54, gender="n/a", fm_ue=30)


def _make_source(args, config: AppConfig):
    """Returns (source, meta, subject_or_none) from --subject/--source."""
    live = getattr(args, "source", None)
    if live and live.startswith("tcp:"):
        _, host, port = live.split(":")
        meta = SubjectMeta(id=f"live-{host}:{port}", age=0, gender="n/a", fm_ue=0)
        return LiveSource(host, int(port)), meta, None
    spec = getattr(args, "subject", None) or "sim:adaptive"
    profile = _subject_profile(spec, config.seed)
    subject = SimulatedSubject(profile)
    return subject, _sim_meta(spec, config.seed), subject


def _save_subject(session_dir: Path, subject: SimulatedSubject | None) -> None:
    if subject is not None:
        subject.current_profile().save(session_dir / "subject_profile.json")


def _open_session(args, config: AppConfig, need_source: bool = True) -> tuple[Session, SimulatedSubject | None]:
    outdir = args.manifest
    if outdir is None:
        raise IntentLoopError("--manifest is required for stage commands")
    manifest_file = Path(outdir) / "manifest.json"
    profile_file = Path(outdir) / "subject_profile.json"
    if need_source:
        if getattr(args, "subject", None) is None and profile_file.exists():
            subject = SimulatedSubject(SubjectProfile.load(profile_file))
            source = subject
        else:
            source, _, subject = _make_source(args, config)
    else:
        source, subject = NullSource(), None
    if manifest_file.exists():
        session = Session.load(outdir, source)
        return session, subject
    _, meta, _ = _make_source(args, config)
    session = Session(meta, source, config, outdir=outdir)
    _save_subject(Path(outdir), subject)
    return session, subject


def cmd_collect(args) -> int:
    config = _load_config(args)
    session, subject = _open_session(args, config)
    recs = session.run_collection()
    _save_subject(session.outdir, subject)
    print(f"collected {len(recs)} recordings for iteration {session.iteration} -> {session.outdir}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    session, _ = _open_session(args, config, need_source=False)
    model = session.train_iteration()
    print(f"trained iteration {session.iteration} classifier "
          f"(gamma={model.shrinkage}, priors={np.round(model.priors, 3).tolist()})")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    session, _ = _open_session(args, config, need_source=False)
    if session.models.get(session.iteration) is None:
        raise NoModel(f"iteration {session.iteration} has no trained classifier yet")
    report = session.evaluate_iteration()
    print(json.dumps(report.to_json(), indent=1))
    return 0


def cmd_practice(args) -> int:
    config = _load_config(args)
    session, subject = _open_session(args, config)
    duration_ms = args.duration_s * 1000 if args.duration_s else None
    summary = session.run_practice(duration_ms)
    _save_subject(session.outdir, subject)
    print(f"practice done: {summary.frames} frames, "
          f"{summary.intent_transitions} intent transitions, "
          f"{summary.adapt_calls} adaptation steps")
    return 0


def cmd_iterate(args) -> int:
    config = _load_config(args)
    outdir = args.manifest or Path(f"runs/session-seed{config.seed}")
    outdir.mkdir(parents=True, exist_ok=True)
    if (outdir / "manifest.json").exists():
        raise IntentLoopError(f"{outdir} already holds a session; pick a fresh --manifest")
    source, meta, subject = _make_source(args, config)
    session = Session(meta, source, config, outdir=outdir)
    _save_subject(outdir, subject)
    reports = session.iterate(args.iterations, skip_final_practice=args.skip_final_practice)
    _save_subject(outdir, subject)
    for r in reports:
        print(f"iteration {r.iteration}: accuracy={r.test_accuracy:.3f} "
              f"raw={r.raw_accuracy:.3f} silhouette={r.silhouette:.3f} "
              f"var(w_open)={r.weight_variance_open:.2e}")
    print(f"manifest: {outdir / 'manifest.json'}")
    return 0


def cmd_replay(args) -> int:
    config = _load_config(args)
    rec = recfile.read_recording(args.recording)
    engine = Engine(
        model=lda.load_model(args.model),
        median_window=config.signal.median_window,
        renormalize=config.signal.renormalize_after_median,
        actuation_delay_ms=config.engine.actuation_delay_ms,
    )
    summary = engine.run_stream(rec.samples)
    print(f"frames={summary.frames} intent_transitions={summary.intent_transitions} "
          f"hand_transitions={summary.hand_transitions} wall_s={summary.wall_s:.3f} "
          f"latency_p50_ms={summary.latency_p50_ms:.3f} "
          f"latency_p99_ms={summary.latency_p99_ms:.3f}")
    if summary.error:
        print(f"stream error: {summary.error}", file=sys.stderr)
        return 1
    return 0


def _tsne_recordings(args, session: Session | None) -> list:
    if args.recording:
        return [recfile.read_recording(p) for p in args.recording]
    if session is None:
        raise IntentLoopError("need --manifest or --recording for tsne input")
    name = args.input or f"iter{max(session.datasets)}_test"
    try:
        iter_part, role_part = name.split("_")
        iteration = int(iter_part.removeprefix("iter"))
        from .core import Role

        role = Role(role_part)
    except (ValueError, KeyError) as e:
        raise IntentLoopError(f"bad --input {name!r}; expected e.g. iter2_test") from e
    if iteration not in session.datasets:
        raise IntentLoopError(f"iteration {iteration} has no collected data")
    return session.datasets[iteration][role]


def cmd_tsne(args) -> int:
    config = _load_config(args)
    session = None
    if args.manifest is not None:
        session = Session.load(args.manifest, NullSource())
    recs = _tsne_recordings(args, session)
    sample = analytics.sample_for_embedding(
        recs, per_intent=args.per_intent, seed=config.seed,
        preprocessed=not config.tsne.embed_raw_units,
    )
    for intent, (wanted, got) in sample.shortfall.items():
        print(f"warning: {intent.wire_name} has only {got} samples of {wanted} requested",
              file=sys.stderr)
    t = config.tsne
    result = analytics.tsne(
        sample.x, perplexity=t.perplexity, out_dims=t.out_dims, iterations=t.iterations,
        seed=config.seed, labels=sample.labels, learning_rate=t.learning_rate,
        early_exaggeration=t.early_exaggeration, exaggeration_iters=t.exaggeration_iters,
        initial_momentum=t.initial_momentum, final_momentum=t.final_momentum,
        momentum_switch_iter=t.momentum_switch_iter, init_std=t.init_std,
    )
    out = args.out or Path("embedding.csv")
    analytics.write_embedding(result, out)
    print(f"embedded {len(result.points)} points: kl {result.kl_initial:.3f} -> "
          f"{result.kl_final:.3f}, wrote {out}")
    return 0


def cmd_report(args) -> int:
    _ = _load_config(args)
    if args.manifest is None:
        raise IntentLoopError("--manifest is required")
    session = Session.load(args.manifest, NullSource())
    first, second = args.iterations
    if first not in session.reports or second not in session.reports:
        raise IntentLoopError(
            f"manifest has reports for {sorted(session.reports)}; need {first} and {second}"
        )
    comparison = analytics.iteration_comparison(session.reports[first], session.reports[second])
    print(comparison.format_text())
    if args.out:
        comparison.write_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args)
    host, port = args.bind.rsplit(":", 1)
    manifest_dir = args.manifest
    hub = TelemetryHub()
    if manifest_dir is not None and (Path(manifest_dir) / "manifest.json").exists():
        profile_file = Path(manifest_dir) / "subject_profile.json"
        if profile_file.exists() and not getattr(args, "subject", None):
            source = SimulatedSubject(SubjectProfile.load(profile_file))
        else:
            source, _, _ = _make_source(args, config)
        session = Session.load(manifest_dir, source, hub=hub)
    else:
        source, meta, subject = _make_source(args, config)
        session = Session(meta, source, config, hub=hub, outdir=manifest_dir)
        if manifest_dir is not None:
            _save_subject(Path(manifest_dir), subject)
    if args.prepare and session.stage is Stage.COLLECT:
        # run the first iteration up to practice in batch so a live
        # practice can start immediately
        session.paced = False
        session.run_collection()
        session.train_iteration()
        report = session.evaluate_iteration()
        print(f"prepared: iteration {report.iteration} accuracy {report.test_accuracy:.3f}",
              flush=True)
    service = SessionService(session, host, int(port))
    print(f"serving telemetry on {service.address[0]}:{service.address[1]}", flush=True)
    try:
        service.run_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentloop",
        description="EMG intent inferral with reciprocal-learning sessions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="run the data-collection stage")
    _add_common(p)
    p.add_argument("--subject", help="sim:adaptive | sim:static | profile.json")
    p.add_argument("--source", help="tcp:HOST:PORT for a live stream")
    p.set_defaults(fn=cmd_collect)

    p = sub.add_parser("train", help="train this iteration's classifier")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate on the held-out recordings")
    _add_common(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("practice", help="run reciprocal-learning practice")
    _add_common(p)
    p.add_argument("--subject", help="sim:adaptive | sim:static | profile.json")
    p.add_argument("--source", help="tcp:HOST:PORT for a live stream")
    p.add_argument("--duration-s", type=int, default=None)
    p.set_defaults(fn=cmd_practice)

    p = sub.add_parser("iterate", help="run the full loop for N iterations")
    _add_common(p)
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--subject", default="sim:adaptive")
    p.add_argument("--skip-final-practice", action="store_true")
    p.set_defaults(fn=cmd_iterate)

    p = sub.add_parser("replay", help="replay a recording through the engine")
    _add_common(p)
    p.add_argument("--recording", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("tsne", help="embed sampled signals in 3D")
    _add_common(p)
    p.add_argument("--input", help="dataset name, e.g. iter2_test")
    p.add_argument("--recording", type=Path, nargs="*", help="explicit recording files")
    p.add_argument("--per-intent", type=int, default=1000)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(fn=cmd_tsne)

    p = sub.add_parser("report", help="compare two iterations side by side")
    _add_common(p)
    p.add_argument("--iterations", type=int, nargs=2, default=[1, 2])
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="serve live telemetry and controls")
    _add_common(p)
    p.add_argument("--bind", default="127.0.0.1:7070")
    p.add_argument("--subject", help="sim:adaptive | sim:static | profile.json")
    p.add_argument("--source", help="tcp:HOST:PORT for a live stream")
    p.add_argument("--prepare", action="store_true",
                   help="run collect/train/evaluate once before serving")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (IntentLoopError, OSError, ValueError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
