#!/usr/bin/env python3
"""Embed a session's collected signals in 3D and report separability.

Samples up to N labeled signals per intent from the chosen iteration's
recordings, runs the exact t-SNE, and writes one point file per
iteration so before/after cluster structure can be plotted side by side.

Usage:
    python scripts/embed_session_data.py --manifest runs/session-seed7 --per-intent 1000
"""

import argparse
from pathlib import Path

from intentloop.analytics import sample_for_embedding, silhouette, tsne, write_embedding
from intentloop.config import AppConfig
from intentloop.core import Role
from intentloop.session import Session
from intentloop.sources import NullSource


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", type=Path, required=True)
    parser.add_argument("--per-intent", type=int, default=1000)
    parser.add_argument("--role", choices=["train", "test"], default="test")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args()

    session = Session.load(args.manifest, NullSource())
    config = AppConfig.load(args.manifest / "config.json")
    outdir = args.out or (args.manifest / "embeddings")
    outdir.mkdir(parents=True, exist_ok=True)

    for iteration in sorted(session.datasets):
        recs = session.datasets[iteration][Role(args.role)]
        sample = sample_for_embedding(recs, args.per_intent, seed=args.seed)
        for intent, (wanted, got) in sample.shortfall.items():
            print(f"iteration {iteration}: {intent.wire_name} has {got}/{wanted} samples")
        t = config.tsne
        result = tsne(
            sample.x, perplexity=t.perplexity, out_dims=t.out_dims,
            iterations=t.iterations, seed=args.seed, labels=sample.labels,
            learning_rate=t.learning_rate, early_exaggeration=t.early_exaggeration,
            exaggeration_iters=t.exaggeration_iters, initial_momentum=t.initial_momentum,
            final_momentum=t.final_momentum, momentum_switch_iter=t.momentum_switch_iter,
            init_std=t.init_std,
        )
        path = outdir / f"iteration{iteration}_{args.role}.csv"
        write_embedding(result, path)
        sil_high = silhouette(sample.x, sample.labels)
        sil_low = silhouette(result.points, sample.labels)
        print(f"iteration {iteration}: {len(result.points)} points, "
              f"kl {result.kl_initial:.3f} -> {result.kl_final:.3f}, "
              f"silhouette 8D {sil_high:+.3f} / embedded {sil_low:+.3f} -> {path}")


if __name__ == "__main__":
    main()
