#!/usr/bin/env python3
"""Multi-seed closed-loop experiment: adaptive vs non-adaptive subjects.

Runs the full two-iteration loop for each seed and profile, then prints
accuracy / weight-variance / silhouette tables and writes plot-ready CSV
files. This is the desk-scale analog of the paired-iteration comparison
tables; with an adaptive subject the second iteration should win, with a
frozen subject nothing should change beyond noise.

Usage:
    python scripts/run_reciprocal_experiment.py --seeds 20 --out results/
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from intentloop.config import AppConfig
from intentloop.core import SubjectMeta
from intentloop.session import Session
from intentloop.simsubject import (
    SimulatedSubject,
    default_adaptive_profile,
    default_static_profile,
)

META = SubjectMeta(id="experiment", age=50, gender="n/a", fm_ue=30)
PROFILES = {"adaptive": default_adaptive_profile, "static": default_static_profile}


def run_one(seed, profile_factory, practice_ms):
    subject = SimulatedSubject(profile_factory(seed))
    session = Session(META, subject, AppConfig(seed=seed))
    return session.iterate(2, skip_final_practice=True, practice_ms=practice_ms)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--practice-s", type=int, default=180)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for name, factory in PROFILES.items():
        t0 = time.perf_counter()
        for seed in range(args.seeds):
            r1, r2 = run_one(seed, factory, args.practice_s * 1000)
            rows.append({
                "profile": name, "seed": seed,
                "acc_1": r1.test_accuracy, "acc_2": r2.test_accuracy,
                "var_open_1": r1.weight_variance_open, "var_open_2": r2.weight_variance_open,
                "silhouette_1": r1.silhouette, "silhouette_2": r2.silhouette,
            })
        print(f"{name}: {args.seeds} sessions in {time.perf_counter() - t0:.1f}s")

    out_csv = args.out / "reciprocal_experiment.csv"
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

    for name in PROFILES:
        sub = [r for r in rows if r["profile"] == name]
        acc1 = np.array([r["acc_1"] for r in sub])
        acc2 = np.array([r["acc_2"] for r in sub])
        var_up = sum(r["var_open_2"] > r["var_open_1"] for r in sub)
        sil_up = sum(r["silhouette_2"] > r["silhouette_1"] for r in sub)
        print(f"\n=== {name} subject ({len(sub)} seeds) ===")
        print(f"accuracy:        {acc1.mean():.3f} -> {acc2.mean():.3f} "
              f"(delta {acc2.mean() - acc1.mean():+.3f}, "
              f"per-seed min {min(acc2 - acc1):+.3f} max {max(acc2 - acc1):+.3f})")
        print(f"var(w_open) up:  {var_up}/{len(sub)} seeds")
        print(f"silhouette up:   {sil_up}/{len(sub)} seeds")
    print(f"\nwrote {out_csv}")


if __name__ == "__main__":
    main()
